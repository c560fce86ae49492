#include "liftbp/netgen.hpp"

#include <cmath>
#include <random>

#include "liftbp/autodiff.hpp"

namespace liftbp {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return x;
}

bool domain_safe(const Primitive& op, const std::vector<double>& args,
                 const GenOptions& opt) {
    const double margin = 0.1;
    switch (op.kind) {
        case OpKind::Div:
            if (std::abs(args[1]) < margin) return false;
            break;
        case OpKind::Log:
            if (args[0] < margin) return false;
            break;
        case OpKind::PowConst: {
            bool integral = op.c == std::floor(op.c);
            if (!integral && args[0] < margin) return false;
            if (op.c < 0.0 && std::abs(args[0]) < margin) return false;
            break;
        }
        case OpKind::Exp:
            if (args[0] > (opt.smooth_only ? 1.5 : 3.0)) return false;
            break;
        default:
            break;
    }
    double v = op.eval(args);
    return std::isfinite(v) && std::abs(v) <= opt.max_abs_value;
}

FunctionNetwork attempt(std::mt19937_64& rng, const GenOptions& opt) {
    FunctionNetwork net;
    auto add_var = [&](const std::string& n) {
        net.var_names.push_back(n);
        net.input_value.push_back(std::numeric_limits<double>::quiet_NaN());
        net.def_of.push_back(-1);
        return net.var_count() - 1;
    };

    std::uniform_real_distribution<double> input_dist(0.5, 2.0);
    int n_inputs = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<double> values;
    for (int i = 0; i < n_inputs; ++i) {
        VarId v = add_var("a" + std::to_string(i));
        net.input_value[v] = input_dist(rng);
        net.inputs.push_back(v);
        values.push_back(net.input_value[v]);
    }

    std::vector<Primitive> pool;
    if (opt.smooth_only) {
        pool = {{OpKind::Add}, {OpKind::Sub}, {OpKind::Mul},
                {OpKind::Tanh}, {OpKind::Sin}, {OpKind::Exp},
                {OpKind::PowConst, 2.0}};
    } else {
        pool = {{OpKind::Add},  {OpKind::Sub},  {OpKind::Mul},
                {OpKind::Div},  {OpKind::Neg},  {OpKind::Exp},
                {OpKind::Log},  {OpKind::Sin},  {OpKind::Cos},
                {OpKind::Tanh}, {OpKind::PowConst, 2.0},
                {OpKind::PowConst, 3.0}, {OpKind::PowConst, -1.0},
                {OpKind::PowConst, 0.5}, {OpKind::MulConst, 0.0},
                {OpKind::AddConst, 0.0}};
    }

    int n_funcs = std::uniform_int_distribution<int>(1, opt.max_functions)(rng);
    for (int f = 0; f < n_funcs; ++f) {
        bool placed = false;
        for (int tries = 0; tries < 200 && !placed; ++tries) {
            Primitive op =
                pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
            if (op.kind == OpKind::MulConst)
                op.c = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
            if (op.kind == OpKind::AddConst)
                op.c = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
            std::vector<VarId> args;
            std::vector<double> argvals;
            for (int s = 0; s < op.arity(); ++s) {
                VarId v = std::uniform_int_distribution<int>(
                    0, net.var_count() - 1)(rng);
                args.push_back(v);
                argvals.push_back(values[v]);
            }
            if (!domain_safe(op, argvals, opt)) continue;
            VarId out = add_var("n" + std::to_string(f));
            FuncNode fn;
            fn.output = out;
            fn.op = op;
            fn.inputs = args;
            net.def_of[out] = static_cast<int>(net.functions.size());
            net.functions.push_back(fn);
            values.push_back(op.eval(argvals));
            placed = true;
        }
        if (!placed) {
            // Negation is always admissible.
            VarId src = std::uniform_int_distribution<int>(
                0, net.var_count() - 1)(rng);
            VarId out = add_var("n" + std::to_string(f));
            FuncNode fn;
            fn.output = out;
            fn.op = {OpKind::Neg};
            fn.inputs = {src};
            net.def_of[out] = static_cast<int>(net.functions.size());
            net.functions.push_back(fn);
            values.push_back(-values[src]);
        }
    }
    net.objective = net.functions.back().output;
    return net;
}

}  // namespace

FunctionNetwork random_network(std::uint64_t seed, const GenOptions& opt) {
    GenOptions o = opt;
    if (o.smooth_only && o.max_functions > 6) o.max_functions = 6;
    for (int a = 0; a < 100; ++a) {
        std::mt19937_64 rng(mix(seed, a));
        FunctionNetwork net = attempt(rng, o);
        try {
            Valuation vals = evaluate(net);
            AdjointSet adj = backprop(net, vals);
            bool ok = true;
            for (double g : adj.adjoints)
                if (!std::isfinite(g) || std::abs(g) > o.max_abs_adjoint)
                    ok = false;
            if (ok) return net;
        } catch (const Error&) {
            // fall through to the next attempt
        }
    }
    throw Error("random_network: no admissible network after 100 attempts");
}

}  // namespace liftbp
