#include "liftbp/autodiff.hpp"

#include <cmath>
#include <limits>

namespace liftbp {

namespace {

void check_domain(const FunctionNetwork& net, const FuncNode& fn,
                  std::span<const double> args) {
    switch (fn.op.kind) {
        case OpKind::Log:
            if (args[0] <= 0.0)
                throw EvalError(net.name(fn.output), "log of non-positive value");
            break;
        case OpKind::Div:
            if (args[1] == 0.0)
                throw EvalError(net.name(fn.output), "division by zero");
            break;
        case OpKind::PowConst: {
            double c = fn.op.c;
            bool integral = c == std::floor(c);
            if (args[0] < 0.0 && !integral)
                throw EvalError(net.name(fn.output),
                                "fractional power of negative base");
            if (args[0] == 0.0 && c < 0.0)
                throw EvalError(net.name(fn.output), "negative power of zero");
            break;
        }
        default:
            break;
    }
}

Valuation evaluate_with(const FunctionNetwork& net,
                        const std::vector<double>& input_override) {
    Valuation vals;
    vals.values.assign(net.var_count(),
                       std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < net.inputs.size(); ++i)
        vals.values[net.inputs[i]] = input_override[i];
    std::vector<double> args;
    for (int f : topo_order(net)) {
        const FuncNode& fn = net.functions[f];
        args.clear();
        for (VarId in : fn.inputs) args.push_back(vals.values[in]);
        check_domain(net, fn, args);
        double v = fn.op.eval(args);
        if (!std::isfinite(v))
            throw EvalError(net.name(fn.output), "non-finite result");
        vals.values[fn.output] = v;
    }
    if (!std::isfinite(vals.values[net.objective]))
        throw EvalError(net.name(net.objective), "objective is not finite");
    return vals;
}

}  // namespace

Valuation evaluate(const FunctionNetwork& net) {
    std::vector<double> inputs;
    for (VarId v : net.inputs) inputs.push_back(net.input_value[v]);
    for (double x : inputs)
        if (!std::isfinite(x))
            throw EvalError("<input>", "non-finite input value");
    return evaluate_with(net, inputs);
}

AdjointSet backprop(const FunctionNetwork& net, const Valuation& vals) {
    AdjointSet adj;
    adj.adjoints.assign(net.var_count(), 0.0);
    adj.adjoints[net.objective] = 1.0;
    std::vector<int> order = topo_order(net);
    std::vector<double> args;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const FuncNode& fn = net.functions[*it];
        double a_out = adj.adjoints[fn.output];
        args.clear();
        for (VarId in : fn.inputs) args.push_back(vals.values[in]);
        for (size_t slot = 0; slot < fn.inputs.size(); ++slot)
            adj.adjoints[fn.inputs[slot]] +=
                a_out * fn.op.partial(static_cast<int>(slot), args);
    }
    return adj;
}

std::vector<std::pair<VarId, double>> finite_diff_gradient(
    const FunctionNetwork& net, double h) {
    if (!(h > 0.0)) throw Error("finite_diff_gradient: step h must be > 0");
    std::vector<double> base;
    for (VarId v : net.inputs) base.push_back(net.input_value[v]);
    std::vector<std::pair<VarId, double>> grad;
    for (size_t i = 0; i < net.inputs.size(); ++i) {
        std::vector<double> lo = base, hi = base;
        lo[i] -= h;
        hi[i] += h;
        double z_hi = evaluate_with(net, hi).values[net.objective];
        double z_lo = evaluate_with(net, lo).values[net.objective];
        grad.emplace_back(net.inputs[i], (z_hi - z_lo) / (2.0 * h));
    }
    return grad;
}

}  // namespace liftbp
