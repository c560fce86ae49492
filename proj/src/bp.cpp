#include "liftbp/bp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace liftbp {

namespace {
constexpr double kFar = 1e300;
constexpr double kAnchorTol = 1e-9;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double normalize_max(std::vector<double>& logvals) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logvals) mx = std::max(mx, v);
    if (!std::isfinite(mx))
        throw BPError("grid underflow: all quadrature contributions vanished");
    for (double& v : logvals) v -= mx;
    return mx;
}
}  // namespace

void BPConfig::check() const {
    if (!(kT > 0.0)) throw Error("BPConfig: kT must be > 0");
    if (!(sigma > 0.0)) throw Error("BPConfig: sigma must be > 0");
    if (grid_points < 33 || grid_points % 2 == 0)
        throw Error("BPConfig: grid_points must be odd and >= 33");
    if (!(grid_span > 0.0)) throw Error("BPConfig: grid_span must be > 0");
    if (quad_nodes < 1 || quad_nodes > 9)
        throw Error("BPConfig: quad_nodes must be in [1, 9]");
    if (schedule.max_iters < 1) throw Error("BPConfig: max_iters must be >= 1");
    if (!(schedule.tol > 0.0)) throw Error("BPConfig: tol must be > 0");
}

bool AnchorSlope::anchored() const { return !std::isnan(anchor); }

bool is_upward(const FactorGraph& fg, int factor, VarId var, Direction dir) {
    const FactorNode& fn = fg.factors[factor];
    switch (fn.kind) {
        case FactorKind::Function: {
            bool is_output = fg.output_of(factor) == var;
            return is_output == (dir == Direction::FactorToVar);
        }
        case FactorKind::DeltaPrior:
            return dir == Direction::FactorToVar;
        case FactorKind::Boltzmann:
            return dir == Direction::VarToFactor;
    }
    return false;
}

MessageStore::MessageStore(const FactorGraph& fg) {
    offset_.reserve(fg.factors.size());
    for (size_t f = 0; f < fg.factors.size(); ++f) {
        offset_.push_back(static_cast<int>(edges_.size()));
        for (VarId v : fg.factors[f].neighbors)
            edges_.push_back({static_cast<int>(f), v});
    }
    msgs_.resize(2 * edges_.size());
}

int MessageStore::find_edge(int factor, VarId var) const {
    int start = offset_[factor];
    int end = factor + 1 < static_cast<int>(offset_.size())
                  ? offset_[factor + 1]
                  : static_cast<int>(edges_.size());
    for (int e = start; e < end; ++e)
        if (edges_[e].var == var) return e;
    throw BPError("no such edge in factor graph");
}

const MessageValue* MessageStore::get(int factor, VarId var,
                                      Direction dir) const {
    const auto& slot = msgs_[2 * find_edge(factor, var) + static_cast<int>(dir)];
    return slot ? &*slot : nullptr;
}

void MessageStore::set(int factor, VarId var, Direction dir, MessageValue v) {
    msgs_[2 * find_edge(factor, var) + static_cast<int>(dir)] = std::move(v);
}

int below_factor(const FactorGraph& fg, VarId var) {
    if (fg.def_factor_of_var[var] >= 0) return fg.def_factor_of_var[var];
    return fg.prior_of_var[var];
}

std::optional<double> upward_anchor(const FactorGraph& fg,
                                    const MessageStore& store, VarId var) {
    int below = below_factor(fg, var);
    if (below < 0) return std::nullopt;
    const MessageValue* m = store.get(below, var, Direction::FactorToVar);
    if (!m) return std::nullopt;
    if (const auto* pm = std::get_if<PointMass>(m)) return pm->anchor;
    if (const auto* g = std::get_if<GaussianParam>(m)) return g->mean;
    return std::nullopt;
}

namespace {

std::optional<GaussianParam> upward_gaussian(const FactorGraph& fg,
                                             const MessageStore& store,
                                             VarId var) {
    int below = below_factor(fg, var);
    if (below < 0) return std::nullopt;
    const MessageValue* m = store.get(below, var, Direction::FactorToVar);
    if (!m) return std::nullopt;
    if (const auto* g = std::get_if<GaussianParam>(m)) return *g;
    return std::nullopt;
}

// Factors adjacent to var excluding `exclude`, Boltzmann first, then
// function factors in reverse topological order. Matches backprop's
// accumulation order so delta-mode slopes reproduce adjoints bit-for-bit.
std::vector<int> downward_contributors(const FactorGraph& fg, VarId var,
                                       int exclude) {
    std::vector<int> funcs;
    bool boltzmann = false;
    for (int f : fg.factors_of_var[var]) {
        if (f == exclude) continue;
        if (fg.factors[f].kind == FactorKind::Boltzmann) boltzmann = true;
        else if (fg.factors[f].kind == FactorKind::Function &&
                 fg.output_of(f) != var)
            funcs.push_back(f);
    }
    std::sort(funcs.begin(), funcs.end(), [&](int a, int b) {
        return fg.topo_pos[fg.factors[a].func] > fg.topo_pos[fg.factors[b].func];
    });
    std::vector<int> out;
    if (boltzmann) out.push_back(fg.boltzmann_factor);
    out.insert(out.end(), funcs.begin(), funcs.end());
    return out;
}

GridLog constant_grid(const GridSpec& spec) {
    return GridLog{spec, std::vector<double>(spec.n, 0.0)};
}

}  // namespace

std::vector<std::pair<double, double>> gauss_hermite(int n) {
    // Newton iteration on H_n (physicists'), standard initial guesses.
    std::vector<std::pair<double, double>> out(n);
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) -
                1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * out[0].first;
        else if (i == 3)
            z = 1.91 * z - 0.91 * out[1].first;
        else
            z = 2.0 * z - out[i - 2].first;
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 -
                     std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        double w = 2.0 / (pp * pp);
        out[i] = {z, w};
        out[n - 1 - i] = {-z, w};
    }
    if (n % 2 == 1) out[n / 2].first = 0.0;  // exact center node
    std::sort(out.begin(), out.end());
    return out;
}

double grid_log_interpolate(const GridLog& m, double x) {
    // A non-finite query (e.g. log of a negative grid point upstream) lies
    // outside any support: zero probability.
    if (!std::isfinite(x)) return -std::numeric_limits<double>::infinity();
    const GridSpec& g = m.grid;
    if (g.n == 1) return m.logvals[0];
    double h = g.step();
    double t = (x - g.lo) / h;
    int i;
    if (t <= 0.0)
        i = 0;  // extrapolate with the first segment's slope
    else if (t >= g.n - 1)
        i = g.n - 2;  // extrapolate with the last segment's slope
    else
        i = static_cast<int>(t);
    double frac = t - i;
    return m.logvals[i] + frac * (m.logvals[i + 1] - m.logvals[i]);
}

GridLog resample_grid_log(const GridLog& m, const GridSpec& target) {
    if (m.grid.hi < target.lo || m.grid.lo > target.hi)
        throw BPError("incompatible grids: empty overlap");
    GridLog out;
    out.grid = target;
    out.logvals.resize(target.n);
    for (int i = 0; i < target.n; ++i)
        out.logvals[i] = grid_log_interpolate(m, target.x(i));
    return out;
}

double DownwardKernel::point(double x) const {
    // The target occupies every slot not held by a marginalized input, so a
    // repeated argument like mul(x, x) is evaluated on its diagonal.
    double args[2] = {x, x};
    if (marginalized.empty()) {
        return grid_log_interpolate(*output_msg,
                                    op.eval({args, static_cast<size_t>(arity)}));
    }
    // Arity is at most 2, so at most one marginalized input.
    const auto& [slot, g] = marginalized.front();
    auto gh = gauss_hermite(quad_nodes);
    double log_pi_half = 0.5 * std::log(M_PI);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(gh.size());
    for (size_t j = 0; j < gh.size(); ++j) {
        args[slot] = g.mean + std::sqrt(2.0) * g.stddev * gh[j].first;
        double v = grid_log_interpolate(*output_msg,
                                        op.eval({args, static_cast<size_t>(arity)}));
        terms[j] = std::log(gh[j].second) - log_pi_half + v;
        best = std::max(best, terms[j]);
    }
    if (!std::isfinite(best)) return best;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
}

std::vector<double> tabulate_downward(const DownwardKernel& k,
                                      const GridSpec& grid, bool parallel) {
    std::vector<double> out(grid.n);
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < grid.n; ++i) out[i] = k.point(grid.x(i));
    } else {
        for (int i = 0; i < grid.n; ++i) out[i] = k.point(grid.x(i));
    }
    return out;
}

std::vector<GridSpec> plan_grids(const FactorGraph& fg, const BPConfig& cfg) {
    const FunctionNetwork& net = fg.net;
    std::vector<double> mean(net.var_count(), kNaN);
    std::vector<double> spread(net.var_count(), 0.0);
    for (VarId v : net.inputs) {
        mean[v] = net.input_value[v];
        spread[v] = cfg.sigma;
    }
    std::vector<double> args;
    for (int f : topo_order(net)) {
        const FuncNode& fn = net.functions[f];
        args.clear();
        for (VarId in : fn.inputs) args.push_back(mean[in]);
        mean[fn.output] = fn.op.eval(args);
        double var = 0.0;
        for (size_t s = 0; s < fn.inputs.size(); ++s) {
            bool first = true;
            for (size_t t = 0; t < s; ++t)
                if (fn.inputs[t] == fn.inputs[s]) first = false;
            if (!first) continue;
            double p = 0.0;
            for (size_t t = s; t < fn.inputs.size(); ++t)
                if (fn.inputs[t] == fn.inputs[s])
                    p += fn.op.partial(static_cast<int>(t), args);
            double d = p * spread[fn.inputs[s]];
            var += d * d;
        }
        spread[fn.output] = std::sqrt(var);
    }
    std::vector<GridSpec> grids(net.var_count());
    for (int v = 0; v < net.var_count(); ++v) {
        double scale = std::max(spread[v], cfg.sigma);
        double half = cfg.grid_span * scale;
        grids[v] = GridSpec{mean[v] - half, mean[v] + half, cfg.grid_points};
    }
    return grids;
}

MessageStore initialize_messages(const FactorGraph& fg, const BPConfig& cfg) {
    cfg.check();
    MessageStore store(fg);
    if (cfg.mode == BPMode::GridNumeric) store.var_grids = plan_grids(fg, cfg);
    for (int e = 0; e < store.edge_count(); ++e) {
        auto [factor, var] = store.edge(e);
        for (Direction dir : {Direction::VarToFactor, Direction::FactorToVar}) {
            if (is_upward(fg, factor, var, dir)) continue;
            if (cfg.mode == BPMode::ExactDelta)
                store.set(factor, var, dir, AnchorSlope{kNaN, 0.0});
            else
                store.set(factor, var, dir, constant_grid(store.var_grids[var]));
        }
    }
    // Upward seeds from the delta priors.
    for (size_t f = 0; f < fg.factors.size(); ++f) {
        const FactorNode& fn = fg.factors[f];
        if (fn.kind != FactorKind::DeltaPrior) continue;
        if (cfg.mode == BPMode::ExactDelta)
            store.set(static_cast<int>(f), fn.var, Direction::FactorToVar,
                      PointMass{fn.center});
        else
            store.set(static_cast<int>(f), fn.var, Direction::FactorToVar,
                      GaussianParam{fn.center, cfg.sigma});
    }
    return store;
}

std::optional<MessageValue> update_variable_to_factor(
    const FactorGraph& fg, const MessageStore& store, int factor, VarId var,
    const BPConfig& cfg, bool strict) {
    int below = below_factor(fg, var);
    if (factor != below) {
        // Upward: the delta content passes through untouched; downward
        // factors cannot change a point mass's location.
        if (cfg.mode == BPMode::ExactDelta) {
            auto anchor = upward_anchor(fg, store, var);
            if (!anchor) {
                if (strict) throw BPError("missing upstream anchor for variable '" +
                                          fg.net.name(var) + "'");
                return std::nullopt;
            }
            return MessageValue{PointMass{*anchor}};
        }
        auto g = upward_gaussian(fg, store, var);
        if (!g) {
            if (strict) throw BPError("missing upstream message for variable '" +
                                      fg.net.name(var) + "'");
            return std::nullopt;
        }
        return MessageValue{*g};
    }

    // Downward: product over every other adjacent factor.
    std::vector<int> contributors = downward_contributors(fg, var, factor);
    if (cfg.mode == BPMode::ExactDelta) {
        auto anchor = upward_anchor(fg, store, var);
        double a = anchor ? *anchor : kNaN;
        double slope = 0.0;
        for (int f : contributors) {
            const MessageValue* m = store.get(f, var, Direction::FactorToVar);
            if (!m) {
                if (strict) throw BPError("missing downward message into '" +
                                          fg.net.name(var) + "'");
                continue;
            }
            const auto* as = std::get_if<AnchorSlope>(m);
            if (!as) throw BPError("downward message has wrong representation");
            if (as->anchored()) {
                if (!std::isnan(a) && std::abs(as->anchor - a) > kAnchorTol)
                    throw BPError("anchor mismatch combining downward messages at '" +
                                  fg.net.name(var) + "'");
                if (std::isnan(a)) a = as->anchor;
            }
            slope += as->slope;
        }
        return MessageValue{AnchorSlope{a, slope}};
    }

    GridLog out = constant_grid(store.var_grids[var]);
    for (int f : contributors) {
        const MessageValue* m = store.get(f, var, Direction::FactorToVar);
        if (!m) {
            if (strict) throw BPError("missing downward message into '" +
                                      fg.net.name(var) + "'");
            continue;
        }
        const auto* gl = std::get_if<GridLog>(m);
        if (!gl) throw BPError("downward message has wrong representation");
        if (gl->grid == out.grid) {
            for (int i = 0; i < out.grid.n; ++i) out.logvals[i] += gl->logvals[i];
        } else {
            GridLog r = resample_grid_log(*gl, out.grid);
            for (int i = 0; i < out.grid.n; ++i) out.logvals[i] += r.logvals[i];
        }
    }
    normalize_max(out.logvals);
    return MessageValue{std::move(out)};
}

namespace {

// First-order Gaussian pushforward through a function factor; Monte-Carlo
// fallback when every partial vanishes at the mean.
GaussianParam pushforward(const FactorGraph& fg, int factor,
                          const std::vector<GaussianParam>& ins,
                          const BPConfig& cfg) {
    const FuncNode& fn = fg.net.functions[fg.factors[factor].func];
    std::vector<double> mu;
    for (const auto& g : ins) mu.push_back(g.mean);
    double mean = fn.op.eval(mu);
    // Slots holding the same variable are perfectly correlated: sum their
    // partials before squaring.
    double var = 0.0;
    for (size_t s = 0; s < ins.size(); ++s) {
        bool first = true;
        for (size_t t = 0; t < s; ++t)
            if (fn.inputs[t] == fn.inputs[s]) first = false;
        if (!first) continue;
        double p = 0.0;
        for (size_t t = s; t < ins.size(); ++t)
            if (fn.inputs[t] == fn.inputs[s])
                p += fn.op.partial(static_cast<int>(t), mu);
        double d = p * ins[s].stddev;
        var += d * d;
    }
    if (var > 0.0) return {mean, std::sqrt(var)};

    std::mt19937_64 rng(cfg.seed ^
                        (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(factor) + 1)));
    std::normal_distribution<double> unit(0.0, 1.0);
    const int n = 10000;
    std::vector<double> args(ins.size());
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        for (size_t s = 0; s < ins.size(); ++s)
            args[s] = ins[s].mean + ins[s].stddev * unit(rng);
        double y = fn.op.eval(args);
        sum += y;
        sumsq += y * y;
    }
    double m = sum / n;
    double v = std::max(sumsq / n - m * m, 0.0);
    return {m, std::sqrt(v)};
}

}  // namespace

std::optional<MessageValue> update_factor_to_variable(
    const FactorGraph& fg, const MessageStore& store, int factor, VarId var,
    const BPConfig& cfg, bool strict) {
    const FactorNode& fn = fg.factors[factor];

    if (fn.kind == FactorKind::DeltaPrior) {
        if (cfg.mode == BPMode::ExactDelta)
            return MessageValue{PointMass{fn.center}};
        return MessageValue{GaussianParam{fn.center, cfg.sigma}};
    }

    if (fn.kind == FactorKind::Boltzmann) {
        if (cfg.mode == BPMode::ExactDelta) {
            auto anchor = upward_anchor(fg, store, var);
            if (!anchor) {
                if (strict) throw BPError("missing anchor for Boltzmann message");
                return MessageValue{AnchorSlope{kNaN, 0.0}};
            }
            return MessageValue{AnchorSlope{*anchor, 1.0 / fn.kT}};
        }
        GridLog out;
        out.grid = store.var_grids[var];
        out.logvals.resize(out.grid.n);
        for (int i = 0; i < out.grid.n; ++i)
            out.logvals[i] = out.grid.x(i) / fn.kT;
        normalize_max(out.logvals);
        return MessageValue{std::move(out)};
    }

    const FuncNode& func = fg.net.functions[fn.func];
    VarId output = func.output;

    if (var == output) {
        // Upward: the delta in the factor collapses the integral.
        if (cfg.mode == BPMode::ExactDelta) {
            std::vector<double> args;
            for (VarId in : func.inputs) {
                const MessageValue* m = store.get(factor, in, Direction::VarToFactor);
                const auto* pm = m ? std::get_if<PointMass>(m) : nullptr;
                if (!pm) {
                    if (strict) throw BPError("missing upward input message at '" +
                                              fg.net.name(output) + "'");
                    return std::nullopt;
                }
                args.push_back(pm->anchor);
            }
            return MessageValue{PointMass{func.op.eval(args)}};
        }
        std::vector<GaussianParam> ins;
        for (VarId in : func.inputs) {
            const MessageValue* m = store.get(factor, in, Direction::VarToFactor);
            const auto* g = m ? std::get_if<GaussianParam>(m) : nullptr;
            if (!g) {
                if (strict) throw BPError("missing upward input message at '" +
                                          fg.net.name(output) + "'");
                return std::nullopt;
            }
            ins.push_back(*g);
        }
        return MessageValue{pushforward(fg, factor, ins, cfg)};
    }

    // Downward to one input.
    int slot = -1;
    for (size_t s = 0; s < func.inputs.size(); ++s)
        if (func.inputs[s] == var) { slot = static_cast<int>(s); break; }
    if (slot < 0) throw BPError("variable is not an input of this factor");

    const MessageValue* my = store.get(factor, output, Direction::VarToFactor);

    if (cfg.mode == BPMode::ExactDelta) {
        const auto* as = my ? std::get_if<AnchorSlope>(my) : nullptr;
        if (!as) {
            if (strict) throw BPError("missing downward message into factor at '" +
                                      fg.net.name(output) + "'");
            return MessageValue{AnchorSlope{kNaN, 0.0}};
        }
        std::vector<double> args(func.inputs.size());
        for (size_t s = 0; s < func.inputs.size(); ++s) {
            const MessageValue* m =
                store.get(factor, func.inputs[s], Direction::VarToFactor);
            const auto* pm = m ? std::get_if<PointMass>(m) : nullptr;
            if (!pm) {
                if (strict) throw BPError("missing upstream anchor at factor of '" +
                                          fg.net.name(output) + "'");
                return MessageValue{AnchorSlope{kNaN, 0.0}};
            }
            args[s] = pm->anchor;
        }
        // Repeated arguments contribute once per slot, as in backprop.
        double partial = 0.0;
        for (size_t s = 0; s < func.inputs.size(); ++s)
            if (func.inputs[s] == var)
                partial += func.op.partial(static_cast<int>(s), args);
        double slope = as->slope * partial;
        return MessageValue{AnchorSlope{args[slot], slope}};
    }

    const auto* gl = my ? std::get_if<GridLog>(my) : nullptr;
    if (!gl) {
        if (strict) throw BPError("missing downward message into factor at '" +
                                  fg.net.name(output) + "'");
        return MessageValue{constant_grid(store.var_grids[var])};
    }
    DownwardKernel kernel;
    kernel.op = func.op;
    kernel.arity = static_cast<int>(func.inputs.size());
    kernel.target_slot = slot;
    kernel.output_msg = gl;
    kernel.quad_nodes = cfg.quad_nodes;
    for (size_t s = 0; s < func.inputs.size(); ++s) {
        if (func.inputs[s] == var) continue;
        const MessageValue* m =
            store.get(factor, func.inputs[s], Direction::VarToFactor);
        const auto* g = m ? std::get_if<GaussianParam>(m) : nullptr;
        if (!g) {
            if (strict) throw BPError("missing upward input message at factor of '" +
                                      fg.net.name(output) + "'");
            return MessageValue{constant_grid(store.var_grids[var])};
        }
        kernel.marginalized.emplace_back(static_cast<int>(s), *g);
    }
    GridLog out;
    out.grid = store.var_grids[var];
    out.logvals = tabulate_downward(kernel, out.grid, cfg.parallel);
    normalize_max(out.logvals);
    return MessageValue{std::move(out)};
}

void sweep_up(const FactorGraph& fg, const BPConfig& cfg, MessageStore& store) {
    for (size_t f = 0; f < fg.factors.size(); ++f)
        if (fg.factors[f].kind == FactorKind::DeltaPrior)
            store.set(static_cast<int>(f), fg.factors[f].var,
                      Direction::FactorToVar,
                      *update_factor_to_variable(fg, store, static_cast<int>(f),
                                                 fg.factors[f].var, cfg, true));
    for (int func : fg.func_topo) {
        int factor = func;  // function factors share indices with functions
        const FuncNode& fn = fg.net.functions[func];
        for (VarId in : fn.inputs)
            store.set(factor, in, Direction::VarToFactor,
                      *update_variable_to_factor(fg, store, factor, in, cfg, true));
        store.set(factor, fn.output, Direction::FactorToVar,
                  *update_factor_to_variable(fg, store, factor, fn.output, cfg, true));
    }
    if (fg.boltzmann_var >= 0 && below_factor(fg, fg.boltzmann_var) >= 0)
        store.set(fg.boltzmann_factor, fg.boltzmann_var, Direction::VarToFactor,
                  *update_variable_to_factor(fg, store, fg.boltzmann_factor,
                                             fg.boltzmann_var, cfg, true));
}

void sweep_down(const FactorGraph& fg, const BPConfig& cfg, MessageStore& store) {
    store.set(fg.boltzmann_factor, fg.boltzmann_var, Direction::FactorToVar,
              *update_factor_to_variable(fg, store, fg.boltzmann_factor,
                                         fg.boltzmann_var, cfg, true));
    for (auto it = fg.func_topo.rbegin(); it != fg.func_topo.rend(); ++it) {
        int factor = *it;
        const FuncNode& fn = fg.net.functions[factor];
        store.set(factor, fn.output, Direction::VarToFactor,
                  *update_variable_to_factor(fg, store, factor, fn.output, cfg, true));
        for (VarId in : fn.inputs)
            store.set(factor, in, Direction::FactorToVar,
                      *update_factor_to_variable(fg, store, factor, in, cfg, true));
    }
    for (VarId v : fg.net.inputs) {
        int prior = fg.prior_of_var[v];
        store.set(prior, v, Direction::VarToFactor,
                  *update_variable_to_factor(fg, store, prior, v, cfg, true));
    }
}

double message_distance(const MessageValue* a, const MessageValue* b) {
    if (!a && !b) return 0.0;
    if (!a || !b) return kFar;
    if (a->index() != b->index()) return kFar;
    auto nan_aware = [](double x, double y) {
        if (std::isnan(x) && std::isnan(y)) return 0.0;
        if (std::isnan(x) || std::isnan(y)) return kFar;
        return std::abs(x - y);
    };
    if (const auto* pa = std::get_if<PointMass>(a))
        return nan_aware(pa->anchor, std::get<PointMass>(*b).anchor);
    if (const auto* aa = std::get_if<AnchorSlope>(a)) {
        const auto& ab = std::get<AnchorSlope>(*b);
        return std::max(nan_aware(aa->anchor, ab.anchor),
                        std::abs(aa->slope - ab.slope));
    }
    if (const auto* ga = std::get_if<GaussianParam>(a)) {
        const auto& gb = std::get<GaussianParam>(*b);
        return std::max(std::abs(ga->mean - gb.mean),
                        std::abs(ga->stddev - gb.stddev));
    }
    const auto& la = std::get<GridLog>(*a);
    const auto& lb = std::get<GridLog>(*b);
    if (!(la.grid == lb.grid)) return kFar;
    double d = 0.0;
    for (int i = 0; i < la.grid.n; ++i)
        d = std::max(d, std::abs(la.logvals[i] - lb.logvals[i]));
    return d;
}

BPResult run_bp(const FactorGraph& fg, const BPConfig& cfg) {
    cfg.check();
    BPResult res;
    res.store = initialize_messages(fg, cfg);
    if (cfg.schedule.kind == ScheduleKind::TwoPass) {
        sweep_up(fg, cfg, res.store);
        sweep_down(fg, cfg, res.store);
        res.sweeps = 2;
        res.converged = true;
        return res;
    }
    // Flooding: every round recomputes all messages from the previous
    // round's snapshot (synchronous update).
    res.converged = false;
    for (int iter = 0; iter < cfg.schedule.max_iters; ++iter) {
        MessageStore next = res.store;
        double resid = 0.0;
        for (int e = 0; e < res.store.edge_count(); ++e) {
            auto [factor, var] = res.store.edge(e);
            for (Direction dir :
                 {Direction::VarToFactor, Direction::FactorToVar}) {
                std::optional<MessageValue> v =
                    dir == Direction::VarToFactor
                        ? update_variable_to_factor(fg, res.store, factor, var,
                                                    cfg, false)
                        : update_factor_to_variable(fg, res.store, factor, var,
                                                    cfg, false);
                if (!v) continue;
                resid = std::max(
                    resid, message_distance(res.store.get(factor, var, dir), &*v));
                next.set(factor, var, dir, std::move(*v));
            }
        }
        res.store = std::move(next);
        res.residual = resid;
        if (resid < cfg.schedule.tol) {
            res.converged = true;
            break;
        }
        ++res.rounds;
    }
    if (!res.converged)
        throw BPError("flooding did not converge within max_iters; residual " +
                      std::to_string(res.residual));
    return res;
}

MessageValue compute_posterior(const FactorGraph& fg, const MessageStore& store,
                               VarId var, const BPConfig& cfg) {
    int below = below_factor(fg, var);
    if (cfg.mode == BPMode::ExactDelta) {
        auto anchor = upward_anchor(fg, store, var);
        if (!anchor) throw BPError("posterior requested before convergence");
        return PointMass{*anchor};
    }
    GridLog out = constant_grid(store.var_grids[var]);
    auto g = upward_gaussian(fg, store, var);
    if (g) {
        for (int i = 0; i < out.grid.n; ++i) {
            double t = (out.grid.x(i) - g->mean) / g->stddev;
            out.logvals[i] = -0.5 * t * t;
        }
    }
    for (int f : fg.factors_of_var[var]) {
        if (f == below) continue;
        const MessageValue* m = store.get(f, var, Direction::FactorToVar);
        const auto* gl = m ? std::get_if<GridLog>(m) : nullptr;
        if (!gl) continue;
        GridLog r = gl->grid == out.grid ? *gl : resample_grid_log(*gl, out.grid);
        for (int i = 0; i < out.grid.n; ++i) out.logvals[i] += r.logvals[i];
    }
    normalize_max(out.logvals);
    return out;
}

double posterior_mean(const GridLog& post) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < post.grid.n; ++i) {
        double w = (i == 0 || i == post.grid.n - 1) ? 0.5 : 1.0;
        double p = std::exp(post.logvals[i]);
        num += w * p * post.grid.x(i);
        den += w * p;
    }
    return num / den;
}

}  // namespace liftbp
