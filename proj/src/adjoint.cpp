#include "liftbp/adjoint.hpp"

#include <cmath>

namespace liftbp {

namespace {

double boltzmann_kT(const FactorGraph& fg) {
    return fg.factors[fg.boltzmann_factor].kT;
}

const AnchorSlope& downward_out(const FactorGraph& fg, const MessageStore& store,
                                VarId var) {
    int below = below_factor(fg, var);
    if (below < 0) throw BPError("variable has no downward outgoing edge");
    const MessageValue* m = store.get(below, var, Direction::VarToFactor);
    const auto* as = m ? std::get_if<AnchorSlope>(m) : nullptr;
    if (!as) throw BPError("store not converged: downward message missing");
    return *as;
}

}  // namespace

std::vector<double> extract_adjoints_delta(const FactorGraph& fg,
                                           const MessageStore& store,
                                           const BPConfig& cfg) {
    (void)cfg;
    double kT = boltzmann_kT(fg);
    std::vector<double> adj(fg.var_count(), 0.0);
    for (int v = 0; v < fg.var_count(); ++v)
        adj[v] = downward_out(fg, store, v).slope * kT;
    return adj;
}

std::vector<double> extract_adjoints_delta(const FactorGraph& fg,
                                           const BPResult& result,
                                           const BPConfig& cfg) {
    if (!result.converged) throw BPError("store not converged");
    return extract_adjoints_delta(fg, result.store, cfg);
}

double extract_adjoint_smoothed(const FactorGraph& fg, const MessageStore& store,
                                const BPConfig& cfg, VarId var) {
    int prior = fg.prior_of_var[var];
    if (prior < 0)
        throw Error("extract_adjoint_smoothed: variable '" + fg.net.name(var) +
                    "' carries no prior");
    const MessageValue* m = store.get(prior, var, Direction::VarToFactor);
    const auto* gl = m ? std::get_if<GridLog>(m) : nullptr;
    if (!gl) throw BPError("downward message into the prior is missing");

    double x0 = fg.factors[prior].center;
    double s = cfg.sigma;
    if (gl->grid.lo > x0 - 6.0 * s || gl->grid.hi < x0 + 6.0 * s)
        throw BPError("message grid does not cover +-6 sigma of the prior");

    // d/dx N(x; x0, s^2) = -(x - x0)/s^2 * N(x; x0, s^2)
    double h = gl->grid.step();
    double norm = 1.0 / (s * std::sqrt(2.0 * M_PI));
    double integral = 0.0;
    for (int i = 0; i < gl->grid.n; ++i) {
        double x = gl->grid.x(i);
        double t = (x - x0) / s;
        double dprior = -(t / s) * norm * std::exp(-0.5 * t * t);
        double w = (i == 0 || i == gl->grid.n - 1) ? 0.5 : 1.0;
        integral += w * dprior * gl->logvals[i];
    }
    integral *= h;
    if (!std::isfinite(integral))
        throw BPError("smoothed extraction: message has zero mass inside the "
                      "prior window");
    double kT = boltzmann_kT(fg);
    return -integral * kT;
}

std::vector<EdgeInvariantResidual> check_edge_invariants(
    const FactorGraph& fg, const MessageStore& store, const Valuation& vals,
    const std::vector<double>& adjoints, const BPConfig& cfg) {
    (void)cfg;
    double kT = boltzmann_kT(fg);
    std::vector<EdgeInvariantResidual> out;

    // Invariant (a): downward variable -> factor edges.
    for (int v = 0; v < fg.var_count(); ++v) {
        int below = below_factor(fg, v);
        if (below < 0) continue;
        const AnchorSlope& as = downward_out(fg, store, v);
        EdgeInvariantResidual r;
        r.kind = EdgeInvariantResidual::Kind::InvariantA;
        r.var = v;
        r.factor = below;
        r.bp_slope = as.slope;
        r.autodiff_value = adjoints[v];
        r.residual = std::abs(as.slope * kT - adjoints[v]);
        out.push_back(r);
    }

    // Invariant (b): downward function-factor -> input edges.
    for (size_t f = 0; f < fg.factors.size(); ++f) {
        if (fg.factors[f].kind != FactorKind::Function) continue;
        const FuncNode& fn = fg.net.functions[fg.factors[f].func];
        std::vector<double> args;
        for (VarId in : fn.inputs) args.push_back(vals.values[in]);
        for (size_t slot = 0; slot < fn.inputs.size(); ++slot) {
            VarId x = fn.inputs[slot];
            bool first = true;
            for (size_t t = 0; t < slot; ++t)
                if (fn.inputs[t] == x) first = false;
            if (!first) continue;  // one residual per edge, not per slot
            double partial = 0.0;
            for (size_t t = slot; t < fn.inputs.size(); ++t)
                if (fn.inputs[t] == x)
                    partial += fn.op.partial(static_cast<int>(t), args);
            const MessageValue* m =
                store.get(static_cast<int>(f), x, Direction::FactorToVar);
            const auto* as = m ? std::get_if<AnchorSlope>(m) : nullptr;
            if (!as) throw BPError("store not converged: factor message missing");
            EdgeInvariantResidual r;
            r.kind = EdgeInvariantResidual::Kind::InvariantB;
            r.var = x;
            r.factor = static_cast<int>(f);
            r.bp_slope = as->slope;
            r.autodiff_value = adjoints[fn.output] * partial;
            r.residual = std::abs(as->slope * kT - r.autodiff_value);
            out.push_back(r);
        }
    }
    return out;
}

AdjointReport cross_method_report(const FunctionNetwork& net, const BPConfig& cfg,
                                  double fd_step) {
    require_valid(net);
    AdjointReport rep;
    rep.config = cfg;
    rep.schedule = cfg.schedule.kind;

    Valuation vals = evaluate(net);
    AdjointSet ad = backprop(net, vals);

    std::vector<std::optional<double>> fd(net.var_count());
    try {
        for (auto [v, g] : finite_diff_gradient(net, fd_step)) fd[v] = g;
    } catch (const Error& e) {
        rep.warnings.push_back(std::string("finite_diff: ") + e.what());
    }

    FactorGraph fg = lift_network(net, LiftOptions{cfg.kT});

    BPConfig exact_cfg = cfg;
    exact_cfg.mode = BPMode::ExactDelta;
    BPResult exact = run_bp(fg, exact_cfg);
    rep.exact_sweeps = exact.sweeps;
    rep.exact_rounds = exact.rounds;
    rep.exact_converged = exact.converged;
    std::vector<double> bp_delta =
        extract_adjoints_delta(fg, exact, exact_cfg);
    rep.residuals = check_edge_invariants(fg, exact.store, vals,
                                          ad.adjoints, exact_cfg);

    BPConfig grid_cfg = cfg;
    grid_cfg.mode = BPMode::GridNumeric;
    std::vector<std::optional<double>> bp_grid(net.var_count());
    try {
        BPResult grid = run_bp(fg, grid_cfg);
        rep.grid_sweeps = grid.sweeps;
        rep.grid_rounds = grid.rounds;
        rep.grid_converged = grid.converged;
        for (VarId v : net.inputs)
            bp_grid[v] = extract_adjoint_smoothed(fg, grid.store, grid_cfg, v);
    } catch (const Error& e) {
        rep.warnings.push_back(std::string("bp_grid: ") + e.what());
    }

    for (int v = 0; v < net.var_count(); ++v) {
        AdjointReport::Row row;
        row.name = net.name(v);
        row.backprop = ad.adjoints[v];
        row.bp_delta = bp_delta[v];
        row.bp_grid = bp_grid[v];
        row.finite_diff = fd[v];
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace liftbp
