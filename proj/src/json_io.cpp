#include "liftbp/json_io.hpp"

#include <cmath>

namespace liftbp {

namespace {

OrderedJson num_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

const char* schedule_name(ScheduleKind k) {
    return k == ScheduleKind::TwoPass ? "two-pass" : "flooding";
}

OrderedJson message_to_json(const MessageValue& m) {
    OrderedJson j;
    if (const auto* pm = std::get_if<PointMass>(&m)) {
        j["type"] = "point_mass";
        j["anchor"] = num_or_null(pm->anchor);
    } else if (const auto* as = std::get_if<AnchorSlope>(&m)) {
        j["type"] = "anchor_slope";
        j["anchor"] = num_or_null(as->anchor);
        j["slope"] = as->slope;
    } else if (const auto* g = std::get_if<GaussianParam>(&m)) {
        j["type"] = "gaussian";
        j["mean"] = g->mean;
        j["stddev"] = g->stddev;
    } else {
        const auto& gl = std::get<GridLog>(m);
        j["type"] = "grid_log";
        j["grid"] = {{"lo", gl.grid.lo}, {"hi", gl.grid.hi}, {"n", gl.grid.n}};
        j["logvals"] = gl.logvals;
    }
    return j;
}

OrderedJson factor_to_json(const FactorGraph& fg, int f) {
    const FactorNode& fn = fg.factors[f];
    OrderedJson j;
    j["index"] = f;
    switch (fn.kind) {
        case FactorKind::Function: {
            const FuncNode& func = fg.net.functions[fn.func];
            j["kind"] = "function";
            j["op"] = func.op.token();
            j["output"] = fg.net.name(func.output);
            OrderedJson ins = OrderedJson::array();
            for (VarId in : func.inputs) ins.push_back(fg.net.name(in));
            j["inputs"] = ins;
            break;
        }
        case FactorKind::DeltaPrior:
            j["kind"] = "delta_prior";
            j["var"] = fg.net.name(fn.var);
            j["center"] = fn.center;
            break;
        case FactorKind::Boltzmann:
            j["kind"] = "boltzmann";
            j["var"] = fg.net.name(fn.var);
            j["kT"] = fn.kT;
            break;
    }
    return j;
}

}  // namespace

OrderedJson valuation_to_json(const FunctionNetwork& net, const Valuation& vals) {
    OrderedJson j = OrderedJson::array();
    for (int v = 0; v < net.var_count(); ++v)
        j.push_back({{"name", net.name(v)}, {"value", vals.values[v]}});
    return j;
}

OrderedJson config_to_json(const BPConfig& cfg) {
    OrderedJson j;
    j["kT"] = cfg.kT;
    j["sigma"] = cfg.sigma;
    j["grid_points"] = cfg.grid_points;
    j["grid_span"] = cfg.grid_span;
    j["quad_nodes"] = cfg.quad_nodes;
    j["schedule"] = schedule_name(cfg.schedule.kind);
    j["max_iters"] = cfg.schedule.max_iters;
    j["tol"] = cfg.schedule.tol;
    j["seed"] = cfg.seed;
    return j;
}

OrderedJson report_to_json(const AdjointReport& rep) {
    OrderedJson j;
    OrderedJson vars = OrderedJson::array();
    for (const auto& row : rep.rows) {
        OrderedJson r;
        r["name"] = row.name;
        r["backprop"] = row.backprop;
        r["bp_delta"] = row.bp_delta;
        r["bp_grid"] = row.bp_grid ? OrderedJson(*row.bp_grid) : OrderedJson(nullptr);
        r["finite_diff"] =
            row.finite_diff ? OrderedJson(*row.finite_diff) : OrderedJson(nullptr);
        vars.push_back(std::move(r));
    }
    j["variables"] = std::move(vars);

    OrderedJson res = OrderedJson::array();
    for (const auto& r : rep.residuals) {
        OrderedJson e;
        e["kind"] = r.kind == EdgeInvariantResidual::Kind::InvariantA ? "a" : "b";
        e["var"] = r.var;
        e["factor"] = r.factor;
        e["bp_slope"] = r.bp_slope;
        e["autodiff_value"] = r.autodiff_value;
        e["residual"] = r.residual;
        res.push_back(std::move(e));
    }
    j["residuals"] = std::move(res);

    OrderedJson conv;
    conv["schedule"] = schedule_name(rep.schedule);
    conv["exact"] = {{"sweeps", rep.exact_sweeps},
                     {"rounds", rep.exact_rounds},
                     {"converged", rep.exact_converged}};
    conv["grid"] = {{"sweeps", rep.grid_sweeps},
                    {"rounds", rep.grid_rounds},
                    {"converged", rep.grid_converged}};
    j["convergence"] = std::move(conv);
    j["config"] = config_to_json(rep.config);
    if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
    return j;
}

OrderedJson factor_graph_to_json(const FactorGraph& fg) {
    OrderedJson j;
    OrderedJson vars = OrderedJson::array();
    for (int v = 0; v < fg.var_count(); ++v) vars.push_back(fg.net.name(v));
    j["variables"] = std::move(vars);
    OrderedJson factors = OrderedJson::array();
    for (size_t f = 0; f < fg.factors.size(); ++f)
        factors.push_back(factor_to_json(fg, static_cast<int>(f)));
    j["factors"] = std::move(factors);
    j["objective"] = fg.net.name(fg.objective());
    return j;
}

OrderedJson store_to_json(const FactorGraph& fg, const MessageStore& store) {
    OrderedJson j = OrderedJson::array();
    for (int e = 0; e < store.edge_count(); ++e) {
        auto [factor, var] = store.edge(e);
        for (Direction dir : {Direction::VarToFactor, Direction::FactorToVar}) {
            OrderedJson entry;
            entry["var"] = fg.net.name(var);
            entry["factor"] = factor;
            entry["direction"] =
                dir == Direction::VarToFactor ? "var_to_factor" : "factor_to_var";
            entry["orientation"] =
                is_upward(fg, factor, var, dir) ? "up" : "down";
            const MessageValue* m = store.get(factor, var, dir);
            entry["message"] = m ? message_to_json(*m) : OrderedJson(nullptr);
            j.push_back(std::move(entry));
        }
    }
    return j;
}

}  // namespace liftbp
