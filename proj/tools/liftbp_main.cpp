// Command-line front end: evaluate, differentiate, and cross-check function
// networks, dump lifted factor graphs, and generate random corpora.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "liftbp/adjoint.hpp"
#include "liftbp/json_io.hpp"
#include "liftbp/netgen.hpp"

using namespace liftbp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitInternal = 3;

struct CommonOpts {
    std::string file;
    std::string format = "json";
    std::string out;
    std::string schedule = "two-pass";
    std::string prior_on;  // experimental Boltzmann relocation target
    double fd_step = 1e-6;
    BPConfig cfg;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_file = true) {
    if (needs_file)
        cmd->add_option("file", o.file, "network file (DSL)")->required();
    cmd->add_option("--kT", o.cfg.kT, "Boltzmann temperature");
    cmd->add_option("--sigma", o.cfg.sigma, "delta-approximation width");
    cmd->add_option("--grid-points", o.cfg.grid_points, "grid size (odd, >= 33)");
    cmd->add_option("--grid-span", o.cfg.grid_span, "grid half-width in stddevs");
    cmd->add_option("--quad-nodes", o.cfg.quad_nodes, "Gauss-Hermite nodes");
    cmd->add_option("--schedule", o.schedule, "two-pass | flooding")
        ->check(CLI::IsMember({"two-pass", "flooding"}));
    cmd->add_option("--max-iters", o.cfg.schedule.max_iters, "flooding cap");
    cmd->add_option("--tol", o.cfg.schedule.tol, "flooding convergence tol");
    cmd->add_option("--seed", o.cfg.seed, "Monte-Carlo fallback seed");
    cmd->add_option("--fd-step", o.fd_step, "finite-difference step");
    cmd->add_flag("--parallel,!--no-parallel", o.cfg.parallel,
                  "OpenMP grid kernels");
    cmd->add_option("--experimental-prior-on", o.prior_on,
                    "attach the Boltzmann factor to this variable instead of "
                    "the objective (experimental)");
    cmd->add_option("--format", o.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", o.out, "write output here instead of stdout");
}

BPConfig make_cfg(const CommonOpts& o) {
    BPConfig cfg = o.cfg;
    cfg.schedule.kind = o.schedule == "flooding" ? ScheduleKind::Flooding
                                                 : ScheduleKind::TwoPass;
    return cfg;
}

FunctionNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    FunctionNetwork net = parse_network(ss.str());
    require_valid(net);
    return net;
}

LiftOptions lift_opts(const FunctionNetwork& net, const CommonOpts& o) {
    LiftOptions opt;
    opt.kT = o.cfg.kT;
    if (!o.prior_on.empty()) {
        opt.boltzmann_on = net.find_var(o.prior_on);
        if (opt.boltzmann_on < 0)
            throw Error("--experimental-prior-on: unknown variable '" +
                        o.prior_on + "'");
    }
    return opt;
}

void emit(const CommonOpts& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream f(o.out);
    if (!f) throw Error("cannot write '" + o.out + "'");
    f << text << "\n";
}

std::string rows_to_csv(const std::vector<std::pair<std::string, double>>& rows,
                        const char* value_col) {
    std::ostringstream ss;
    ss << "name," << value_col << "\n";
    char buf[64];
    for (const auto& [name, v] : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        ss << name << "," << buf << "\n";
    }
    std::string s = ss.str();
    s.pop_back();
    return s;
}

int cmd_eval(const CommonOpts& o) {
    FunctionNetwork net = load_network(o.file);
    Valuation vals = evaluate(net);
    if (o.format == "csv") {
        std::vector<std::pair<std::string, double>> rows;
        for (int v = 0; v < net.var_count(); ++v)
            rows.emplace_back(net.name(v), vals.at(v));
        emit(o, rows_to_csv(rows, "value"));
    } else {
        emit(o, valuation_to_json(net, vals).dump(2));
    }
    return kExitOk;
}

int cmd_grad(const CommonOpts& o, const std::string& method) {
    FunctionNetwork net = load_network(o.file);
    BPConfig cfg = make_cfg(o);
    std::vector<std::pair<std::string, double>> rows;

    if (method == "backprop") {
        AdjointSet adj = backprop(net, evaluate(net));
        for (int v = 0; v < net.var_count(); ++v)
            rows.emplace_back(net.name(v), adj.at(v));
    } else if (method == "fd") {
        for (auto [v, g] : finite_diff_gradient(net, o.fd_step))
            rows.emplace_back(net.name(v), g);
    } else if (method == "bp-delta") {
        FactorGraph fg = lift_network(net, lift_opts(net, o));
        cfg.mode = BPMode::ExactDelta;
        BPResult res = run_bp(fg, cfg);
        std::vector<double> a = extract_adjoints_delta(fg, res, cfg);
        for (int v = 0; v < net.var_count(); ++v)
            rows.emplace_back(net.name(v), a[v]);
    } else {  // bp-grid
        FactorGraph fg = lift_network(net, lift_opts(net, o));
        cfg.mode = BPMode::GridNumeric;
        BPResult res = run_bp(fg, cfg);
        for (VarId v : net.inputs)
            rows.emplace_back(net.name(v),
                              extract_adjoint_smoothed(fg, res.store, cfg, v));
    }

    if (o.format == "csv") {
        emit(o, rows_to_csv(rows, "adjoint"));
    } else {
        OrderedJson j;
        j["method"] = method;
        OrderedJson g = OrderedJson::object();
        for (const auto& [name, v] : rows) g[name] = v;
        j["adjoints"] = std::move(g);
        emit(o, j.dump(2));
    }
    return kExitOk;
}

int cmd_check(const CommonOpts& o, double tol_exact, double tol_grid) {
    FunctionNetwork net = load_network(o.file);
    BPConfig cfg = make_cfg(o);
    AdjointReport rep = cross_method_report(net, cfg, o.fd_step);

    int failures = 0;
    auto flag = [&](const std::string& what) {
        std::cout << "MISMATCH " << what << "\n";
        ++failures;
    };

    if (!rep.exact_converged) flag("delta-mode BP did not converge");
    for (const auto& r : rep.residuals)
        if (!(r.residual <= tol_exact))
            flag("edge invariant at '" + net.name(r.var) + "' residual " +
                 std::to_string(r.residual));
    for (const auto& row : rep.rows) {
        if (std::abs(row.bp_delta - row.backprop) > tol_exact)
            flag("bp-delta vs backprop at '" + row.name + "'");
        double scale = std::max(1.0, std::abs(row.backprop));
        if (row.finite_diff &&
            std::abs(*row.finite_diff - row.backprop) > 1e-3 * scale)
            flag("finite-diff vs backprop at '" + row.name + "'");
        if (row.bp_grid && std::abs(*row.bp_grid - row.backprop) > tol_grid * scale)
            flag("bp-grid vs backprop at '" + row.name + "'");
    }
    for (const auto& w : rep.warnings) std::cout << "WARN " << w << "\n";

    if (failures) {
        std::cout << "check: " << failures << " mismatch(es)\n";
        return kExitCheckFailed;
    }
    std::cout << "check: all gradient paths agree\n";
    return kExitOk;
}

int cmd_report(const CommonOpts& o, const std::string& figure) {
    FunctionNetwork net = load_network(o.file);
    BPConfig cfg = make_cfg(o);
    AdjointReport rep = cross_method_report(net, cfg, o.fd_step);
    OrderedJson j = report_to_json(rep);

    if (figure == "gauss-shift") {
        // Posterior-vs-prior shift per input: the Boltzmann tilt moves each
        // input posterior by adjoint * sigma^2 / kT to first order.
        FactorGraph fg = lift_network(net, lift_opts(net, o));
        BPConfig grid_cfg = cfg;
        grid_cfg.mode = BPMode::GridNumeric;
        BPResult res = run_bp(fg, grid_cfg);
        AdjointSet adj = backprop(net, evaluate(net));
        OrderedJson fig = OrderedJson::array();
        for (VarId v : net.inputs) {
            MessageValue post = compute_posterior(fg, res.store, v, grid_cfg);
            const auto* gl = std::get_if<GridLog>(&post);
            if (!gl) continue;
            OrderedJson row;
            row["name"] = net.name(v);
            row["prior_mean"] = net.input_value[v];
            row["posterior_mean"] = posterior_mean(*gl);
            row["shift"] = posterior_mean(*gl) - net.input_value[v];
            row["predicted_shift"] =
                adj.at(v) * grid_cfg.sigma * grid_cfg.sigma / grid_cfg.kT;
            fig.push_back(std::move(row));
        }
        j["figure_gauss_shift"] = std::move(fig);
    }
    emit(o, j.dump(2));
    return kExitOk;
}

int cmd_dump(const CommonOpts& o, bool with_messages) {
    FunctionNetwork net = load_network(o.file);
    FactorGraph fg = lift_network(net, lift_opts(net, o));
    OrderedJson j;
    j["factor_graph"] = factor_graph_to_json(fg);
    j["cycle_rank"] = factor_graph_cycle_rank(fg);
    j["diameter"] = factor_graph_diameter(fg);
    if (with_messages) {
        BPConfig cfg = make_cfg(o);
        BPResult res = run_bp(fg, cfg);
        j["messages"] = store_to_json(fg, res.store);
        j["converged"] = res.converged;
    }
    emit(o, j.dump(2));
    return kExitOk;
}

int cmd_gen(std::uint64_t seed, int count, bool smooth,
            const std::string& out_dir) {
    GenOptions opt;
    opt.smooth_only = smooth;
    for (int i = 0; i < count; ++i) {
        FunctionNetwork net = random_network(seed + i, opt);
        std::string text = serialize_network(net);
        if (out_dir.empty()) {
            std::cout << "# seed " << seed + i << "\n" << text;
        } else {
            std::string path =
                out_dir + "/net_" + std::to_string(seed + i) + ".fn";
            std::ofstream f(path);
            if (!f) throw Error("cannot write '" + path + "'");
            f << text;
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lifted function networks: backprop as belief propagation"};
    app.require_subcommand(1);

    CommonOpts eval_o, grad_o, check_o, report_o, dump_o;
    std::string grad_method = "backprop";
    double tol_exact = 1e-9, tol_grid = 2e-2;
    std::string figure;
    bool dump_messages = false;
    std::uint64_t gen_seed = 0;
    int gen_count = 1;
    bool gen_smooth = false;
    std::string gen_out_dir;

    add_common(app.add_subcommand("eval", "forward evaluation"), eval_o);

    CLI::App* grad = app.add_subcommand("grad", "gradient of the objective");
    add_common(grad, grad_o);
    grad->add_option("--method", grad_method,
                     "backprop | bp-delta | bp-grid | fd")
        ->check(CLI::IsMember({"backprop", "bp-delta", "bp-grid", "fd"}));

    CLI::App* check = app.add_subcommand(
        "check", "cross-validate every gradient path; exit 1 on mismatch");
    add_common(check, check_o);
    check->add_option("--tol-exact", tol_exact, "delta-mode tolerance");
    check->add_option("--tol-grid", tol_grid, "grid-mode relative tolerance");

    CLI::App* report = app.add_subcommand("report", "full cross-method report");
    add_common(report, report_o);
    report->add_option("--emit-figure", figure, "gauss-shift")
        ->check(CLI::IsMember({"gauss-shift"}));

    CLI::App* dump = app.add_subcommand("dump", "lifted factor graph as JSON");
    add_common(dump, dump_o);
    dump->add_flag("--messages", dump_messages, "include the converged store");

    CLI::App* gen = app.add_subcommand("gen", "generate random networks");
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--count", gen_count, "number of networks");
    gen->add_flag("--smooth", gen_smooth, "smooth primitives only");
    gen->add_option("--out-dir", gen_out_dir, "write net_<seed>.fn files here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("eval")) return cmd_eval(eval_o);
        if (app.got_subcommand("grad")) {
            if (grad_o.fd_step <= 0.0 && grad_method == "fd")
                throw Error("--fd-step must be > 0");
            return cmd_grad(grad_o, grad_method);
        }
        if (app.got_subcommand("check"))
            return cmd_check(check_o, tol_exact, tol_grid);
        if (app.got_subcommand("report")) return cmd_report(report_o, figure);
        if (app.got_subcommand("dump")) return cmd_dump(dump_o, dump_messages);
        if (app.got_subcommand("gen"))
            return cmd_gen(gen_seed, gen_count, gen_smooth, gen_out_dir);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const ValidationError& e) {
        std::cerr << "invalid network: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const BPError& e) {
        std::cerr << "bp error: " << e.what() << "\n";
        return kExitCheckFailed;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
