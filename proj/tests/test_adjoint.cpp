#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "liftbp/adjoint.hpp"
#include "liftbp/netgen.hpp"

using namespace liftbp;

namespace {

std::vector<double> backprop_adjoints(const FunctionNetwork& net) {
    AdjointSet adj = backprop(net, evaluate(net));
    std::vector<double> out(net.var_count());
    for (int v = 0; v < net.var_count(); ++v) out[v] = adj.at(v);
    return out;
}

}  // namespace

TEST_CASE("delta extraction reproduces the fixture adjoints exactly") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    BPResult res = run_bp(fg, cfg);
    std::vector<double> a = extract_adjoints_delta(fg, res, cfg);
    std::vector<double> ref = backprop_adjoints(net);
    for (int v = 0; v < net.var_count(); ++v) CHECK(a[v] == ref[v]);
    CHECK(a[net.find_var("t")] == 24.0);
}

TEST_CASE("extraction is invariant under kT") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    std::vector<double> ref = backprop_adjoints(net);
    for (double kT : {0.5, 1.0, 2.0, 7.0}) {
        FactorGraph fg = lift_network(net, LiftOptions{kT});
        BPConfig cfg;
        cfg.kT = kT;
        BPResult res = run_bp(fg, cfg);
        std::vector<double> a = extract_adjoints_delta(fg, res, cfg);
        for (int v = 0; v < net.var_count(); ++v)
            CHECK(a[v] == doctest::Approx(ref[v]).epsilon(1e-14));
    }
}

TEST_CASE("edge invariants hold to machine precision on random networks") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        FunctionNetwork net = random_network(seed);
        FactorGraph fg = lift_network(net);
        BPConfig cfg;
        BPResult res = run_bp(fg, cfg);
        Valuation vals = evaluate(net);
        std::vector<double> ref = backprop_adjoints(net);
        auto residuals = check_edge_invariants(fg, res.store, vals, ref, cfg);
        CHECK(!residuals.empty());
        for (const auto& r : residuals) CHECK(r.residual < 1e-12);
    }
}

TEST_CASE("smoothed extraction is near-exact on a linear node") {
    FunctionNetwork net = parse_network(fixtures::kLinear);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    cfg.sigma = 1e-2;
    BPResult res = run_bp(fg, cfg);
    double a = extract_adjoint_smoothed(fg, res.store, cfg, net.find_var("x"));
    CHECK(std::abs(a - 3.0) < 1e-6);
}

TEST_CASE("smoothed extraction on the fixture is first-order accurate") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    cfg.sigma = 1e-3;
    BPResult res = run_bp(fg, cfg);
    CHECK(std::abs(extract_adjoint_smoothed(fg, res.store, cfg,
                                            net.find_var("t")) -
                   24.0) < 0.01 * 24.0);
    CHECK(std::abs(extract_adjoint_smoothed(fg, res.store, cfg,
                                            net.find_var("w")) -
                   3.0) < 0.01 * 3.0);
    CHECK(std::abs(extract_adjoint_smoothed(fg, res.store, cfg,
                                            net.find_var("y")) -
                   3.0) < 0.01 * 3.0);
}

TEST_CASE("smoothed extraction error shrinks along a sigma ladder") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    FactorGraph fg = lift_network(net);
    VarId t = net.find_var("t");
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {3e-2, 1e-2, 3e-3, 1e-3}) {
        BPConfig cfg;
        cfg.mode = BPMode::GridNumeric;
        cfg.sigma = sigma;
        BPResult res = run_bp(fg, cfg);
        double err =
            std::abs(extract_adjoint_smoothed(fg, res.store, cfg, t) - 24.0);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("smoothed extraction requires a delta prior") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    BPResult res = run_bp(fg, cfg);
    CHECK_THROWS_AS(
        extract_adjoint_smoothed(fg, res.store, cfg, net.find_var("x")), Error);
}

TEST_CASE("cross-method report on the fixture") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    BPConfig cfg;
    AdjointReport rep = cross_method_report(net, cfg);
    REQUIRE(rep.rows.size() == 7);
    CHECK(rep.exact_converged);
    CHECK(rep.grid_converged);
    CHECK(rep.warnings.empty());
    for (const auto& row : rep.rows) {
        CHECK(row.bp_delta == row.backprop);
        VarId v = net.find_var(row.name);
        if (net.is_input(v)) {
            REQUIRE(row.finite_diff.has_value());
            REQUIRE(row.bp_grid.has_value());
            CHECK(std::abs(*row.finite_diff - row.backprop) <=
                  1e-5 * std::max(1.0, std::abs(row.backprop)));
            CHECK(std::abs(*row.bp_grid - row.backprop) <=
                  2e-2 * std::max(1.0, std::abs(row.backprop)));
        } else {
            CHECK(!row.finite_diff.has_value());
            CHECK(!row.bp_grid.has_value());
        }
    }
    for (const auto& r : rep.residuals) CHECK(r.residual < 1e-12);
}

TEST_CASE("cross-method report: identity network") {
    FunctionNetwork net = parse_network(fixtures::kIdentity);
    BPConfig cfg;
    AdjointReport rep = cross_method_report(net, cfg);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].backprop == 1.0);
    CHECK(rep.rows[0].bp_delta == 1.0);
}

TEST_CASE("cross-method report records finite-difference failures as warnings") {
    // log(a) at a = 1e-7: the central difference at h = 1e-6 steps outside
    // the domain, so the fd column is missing and a warning is recorded.
    FunctionNetwork net =
        parse_network("input a = 1e-7\nz = log(a)\nobjective z\n");
    BPConfig cfg;
    AdjointReport rep = cross_method_report(net, cfg);
    CHECK(!rep.rows[0].finite_diff.has_value());
    CHECK(!rep.warnings.empty());
    CHECK(rep.rows[0].bp_delta == rep.rows[0].backprop);
}

TEST_CASE("unreachable variable extracts adjoint exactly 0") {
    FunctionNetwork net = parse_network(
        "input a = 1\nd = exp(a)\nb = pow2(a)\nobjective b\n");
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    BPResult res = run_bp(fg, cfg);
    std::vector<double> a = extract_adjoints_delta(fg, res, cfg);
    CHECK(a[net.find_var("d")] == 0.0);
}

TEST_CASE("delta extraction refuses an unconverged result") {
    FunctionNetwork net = parse_network(fixtures::kExample);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    BPResult res = run_bp(fg, cfg);
    res.converged = false;
    CHECK_THROWS_AS(extract_adjoints_delta(fg, res, cfg), Error);
}
