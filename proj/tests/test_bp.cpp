#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "liftbp/autodiff.hpp"
#include "liftbp/bp.hpp"
#include "liftbp/netgen.hpp"

using namespace liftbp;

namespace {

struct Fixture {
    FunctionNetwork net;
    FactorGraph fg;
    Fixture() : net(parse_network(fixtures::kExample)), fg(lift_network(net)) {}
    VarId var(const char* n) const { return net.find_var(n); }
};

double slope_of(const MessageStore& s, int factor, VarId var, Direction dir) {
    const MessageValue* m = s.get(factor, var, dir);
    REQUIRE(m != nullptr);
    const auto* as = std::get_if<AnchorSlope>(m);
    REQUIRE(as != nullptr);
    return as->slope;
}

bool stores_equal(const MessageStore& a, const MessageStore& b) {
    if (a.edge_count() != b.edge_count()) return false;
    for (int e = 0; e < a.edge_count(); ++e) {
        auto [factor, var] = a.edge(e);
        for (Direction dir : {Direction::VarToFactor, Direction::FactorToVar}) {
            double d = message_distance(a.get(factor, var, dir),
                                        b.get(factor, var, dir));
            if (!(d <= 1e-15)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("config validation") {
    BPConfig cfg;
    CHECK_NOTHROW(cfg.check());
    BPConfig bad = cfg;
    bad.kT = 0.0;
    CHECK_THROWS_AS(bad.check(), Error);
    bad = cfg;
    bad.grid_points = 32;  // even
    CHECK_THROWS_AS(bad.check(), Error);
    bad = cfg;
    bad.grid_points = 31;  // too small
    CHECK_THROWS_AS(bad.check(), Error);
    bad = cfg;
    bad.quad_nodes = 12;
    CHECK_THROWS_AS(bad.check(), Error);
    bad = cfg;
    bad.schedule.tol = 0.0;
    CHECK_THROWS_AS(bad.check(), Error);
}

TEST_CASE("initialize: exact-mode seeds and constants") {
    Fixture fx;
    BPConfig cfg;
    MessageStore store = initialize_messages(fx.fg, cfg);
    for (VarId v : fx.net.inputs) {
        const MessageValue* m =
            store.get(fx.fg.prior_of_var[v], v, Direction::FactorToVar);
        REQUIRE(m != nullptr);
        const auto* pm = std::get_if<PointMass>(m);
        REQUIRE(pm != nullptr);
        CHECK(pm->anchor == fx.net.input_value[v]);
    }
    // Every downward message starts as the constant message.
    for (int e = 0; e < store.edge_count(); ++e) {
        auto [factor, var] = store.edge(e);
        for (Direction dir : {Direction::VarToFactor, Direction::FactorToVar}) {
            if (is_upward(fx.fg, factor, var, dir)) continue;
            const MessageValue* m = store.get(factor, var, dir);
            REQUIRE(m != nullptr);
            const auto* as = std::get_if<AnchorSlope>(m);
            REQUIRE(as != nullptr);
            CHECK(as->slope == 0.0);
            CHECK(!as->anchored());
        }
    }
}

TEST_CASE("initialize: grid-mode Gaussian seeds") {
    Fixture fx;
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    MessageStore store = initialize_messages(fx.fg, cfg);
    VarId w = fx.var("w");
    const MessageValue* m =
        store.get(fx.fg.prior_of_var[w], w, Direction::FactorToVar);
    const auto* g = std::get_if<GaussianParam>(m);
    REQUIRE(g != nullptr);
    CHECK(g->mean == 2.0);
    CHECK(g->stddev == cfg.sigma);
}

TEST_CASE("fixture message values after two-pass") {
    Fixture fx;
    BPConfig cfg;
    BPResult res = run_bp(fx.fg, cfg);
    int fz = fx.net.def_of[fx.var("z")];
    int fu = fx.net.def_of[fx.var("u")];
    int fv = fx.net.def_of[fx.var("v")];
    int fxx = fx.net.def_of[fx.var("x")];

    // m_(z,F): Boltzmann only, slope 1/kT = 1.
    CHECK(slope_of(res.store, fz, fx.var("z"), Direction::VarToFactor) == 1.0);
    // m_(F,u): incoming slope 1 times df/du = v* = 3.
    CHECK(slope_of(res.store, fz, fx.var("u"), Direction::FactorToVar) == 3.0);
    // m_(G,x) and m_(H,x).
    CHECK(slope_of(res.store, fu, fx.var("x"), Direction::FactorToVar) == 3.0);
    CHECK(slope_of(res.store, fv, fx.var("x"), Direction::FactorToVar) == 9.0);
    // m_(x,J): the two downward slopes add, the chain rule.
    CHECK(slope_of(res.store, fxx, fx.var("x"), Direction::VarToFactor) == 12.0);
    // Upward anchors are the forward values.
    const auto* pm = std::get_if<PointMass>(
        res.store.get(fz, fx.var("z"), Direction::FactorToVar));
    REQUIRE(pm != nullptr);
    CHECK(pm->anchor == 9.0);
}

TEST_CASE("kT scales raw slopes") {
    Fixture fx;
    FactorGraph fg = lift_network(fx.net, LiftOptions{2.0});
    BPConfig cfg;
    cfg.kT = 2.0;
    BPResult res = run_bp(fg, cfg);
    int fz = fx.net.def_of[fx.var("z")];
    CHECK(slope_of(res.store, fz, fx.var("z"), Direction::VarToFactor) == 0.5);
}

TEST_CASE("exact mode reaches its fixed point in one two-pass sweep") {
    Fixture fx;
    BPConfig cfg;
    BPResult res = run_bp(fx.fg, cfg);
    MessageStore again = res.store;
    sweep_up(fx.fg, cfg, again);
    sweep_down(fx.fg, cfg, again);
    CHECK(stores_equal(res.store, again));
}

TEST_CASE("fixed point holds on random networks") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        FunctionNetwork net = random_network(seed);
        FactorGraph fg = lift_network(net);
        BPConfig cfg;
        BPResult res = run_bp(fg, cfg);
        MessageStore again = res.store;
        sweep_up(fg, cfg, again);
        sweep_down(fg, cfg, again);
        CHECK(stores_equal(res.store, again));
    }
}

TEST_CASE("flooding converges to the two-pass slopes") {
    Fixture fx;
    BPConfig two;
    BPResult a = run_bp(fx.fg, two);
    BPConfig fl = two;
    fl.schedule.kind = ScheduleKind::Flooding;
    fl.schedule.tol = 1e-12;
    BPResult b = run_bp(fx.fg, fl);
    CHECK(b.converged);
    CHECK(b.rounds <= 4 * network_depth(fx.net) + 2);
    for (int e = 0; e < a.store.edge_count(); ++e) {
        auto [factor, var] = a.store.edge(e);
        for (Direction dir : {Direction::VarToFactor, Direction::FactorToVar}) {
            double d = message_distance(a.store.get(factor, var, dir),
                                        b.store.get(factor, var, dir));
            CHECK(d <= 1e-10);
        }
    }
}

TEST_CASE("identity network floods to convergence immediately") {
    FunctionNetwork net = parse_network(fixtures::kIdentity);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.schedule.kind = ScheduleKind::Flooding;
    BPResult res = run_bp(fg, cfg);
    CHECK(res.converged);
    CHECK(res.rounds <= 4 * network_depth(net) + 2);
    VarId a = net.objective;
    CHECK(slope_of(res.store, fg.prior_of_var[a], a, Direction::VarToFactor) ==
          1.0);
}

TEST_CASE("flooding reports non-convergence when starved of iterations") {
    Fixture fx;
    BPConfig cfg;
    cfg.schedule.kind = ScheduleKind::Flooding;
    cfg.schedule.max_iters = 1;
    CHECK_THROWS_AS(run_bp(fx.fg, cfg), BPError);
}

TEST_CASE("anchor mismatch is detected") {
    Fixture fx;
    BPConfig cfg;
    BPResult res = run_bp(fx.fg, cfg);
    int fu = fx.net.def_of[fx.var("u")];
    res.store.set(fu, fx.var("x"), Direction::FactorToVar,
                  AnchorSlope{1.5, 3.0});  // true anchor is 1.0
    int fxx = fx.net.def_of[fx.var("x")];
    CHECK_THROWS_AS(update_variable_to_factor(fx.fg, res.store, fxx,
                                              fx.var("x"), cfg, true),
                    BPError);
}

TEST_CASE("direction invariant on random networks, both modes") {
    for (std::uint64_t seed = 50; seed < 65; ++seed) {
        FunctionNetwork net = random_network(seed);
        FactorGraph fg = lift_network(net);
        for (BPMode mode : {BPMode::ExactDelta, BPMode::GridNumeric}) {
            BPConfig cfg;
            cfg.mode = mode;
            BPResult res = run_bp(fg, cfg);
            for (int e = 0; e < res.store.edge_count(); ++e) {
                auto [factor, var] = res.store.edge(e);
                for (Direction dir :
                     {Direction::VarToFactor, Direction::FactorToVar}) {
                    const MessageValue* m = res.store.get(factor, var, dir);
                    if (!m) continue;
                    bool up = is_upward(fg, factor, var, dir);
                    bool delta_like = std::holds_alternative<PointMass>(*m) ||
                                      std::holds_alternative<GaussianParam>(*m);
                    CHECK(up == delta_like);
                }
            }
        }
    }
}

TEST_CASE("posterior centers equal forward values in exact mode") {
    Fixture fx;
    BPConfig cfg;
    BPResult res = run_bp(fx.fg, cfg);
    Valuation vals = evaluate(fx.net);
    for (int v = 0; v < fx.net.var_count(); ++v) {
        MessageValue post = compute_posterior(fx.fg, res.store, v, cfg);
        const auto* pm = std::get_if<PointMass>(&post);
        REQUIRE(pm != nullptr);
        CHECK(pm->anchor == vals.at(v));
    }
}

TEST_CASE("grid posterior shifts by adjoint * sigma^2 / kT on a linear node") {
    FunctionNetwork net = parse_network(fixtures::kLinear);
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    cfg.sigma = 1e-2;
    BPResult res = run_bp(fg, cfg);
    VarId x = net.find_var("x");
    MessageValue post = compute_posterior(fg, res.store, x, cfg);
    const auto* gl = std::get_if<GridLog>(&post);
    REQUIRE(gl != nullptr);
    double shift = posterior_mean(*gl) - 2.0;
    double expected = 3.0 * cfg.sigma * cfg.sigma / cfg.kT;
    CHECK(std::abs(shift - expected) <= 0.05 * expected);
}

TEST_CASE("repeated argument sums its slot partials") {
    FunctionNetwork net =
        parse_network("input x = 3\nz = mul(x, x)\nobjective z\n");
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    BPResult res = run_bp(fg, cfg);
    VarId x = net.find_var("x");
    CHECK(slope_of(res.store, fg.prior_of_var[x], x, Direction::VarToFactor) ==
          6.0);

    FunctionNetwork net2 =
        parse_network("input x = 3\nz = sub(x, x)\nobjective z\n");
    FactorGraph fg2 = lift_network(net2);
    BPResult res2 = run_bp(fg2, cfg);
    VarId x2 = net2.find_var("x");
    CHECK(slope_of(res2.store, fg2.prior_of_var[x2], x2,
                   Direction::VarToFactor) == 0.0);

    // Grid mode: posterior stays near x* and the pushforward keeps the
    // correlated width 2|x*|sigma.
    BPConfig grid = cfg;
    grid.mode = BPMode::GridNumeric;
    BPResult res3 = run_bp(fg, grid);
    const auto* g = std::get_if<GaussianParam>(
        res3.store.get(0, net.find_var("z"), Direction::FactorToVar));
    REQUIRE(g != nullptr);
    CHECK(g->stddev == doctest::Approx(6.0 * grid.sigma).epsilon(1e-9));
}

TEST_CASE("Monte-Carlo fallback at a vanishing Jacobian") {
    // f(x) = x^2 at x* = 0: the first-order pushforward degenerates.
    FunctionNetwork net = parse_network("input x = 0\nz = pow2(x)\nobjective z\n");
    FactorGraph fg = lift_network(net);
    BPConfig cfg;
    cfg.mode = BPMode::GridNumeric;
    cfg.sigma = 1e-2;
    BPResult res = run_bp(fg, cfg);
    const MessageValue* m =
        res.store.get(0, net.find_var("z"), Direction::FactorToVar);
    const auto* g = std::get_if<GaussianParam>(m);
    REQUIRE(g != nullptr);
    double s2 = cfg.sigma * cfg.sigma;
    CHECK(std::abs(g->mean - s2) < 0.1 * s2);               // E[x^2] = sigma^2
    CHECK(std::abs(g->stddev - std::sqrt(2.0) * s2) < 0.1 * std::sqrt(2.0) * s2);
}

TEST_CASE("Gauss-Hermite rule integrates low-order moments exactly") {
    for (int n : {1, 2, 3, 5, 7, 9}) {
        auto gh = gauss_hermite(n);
        REQUIRE((int)gh.size() == n);
        double w0 = 0.0, m2 = 0.0;
        for (auto [t, w] : gh) {
            w0 += w;
            m2 += w * t * t;
        }
        CHECK(w0 == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
        if (n >= 2) CHECK(m2 == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));
    }
}

TEST_CASE("grid resampling rejects empty overlap") {
    GridLog m{{0.0, 1.0, 33}, std::vector<double>(33, 0.0)};
    CHECK_THROWS_AS(resample_grid_log(m, GridSpec{5.0, 6.0, 33}), BPError);
    CHECK_NOTHROW(resample_grid_log(m, GridSpec{0.5, 1.5, 33}));
}

TEST_CASE("OpenMP grid kernel matches the serial reference bit-for-bit") {
    for (std::uint64_t seed = 70; seed < 80; ++seed) {
        FunctionNetwork net = random_network(seed, {.smooth_only = true});
        FactorGraph fg = lift_network(net);
        BPConfig par;
        par.mode = BPMode::GridNumeric;
        par.parallel = true;
        BPConfig ser = par;
        ser.parallel = false;
        BPResult a = run_bp(fg, par);
        BPResult b = run_bp(fg, ser);
        for (int e = 0; e < a.store.edge_count(); ++e) {
            auto [factor, var] = a.store.edge(e);
            for (Direction dir :
                 {Direction::VarToFactor, Direction::FactorToVar}) {
                CHECK(message_distance(a.store.get(factor, var, dir),
                                       b.store.get(factor, var, dir)) == 0.0);
            }
        }
    }
}
