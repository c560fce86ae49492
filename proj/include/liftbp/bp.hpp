#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "liftbp/lift.hpp"

namespace liftbp {

enum class BPMode { ExactDelta, GridNumeric };
enum class ScheduleKind { TwoPass, Flooding };

struct Schedule {
    ScheduleKind kind = ScheduleKind::TwoPass;
    int max_iters = 200;
    double tol = 1e-10;
};

struct BPConfig {
    double kT = 1.0;
    double sigma = 1e-3;     // delta-approximation width
    int grid_points = 129;   // odd, >= 33
    double grid_span = 8.0;  // half-width in units of local message scale
    int quad_nodes = 3;      // Gauss-Hermite nodes per marginalized input
    Schedule schedule;
    BPMode mode = BPMode::ExactDelta;
    bool parallel = true;    // OpenMP path for grid kernels
    std::uint64_t seed = 0;  // Monte-Carlo fallback seed

    void check() const;  // throws Error on out-of-range fields
};

// Upward delta message: d(x - anchor).
struct PointMass {
    double anchor;
};

// Downward message known through s = d/dx log m(x) at x = anchor.
// A NaN anchor with slope 0 is the constant (uninformative) message.
struct AnchorSlope {
    double anchor;
    double slope;
    bool anchored() const;
};

// Grid-mode upward message.
struct GaussianParam {
    double mean;
    double stddev;
};

struct GridSpec {
    double lo = 0.0, hi = 1.0;
    int n = 0;
    double step() const { return (hi - lo) / (n - 1); }
    double x(int i) const { return lo + step() * i; }
    bool operator==(const GridSpec&) const = default;
};

// Grid-mode downward message, log domain, max-normalized.
struct GridLog {
    GridSpec grid;
    std::vector<double> logvals;
};

using MessageValue = std::variant<PointMass, AnchorSlope, GaussianParam, GridLog>;

enum class Direction { VarToFactor = 0, FactorToVar = 1 };

bool is_upward(const FactorGraph& fg, int factor, VarId var, Direction dir);

// One optional entry per directed edge; unset = message not yet formed.
class MessageStore {
public:
    MessageStore() = default;
    explicit MessageStore(const FactorGraph& fg);

    const MessageValue* get(int factor, VarId var, Direction dir) const;
    void set(int factor, VarId var, Direction dir, MessageValue v);

    struct Edge {
        int factor;
        VarId var;
    };
    int edge_count() const { return static_cast<int>(edges_.size()); }
    Edge edge(int idx) const { return edges_[idx]; }

    std::vector<GridSpec> var_grids;  // grid mode: canonical grid per var

private:
    std::vector<Edge> edges_;
    std::vector<int> offset_;  // per factor, start index into edges_
    std::vector<std::optional<MessageValue>> msgs_;  // 2 per edge
    int find_edge(int factor, VarId var) const;
};

// The factor feeding var from below (defining function factor or delta
// prior); -1 if none.
int below_factor(const FactorGraph& fg, VarId var);

std::optional<double> upward_anchor(const FactorGraph& fg,
                                    const MessageStore& store, VarId var);

// Canonical grid per variable: centered on the forward value, half-width
// grid_span * max(first-order pushforward stddev, sigma).
std::vector<GridSpec> plan_grids(const FactorGraph& fg, const BPConfig& cfg);

MessageStore initialize_messages(const FactorGraph& fg, const BPConfig& cfg);

// Single-message updates. strict=true (two-pass sweeps) throws BPError when
// an upstream anchor is missing; strict=false (flooding) leaves the message
// unformed instead. nullopt = not computable yet.
std::optional<MessageValue> update_variable_to_factor(
    const FactorGraph& fg, const MessageStore& store, int factor, VarId var,
    const BPConfig& cfg, bool strict = false);
std::optional<MessageValue> update_factor_to_variable(
    const FactorGraph& fg, const MessageStore& store, int factor, VarId var,
    const BPConfig& cfg, bool strict = false);

void sweep_up(const FactorGraph& fg, const BPConfig& cfg, MessageStore& store);
void sweep_down(const FactorGraph& fg, const BPConfig& cfg, MessageStore& store);

struct BPResult {
    MessageStore store;
    bool converged = true;
    int sweeps = 0;    // two-pass
    int rounds = 0;    // flooding: rounds that changed some message
    double residual = 0.0;
};

BPResult run_bp(const FactorGraph& fg, const BPConfig& cfg);

MessageValue compute_posterior(const FactorGraph& fg, const MessageStore& store,
                               VarId var, const BPConfig& cfg);
double posterior_mean(const GridLog& post);

// Component-wise distance for convergence checks; "infinite" (1e300) when
// the representations are incomparable or only one side exists.
double message_distance(const MessageValue* a, const MessageValue* b);

// --- grid-mode numeric helpers -------------------------------------------

// Physicists' Gauss-Hermite rule: pairs (node t_i, weight w_i) with
// sum w_i f(t_i) ~ integral f(t) exp(-t^2) dt.
std::vector<std::pair<double, double>> gauss_hermite(int n);

double grid_log_interpolate(const GridLog& m, double x);
GridLog resample_grid_log(const GridLog& m, const GridSpec& target);

// One downward factor->input tabulation, exposed so the serial reference and
// the OpenMP path can be compared directly.
struct DownwardKernel {
    Primitive op;
    int arity = 1;
    int target_slot = 0;
    std::vector<std::pair<int, GaussianParam>> marginalized;  // slot, message
    const GridLog* output_msg = nullptr;
    int quad_nodes = 3;

    double point(double x) const;  // un-normalized log value at x
};

// parallel=false is the serial reference; results are bit-identical.
std::vector<double> tabulate_downward(const DownwardKernel& k,
                                      const GridSpec& grid, bool parallel);

}  // namespace liftbp
