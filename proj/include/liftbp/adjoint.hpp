#pragma once

#include <optional>
#include <string>
#include <vector>

#include "liftbp/autodiff.hpp"
#include "liftbp/bp.hpp"

namespace liftbp {

struct EdgeInvariantResidual {
    enum class Kind { InvariantA, InvariantB };
    Kind kind;
    VarId var;
    int factor;
    double bp_slope;        // raw message log-slope
    double autodiff_value;  // dz/dx (A) or dz/dy * df/dx (B)
    double residual;        // |bp_slope * kT - autodiff_value|
};

// Per-variable adjoints from the converged delta-mode store: slope of the
// variable's downward outgoing message times kT.
std::vector<double> extract_adjoints_delta(const FactorGraph& fg,
                                           const MessageStore& store,
                                           const BPConfig& cfg);
std::vector<double> extract_adjoints_delta(const FactorGraph& fg,
                                           const BPResult& result,
                                           const BPConfig& cfg);

// Smoothed extractor: -kT * integral of dX*/dx times log m_(x,X*), by
// trapezoid quadrature of the analytic Gaussian-prior derivative against the
// tabulated message. var must carry a delta prior.
double extract_adjoint_smoothed(const FactorGraph& fg, const MessageStore& store,
                                const BPConfig& cfg, VarId var);

std::vector<EdgeInvariantResidual> check_edge_invariants(
    const FactorGraph& fg, const MessageStore& store, const Valuation& vals,
    const std::vector<double>& adjoints, const BPConfig& cfg);

struct AdjointReport {
    struct Row {
        std::string name;
        double backprop = 0.0;
        double bp_delta = 0.0;
        std::optional<double> bp_grid;      // inputs only
        std::optional<double> finite_diff;  // inputs only
    };
    std::vector<Row> rows;  // variable declaration order
    std::vector<EdgeInvariantResidual> residuals;
    ScheduleKind schedule = ScheduleKind::TwoPass;
    int exact_sweeps = 0;
    int exact_rounds = 0;
    bool exact_converged = false;
    int grid_sweeps = 0;
    int grid_rounds = 0;
    bool grid_converged = false;
    std::vector<std::string> warnings;  // per-method partial failures
    BPConfig config;
};

// Runs every gradient path (backprop, finite differences, delta-mode BP,
// grid-mode BP) on one network and reconciles them.
AdjointReport cross_method_report(const FunctionNetwork& net, const BPConfig& cfg,
                                  double fd_step = 1e-6);

}  // namespace liftbp
