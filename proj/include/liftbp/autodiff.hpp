#pragma once

#include <utility>
#include <vector>

#include "liftbp/netir.hpp"

namespace liftbp {

struct Valuation {
    std::vector<double> values;  // per VarId
    double at(VarId v) const { return values[v]; }
};

struct AdjointSet {
    std::vector<double> adjoints;  // per VarId, dz/dx
    double at(VarId v) const { return adjoints[v]; }
};

// Forward pass in topological order. Throws EvalError on domain failures
// (log of a non-positive value, division by zero, fractional power of a
// negative base) and on non-finite results.
Valuation evaluate(const FunctionNetwork& net);

// Reverse pass: adjoint[objective] = 1, then one sweep in reverse
// topological order accumulating adjoint[x] += adjoint[y] * df/dx.
AdjointSet backprop(const FunctionNetwork& net, const Valuation& vals);

// Central differences (z(x+h) - z(x-h)) / 2h per input, declaration order.
std::vector<std::pair<VarId, double>> finite_diff_gradient(
    const FunctionNetwork& net, double h = 1e-6);

}  // namespace liftbp
