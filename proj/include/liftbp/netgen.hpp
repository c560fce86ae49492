#pragma once

#include <cstdint>

#include "liftbp/netir.hpp"

namespace liftbp {

struct GenOptions {
    int max_functions = 20;
    // Restrict to smooth primitives and shallow nets (grid-mode testing).
    bool smooth_only = false;
    double max_abs_value = 20.0;
    double max_abs_adjoint = 100.0;
};

// Deterministic domain-safe random network: inputs in [0.5, 2.0], div/log
// kept away from singularities, values and adjoints bounded per options.
// Objective is the last function's output; other nodes may be unreachable.
FunctionNetwork random_network(std::uint64_t seed, const GenOptions& opt = {});

}  // namespace liftbp
