#pragma once

#include <vector>

#include "liftbp/netir.hpp"

namespace liftbp {

enum class FactorKind { Function, DeltaPrior, Boltzmann };

struct FactorNode {
    FactorKind kind = FactorKind::Function;
    int func = -1;       // Function: index into net.functions
    VarId var = -1;      // DeltaPrior / Boltzmann target
    double center = 0.0; // DeltaPrior
    double kT = 1.0;     // Boltzmann
    std::vector<VarId> neighbors;  // Function: inputs then output
};

// Bipartite lifted graph. Factor order: function factors in declaration
// order, then one delta prior per input, then the Boltzmann factor.
struct FactorGraph {
    FunctionNetwork net;
    std::vector<FactorNode> factors;
    std::vector<std::vector<int>> factors_of_var;
    std::vector<int> prior_of_var;       // -1 if none
    std::vector<int> def_factor_of_var;  // function factor producing var, -1
    int boltzmann_factor = -1;
    VarId boltzmann_var = -1;
    std::vector<int> func_topo;  // function indices in topological order
    std::vector<int> topo_pos;   // per function, position within func_topo

    VarId objective() const { return net.objective; }
    int var_count() const { return net.var_count(); }
    VarId output_of(int factor) const {
        return net.functions[factors[factor].func].output;
    }
};

struct LiftOptions {
    double kT = 1.0;
    // Experimental: attach the Boltzmann factor to this variable instead of
    // the objective, leaving everything else unchanged. No correctness
    // claims outside the default (-1 = objective).
    VarId boltzmann_on = -1;
};

FactorGraph lift_network(const FunctionNetwork& net, const LiftOptions& opt = {});

// Number of independent cycles (E - V + components) of the bipartite graph.
int factor_graph_cycle_rank(const FactorGraph& fg);

// Longest shortest path (in edges) between any two nodes, variables and
// factors alike.
int factor_graph_diameter(const FactorGraph& fg);

// Longest input-to-output chain, counted in function applications. Synchronous
// flooding moves information one factor-graph edge per round, so it settles
// within 4 * depth + 2 rounds (one chain up, one chain down).
int network_depth(const FunctionNetwork& net);

}  // namespace liftbp
