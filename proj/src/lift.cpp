#include "liftbp/lift.hpp"

#include <algorithm>
#include <deque>

namespace liftbp {

FactorGraph lift_network(const FunctionNetwork& net, const LiftOptions& opt) {
    require_valid(net);
    if (!(opt.kT > 0.0)) throw Error("lift_network: kT must be > 0");

    FactorGraph fg;
    fg.net = net;
    fg.factors_of_var.assign(net.var_count(), {});
    fg.prior_of_var.assign(net.var_count(), -1);
    fg.def_factor_of_var.assign(net.var_count(), -1);

    auto link = [&](int factor, VarId v) {
        // One edge per (factor, var) pair even when an argument is repeated,
        // as in mul(x, x); slot multiplicity lives in FuncNode::inputs.
        auto& nb = fg.factors[factor].neighbors;
        if (std::find(nb.begin(), nb.end(), v) != nb.end()) return;
        nb.push_back(v);
        fg.factors_of_var[v].push_back(factor);
    };

    for (size_t f = 0; f < net.functions.size(); ++f) {
        const FuncNode& fn = net.functions[f];
        FactorNode node;
        node.kind = FactorKind::Function;
        node.func = static_cast<int>(f);
        fg.factors.push_back(node);
        int idx = static_cast<int>(fg.factors.size()) - 1;
        for (VarId in : fn.inputs) link(idx, in);
        link(idx, fn.output);
        fg.def_factor_of_var[fn.output] = idx;
    }
    for (VarId v : net.inputs) {
        FactorNode node;
        node.kind = FactorKind::DeltaPrior;
        node.var = v;
        node.center = net.input_value[v];
        fg.factors.push_back(node);
        int idx = static_cast<int>(fg.factors.size()) - 1;
        link(idx, v);
        fg.prior_of_var[v] = idx;
    }
    VarId bvar = opt.boltzmann_on >= 0 ? opt.boltzmann_on : net.objective;
    if (bvar >= net.var_count()) throw Error("lift_network: bad Boltzmann target");
    FactorNode bnode;
    bnode.kind = FactorKind::Boltzmann;
    bnode.var = bvar;
    bnode.kT = opt.kT;
    fg.factors.push_back(bnode);
    fg.boltzmann_factor = static_cast<int>(fg.factors.size()) - 1;
    fg.boltzmann_var = bvar;
    link(fg.boltzmann_factor, bvar);
    fg.func_topo = topo_order(net);
    fg.topo_pos.assign(net.functions.size(), -1);
    for (size_t i = 0; i < fg.func_topo.size(); ++i)
        fg.topo_pos[fg.func_topo[i]] = static_cast<int>(i);
    return fg;
}

namespace {

// Node numbering: variables [0, nv), factors [nv, nv + nf).
std::vector<std::vector<int>> adjacency(const FactorGraph& fg) {
    int nv = fg.var_count();
    int nf = static_cast<int>(fg.factors.size());
    std::vector<std::vector<int>> adj(nv + nf);
    for (int f = 0; f < nf; ++f)
        for (VarId v : fg.factors[f].neighbors) {
            adj[v].push_back(nv + f);
            adj[nv + f].push_back(v);
        }
    return adj;
}

}  // namespace

int factor_graph_cycle_rank(const FactorGraph& fg) {
    auto adj = adjacency(fg);
    int n = static_cast<int>(adj.size());
    int edges = 0;
    for (const auto& a : adj) edges += static_cast<int>(a.size());
    edges /= 2;
    int components = 0;
    std::vector<bool> seen(n, false);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        ++components;
        std::deque<int> q{s};
        seen[s] = true;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int w : adj[u])
                if (!seen[w]) { seen[w] = true; q.push_back(w); }
        }
    }
    return edges - n + components;
}

int factor_graph_diameter(const FactorGraph& fg) {
    auto adj = adjacency(fg);
    int n = static_cast<int>(adj.size());
    int diameter = 0;
    for (int s = 0; s < n; ++s) {
        std::vector<int> dist(n, -1);
        std::deque<int> q{s};
        dist[s] = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int w : adj[u])
                if (dist[w] < 0) {
                    dist[w] = dist[u] + 1;
                    if (dist[w] > diameter) diameter = dist[w];
                    q.push_back(w);
                }
        }
    }
    return diameter;
}

int network_depth(const FunctionNetwork& net) {
    std::vector<int> depth(net.var_count(), 0);
    int deepest = 0;
    for (int f : topo_order(net)) {
        const FuncNode& fn = net.functions[f];
        int d = 0;
        for (VarId in : fn.inputs) d = std::max(d, depth[in]);
        depth[fn.output] = d + 1;
        deepest = std::max(deepest, d + 1);
    }
    return deepest;
}

}  // namespace liftbp
