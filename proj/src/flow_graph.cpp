#include "gridcast/flow_graph.hpp"

#include <map>
#include <queue>

#include "gridcast/errors.hpp"

namespace gridcast {

FlowGraph FlowGraph::from_edges(int n, std::vector<Edge> edges) {
    FlowGraph g;
    g.n = n;
    g.adj.resize(static_cast<std::size_t>(n));
    g.strength.assign(static_cast<std::size_t>(n), 0.0);
    for (const Edge& e : edges) {
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n) throw Error("edge endpoint out of range");
        if (e.u == e.v) throw Error("self-loops are not part of the flow model");
        if (e.w <= 0.0) throw Error("edge weights must be positive");
        g.adj[static_cast<std::size_t>(e.u)].emplace_back(e.v, e.w);
        g.adj[static_cast<std::size_t>(e.v)].emplace_back(e.u, e.w);
        g.strength[static_cast<std::size_t>(e.u)] += e.w;
        g.strength[static_cast<std::size_t>(e.v)] += e.w;
        g.total_strength += 2.0 * e.w;
    }
    g.edges = std::move(edges);
    return g;
}

FlowGraph FlowGraph::from_feeder(const Feeder& f) {
    // aggregate parallel branches between the same bus pair
    std::map<std::pair<int, int>, double> weight;
    for (const auto& br : f.branches) {
        Complex sum(0, 0);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) sum += br.series(r, c);
        double w = std::abs(sum);
        if (w <= 0.0) throw Error("branch series block sums to zero; no flow weight");
        auto key = std::minmax(br.from, br.to);
        weight[{key.first, key.second}] += w;
    }
    std::vector<Edge> edges;
    edges.reserve(weight.size());
    for (const auto& [uv, w] : weight) edges.push_back(Edge{uv.first, uv.second, w});
    return from_edges(static_cast<int>(f.buses.size()), std::move(edges));
}

bool FlowGraph::connected() const {
    if (n == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (auto [v, w] : adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++count;
                q.push(v);
            }
    }
    return count == n;
}

std::vector<double> stationary_distribution(const FlowGraph& g) {
    if (!g.connected()) throw Error("flow graph is disconnected");
    if (g.total_strength <= 0.0) throw Error("flow graph has no edges");
    std::vector<double> p(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i)
        p[static_cast<std::size_t>(i)] = g.strength[static_cast<std::size_t>(i)] / g.total_strength;
    return p;
}

}  // namespace gridcast
