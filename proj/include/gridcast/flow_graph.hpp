#pragma once

#include <utility>
#include <vector>

#include "gridcast/feeder.hpp"

namespace gridcast {

// Undirected weighted graph carrying the random-walk flow model used by the
// partitioner. For feeders, nodes are buses and an edge weight is the
// magnitude of the summed 3x3 series-admittance block entries, aggregated
// over parallel branches.
struct FlowGraph {
    int n = 0;
    struct Edge {
        int u = 0, v = 0;
        double w = 1.0;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<std::pair<int, double>>> adj;  // (neighbor, weight)
    std::vector<double> strength;                          // per-node incident weight sum
    double total_strength = 0.0;                           // = 2 * sum of edge weights

    static FlowGraph from_edges(int n, std::vector<Edge> edges);
    static FlowGraph from_feeder(const Feeder& f);

    bool connected() const;
};

/// Stationary visit rates of the undirected random walk:
/// p_i = strength_i / total_strength. Throws on a disconnected graph.
std::vector<double> stationary_distribution(const FlowGraph& g);

}  // namespace gridcast
