#pragma once

#include <vector>

#include "gridcast/flow_graph.hpp"

namespace gridcast {

struct Partition {
    std::vector<int> assignment;  // node -> module id, ids dense from 0
    int module_count = 0;

    static Partition single_module(int n) {
        Partition p;
        p.assignment.assign(static_cast<std::size_t>(n), 0);
        p.module_count = n > 0 ? 1 : 0;
        return p;
    }

    /// Renumbers arbitrary labels into dense ids ordered by first appearance.
    static Partition from_assignment(std::vector<int> labels);

    bool operator==(const Partition&) const = default;
};

/// Two-level map equation in bits. With q_m the exit rate of module m (sum of
/// boundary edge flows), q = sum q_m and s_m = q_m + sum of member visit
/// rates:
///   L = plogp(q) - 2 sum_m plogp(q_m) + sum_m plogp(s_m) - sum_i plogp(p_i)
/// which is the index-codebook entropy plus the per-module codebook
/// entropies. Throws on an empty module or an invalid assignment.
double map_equation_cost(const FlowGraph& g, const Partition& part);

}  // namespace gridcast
