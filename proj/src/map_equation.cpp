#include "gridcast/map_equation.hpp"

#include <cmath>

#include "gridcast/errors.hpp"

namespace gridcast {

namespace {
inline double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }
}

Partition Partition::from_assignment(std::vector<int> labels) {
    Partition p;
    p.assignment.resize(labels.size());
    std::vector<int> remap;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int found = -1;
        for (std::size_t m = 0; m < remap.size(); ++m)
            if (remap[m] == labels[i]) {
                found = static_cast<int>(m);
                break;
            }
        if (found < 0) {
            found = static_cast<int>(remap.size());
            remap.push_back(labels[i]);
        }
        p.assignment[i] = found;
    }
    p.module_count = static_cast<int>(remap.size());
    return p;
}

double map_equation_cost(const FlowGraph& g, const Partition& part) {
    if (static_cast<int>(part.assignment.size()) != g.n)
        throw Error("partition does not cover the graph");
    if (g.total_strength <= 0.0) throw Error("flow graph has no edges");

    const int m_count = part.module_count;
    std::vector<int> seen(static_cast<std::size_t>(m_count), 0);
    for (int a : part.assignment) {
        if (a < 0 || a >= m_count) throw Error("module ids must be dense from 0");
        seen[static_cast<std::size_t>(a)] = 1;
    }
    for (int s : seen)
        if (!s) throw Error("empty module in partition");

    std::vector<double> p_module(static_cast<std::size_t>(m_count), 0.0);
    std::vector<double> q_module(static_cast<std::size_t>(m_count), 0.0);
    double sum_plogp_nodes = 0.0;

    for (int i = 0; i < g.n; ++i) {
        double p_i = g.strength[static_cast<std::size_t>(i)] / g.total_strength;
        p_module[static_cast<std::size_t>(part.assignment[static_cast<std::size_t>(i)])] += p_i;
        sum_plogp_nodes += plogp(p_i);
    }
    for (const auto& e : g.edges) {
        int mu = part.assignment[static_cast<std::size_t>(e.u)];
        int mv = part.assignment[static_cast<std::size_t>(e.v)];
        if (mu == mv) continue;
        double flow = e.w / g.total_strength;  // per direction
        q_module[static_cast<std::size_t>(mu)] += flow;
        q_module[static_cast<std::size_t>(mv)] += flow;
    }

    double q_total = 0.0, sum_plogp_exit = 0.0, sum_plogp_inner = 0.0;
    for (int m = 0; m < m_count; ++m) {
        double q = q_module[static_cast<std::size_t>(m)];
        q_total += q;
        sum_plogp_exit += plogp(q);
        sum_plogp_inner += plogp(q + p_module[static_cast<std::size_t>(m)]);
    }
    return plogp(q_total) - 2.0 * sum_plogp_exit + sum_plogp_inner - sum_plogp_nodes;
}

}  // namespace gridcast
