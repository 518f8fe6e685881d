#include "gridcast/community.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "gridcast/errors.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

namespace {

inline double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

constexpr double kCostEps = 1e-12;

// Greedy two-level search over one graph. Units are disjoint node sets: the
// first round uses singletons, aggregation rounds reuse the found modules as
// units, all evaluated on the original graph flows.
class MapOptimizer {
  public:
    MapOptimizer(const FlowGraph& g, std::vector<double> p_node)
        : g_(g), p_node_(std::move(p_node)) {}

    Partition run(std::uint64_t order_seed) {
        assignment_.resize(static_cast<std::size_t>(g_.n));
        std::iota(assignment_.begin(), assignment_.end(), 0);
        rebuild_module_stats();

        std::vector<std::vector<int>> units(static_cast<std::size_t>(g_.n));
        for (int i = 0; i < g_.n; ++i) units[static_cast<std::size_t>(i)] = {i};

        Rng rng(order_seed);
        bool shuffled = order_seed != 0;
        for (;;) {
            bool any_improvement = false;
            // local moves at the current unit granularity
            for (int pass = 0; pass < 64; ++pass) {
                std::vector<int> order(units.size());
                std::iota(order.begin(), order.end(), 0);
                if (shuffled) rng.shuffle(order);
                bool moved = false;
                for (int ui : order)
                    moved |= try_move_unit(units[static_cast<std::size_t>(ui)]);
                if (!moved) break;
                any_improvement = true;
            }
            // aggregate: modules become the units of the next round
            std::vector<std::vector<int>> next;
            std::unordered_map<int, int> slot;
            for (int i = 0; i < g_.n; ++i) {
                int m = assignment_[static_cast<std::size_t>(i)];
                auto [it, fresh] = slot.emplace(m, static_cast<int>(next.size()));
                if (fresh) next.emplace_back();
                next[static_cast<std::size_t>(it->second)].push_back(i);
            }
            if (!any_improvement || next.size() == units.size()) break;
            units = std::move(next);
        }
        return Partition::from_assignment(assignment_);
    }

  private:
    void rebuild_module_stats() {
        p_mod_.assign(static_cast<std::size_t>(g_.n), 0.0);
        q_mod_.assign(static_cast<std::size_t>(g_.n), 0.0);
        for (int i = 0; i < g_.n; ++i)
            p_mod_[static_cast<std::size_t>(assignment_[static_cast<std::size_t>(i)])] +=
                p_node_[static_cast<std::size_t>(i)];
        for (const auto& e : g_.edges) {
            int mu = assignment_[static_cast<std::size_t>(e.u)];
            int mv = assignment_[static_cast<std::size_t>(e.v)];
            if (mu == mv) continue;
            double flow = e.w / g_.total_strength;
            q_mod_[static_cast<std::size_t>(mu)] += flow;
            q_mod_[static_cast<std::size_t>(mv)] += flow;
        }
    }

    // Cost delta of replacing (q, s) aggregates of the two touched modules;
    // global terms follow from the exit-rate change.
    struct ModuleTerms {
        double q = 0.0, p = 0.0;
    };

    double cost_terms(double q_total, const ModuleTerms& a, const ModuleTerms& b) const {
        return plogp(q_total) - 2.0 * (plogp(a.q) + plogp(b.q)) + plogp(a.q + a.p) +
               plogp(b.q + b.p);
    }

    bool try_move_unit(const std::vector<int>& unit) {
        int a = assignment_[static_cast<std::size_t>(unit.front())];
        for (int i : unit)
            if (assignment_[static_cast<std::size_t>(i)] != a) return false;  // unit was torn apart

        // flows from the unit to each adjacent module and in total
        neighbor_flow_.clear();
        double p_unit = 0.0, f_out_total = 0.0;
        for (int i : unit) {
            p_unit += p_node_[static_cast<std::size_t>(i)];
            for (auto [j, w] : g_.adj[static_cast<std::size_t>(i)]) {
                bool internal = std::find(unit.begin(), unit.end(), j) != unit.end();
                if (internal) continue;
                double flow = w / g_.total_strength;
                f_out_total += flow;
                neighbor_flow_[assignment_[static_cast<std::size_t>(j)]] += flow;
            }
        }

        double f_to_a = 0.0;
        if (auto it = neighbor_flow_.find(a); it != neighbor_flow_.end()) f_to_a = it->second;

        ModuleTerms a_before{q_mod_[static_cast<std::size_t>(a)], p_mod_[static_cast<std::size_t>(a)]};
        ModuleTerms a_after{std::max(0.0, a_before.q - f_out_total + 2.0 * f_to_a),
                            a_before.p - p_unit};
        if (a_after.p < kCostEps) {  // module becomes empty
            a_after.p = 0.0;
            a_after.q = 0.0;
        }
        double q_total = 0.0;
        for (std::size_t m = 0; m < q_mod_.size(); ++m) q_total += q_mod_[m];

        int best_target = a;
        double best_delta = 0.0;
        auto consider = [&](int b) {
            if (b == a) return;
            double f_to_b = 0.0;
            if (auto it = neighbor_flow_.find(b); it != neighbor_flow_.end()) f_to_b = it->second;
            ModuleTerms b_before{q_mod_[static_cast<std::size_t>(b)], p_mod_[static_cast<std::size_t>(b)]};
            ModuleTerms b_after{b_before.q + f_out_total - 2.0 * f_to_b, b_before.p + p_unit};
            double q_total_after = q_total + (a_after.q - a_before.q) + (b_after.q - b_before.q);
            double delta = cost_terms(q_total_after, a_after, b_after) -
                           cost_terms(q_total, a_before, b_before);
            if (delta < best_delta - kCostEps ||
                (delta < best_delta + kCostEps && best_target != a && b < best_target)) {
                best_delta = std::min(delta, best_delta);
                best_target = b;
            }
        };

        std::vector<int> candidates;
        candidates.reserve(neighbor_flow_.size());
        for (const auto& [m, flow] : neighbor_flow_) candidates.push_back(m);
        std::sort(candidates.begin(), candidates.end());
        for (int b : candidates) consider(b);
        // moving the unit out into a fresh module (escape hatch for units
        // stuck inside a larger module)
        if (p_mod_[static_cast<std::size_t>(a)] - p_unit > kCostEps) {
            int fresh = -1;
            for (int m = 0; m < g_.n; ++m)
                if (p_mod_[static_cast<std::size_t>(m)] == 0.0) {
                    fresh = m;
                    break;
                }
            if (fresh >= 0) consider(fresh);
        }

        if (best_target == a) return false;

        // apply
        double f_to_b = 0.0;
        if (auto it = neighbor_flow_.find(best_target); it != neighbor_flow_.end())
            f_to_b = it->second;
        q_mod_[static_cast<std::size_t>(a)] = a_after.q;
        p_mod_[static_cast<std::size_t>(a)] = a_after.p;
        q_mod_[static_cast<std::size_t>(best_target)] += f_out_total - 2.0 * f_to_b;
        p_mod_[static_cast<std::size_t>(best_target)] += p_unit;
        for (int i : unit) assignment_[static_cast<std::size_t>(i)] = best_target;
        return true;
    }

    const FlowGraph& g_;
    std::vector<double> p_node_;
    std::vector<int> assignment_;
    std::vector<double> p_mod_, q_mod_;
    std::unordered_map<int, double> neighbor_flow_;
};

FlowGraph induced_subgraph(const FlowGraph& g, const std::vector<int>& nodes,
                           std::vector<int>& local_of) {
    local_of.assign(static_cast<std::size_t>(g.n), -1);
    for (std::size_t k = 0; k < nodes.size(); ++k)
        local_of[static_cast<std::size_t>(nodes[k])] = static_cast<int>(k);
    std::vector<FlowGraph::Edge> edges;
    for (const auto& e : g.edges) {
        int lu = local_of[static_cast<std::size_t>(e.u)];
        int lv = local_of[static_cast<std::size_t>(e.v)];
        if (lu >= 0 && lv >= 0) edges.push_back({lu, lv, e.w});
    }
    return FlowGraph::from_edges(static_cast<int>(nodes.size()), std::move(edges));
}

void split_recursively(const FlowGraph& g, std::vector<int>& labels, int& next_label,
                       const std::vector<int>& nodes, const DetectOptions& opts, int level);

void assign_detect(const FlowGraph& g, std::vector<int>& labels, int& next_label,
                   const std::vector<int>& nodes, const DetectOptions& opts, int level) {
    std::vector<int> local_of;
    FlowGraph sub = induced_subgraph(g, nodes, local_of);
    if (!sub.connected() || sub.total_strength <= 0.0) return;

    DetectOptions sub_opts = opts;
    sub_opts.max_levels = 1;
    Partition part = detect_communities(sub, sub_opts);
    if (part.module_count <= 1) return;
    // accept only a genuine two-level improvement inside the module
    if (map_equation_cost(sub, part) >= map_equation_cost(sub, Partition::single_module(sub.n)) - kCostEps)
        return;

    std::vector<std::vector<int>> groups(static_cast<std::size_t>(part.module_count));
    for (std::size_t k = 0; k < nodes.size(); ++k)
        groups[static_cast<std::size_t>(part.assignment[k])].push_back(nodes[k]);
    for (auto& group : groups) {
        int label = next_label++;
        for (int node : group) labels[static_cast<std::size_t>(node)] = label;
        if (level + 1 < opts.max_levels &&
            static_cast<int>(group.size()) >= opts.min_split_size)
            split_recursively(g, labels, next_label, group, opts, level + 1);
    }
}

void split_recursively(const FlowGraph& g, std::vector<int>& labels, int& next_label,
                       const std::vector<int>& nodes, const DetectOptions& opts, int level) {
    if (static_cast<int>(nodes.size()) < opts.min_split_size) return;
    assign_detect(g, labels, next_label, nodes, opts, level);
}

}  // namespace

Partition detect_communities(const FlowGraph& g, const DetectOptions& opts) {
    if (g.n == 0) return Partition{};
    if (g.n == 1) return Partition::single_module(1);
    if (!g.connected()) throw Error("detect_communities requires a connected graph");

    std::vector<double> p = stationary_distribution(g);

    Partition best;
    double best_cost = 0.0;
    int restarts = std::max(1, opts.restarts);
    for (int r = 0; r < restarts; ++r) {
        MapOptimizer optimizer(g, p);
        // restart 0 visits units in index order; later restarts shuffle
        Partition cand = optimizer.run(r == 0 ? 0 : mix_seed(opts.seed, static_cast<std::uint64_t>(r)));
        double cost = map_equation_cost(g, cand);
        if (r == 0 || cost < best_cost - kCostEps) {
            best = std::move(cand);
            best_cost = cost;
        }
    }

    Partition trivial = Partition::single_module(g.n);
    if (map_equation_cost(g, trivial) < best_cost - kCostEps) {
        best = trivial;
    }

    if (opts.max_levels > 1 && best.module_count >= 1) {
        std::vector<int> labels = best.assignment;
        int next_label = best.module_count;
        std::vector<std::vector<int>> groups(static_cast<std::size_t>(best.module_count));
        for (int i = 0; i < g.n; ++i)
            groups[static_cast<std::size_t>(best.assignment[static_cast<std::size_t>(i)])].push_back(i);
        for (const auto& group : groups)
            split_recursively(g, labels, next_label, group, opts, 1);
        best = Partition::from_assignment(labels);
    }
    return best;
}

}  // namespace gridcast
