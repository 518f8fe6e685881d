#pragma once

#include <string>
#include <vector>

#include "gridcast/feeder.hpp"
#include "gridcast/map_equation.hpp"

namespace gridcast {

struct Cluster {
    std::vector<int> buses;       // sorted by bus id (canonical slot order)
    int head_bus = -1;            // PCC; the slack bus for the top cluster
    int parent = -1;              // cluster index, -1 for top
    std::vector<int> children;
    int layer = 0;                // distance from the top cluster
    int head_branch = -1;         // branch to the parent, -1 for top
    int parent_side_bus = -1;     // upstream endpoint of head_branch
};

struct ClusterTree {
    std::vector<Cluster> clusters;   // BFS order from the top
    std::vector<int> bus_to_cluster;
    int top = -1;

    int size() const { return static_cast<int>(clusters.size()); }
    int depth() const;
    std::vector<std::vector<int>> layers() const;

    /// Empty string when all structural invariants hold, else a diagnostic.
    std::string check_invariants(const Feeder& f) const;
};

/// Report-friendly cluster name: A, B, ..., Z, AA, AB, ...
std::string cluster_name(int index);

struct GranularityPolicy {
    int min_size = 5;             // informational; small clusters are kept
    int max_size = 25;            // clusters above this get re-split
    bool recursive_split = true;
    std::uint64_t seed = 1;
};

/// Turns a raw partition into a legal cascade skeleton: splits disconnected
/// modules, re-splits oversized ones, merges cluster pairs that touch via
/// more than one branch (or close a cycle) until the cluster graph is a tree,
/// then orients it away from the slack cluster. Always succeeds; the worst
/// case collapses to a single cluster.
ClusterTree legalize_to_cluster_tree(const Feeder& f, const Partition& part,
                                     const GranularityPolicy& policy = {});

/// Partition export: `[assignment]` bus -> cluster plus `[clusters]` rows
/// (name, parent, head bus, layer). Stable across runs for equal seeds.
std::string serialize_cluster_tree(const ClusterTree& tree, const Feeder& f);
ClusterTree parse_cluster_tree(const std::string& text, const Feeder& f);

}  // namespace gridcast
