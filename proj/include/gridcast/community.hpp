#pragma once

#include <cstdint>

#include "gridcast/map_equation.hpp"

namespace gridcast {

struct DetectOptions {
    std::uint64_t seed = 1;
    int restarts = 8;     // seeded visit-order restarts, best final cost wins
    int max_levels = 1;   // > 1 enables recursive sub-splitting per module
    int min_split_size = 4;
};

/// Greedy map-equation minimization: local unit moves plus module
/// aggregation rounds (units become modules), repeated until no move
/// improves the cost. Ties between candidate target modules break toward
/// the lowest module id; restarts reshuffle the visit order under the seed.
/// The result never costs more than the single-module partition.
Partition detect_communities(const FlowGraph& g, const DetectOptions& opts = {});

}  // namespace gridcast
