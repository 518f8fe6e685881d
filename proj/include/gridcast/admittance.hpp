#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "gridcast/feeder.hpp"

namespace gridcast {

// Maps (bus, phase) pairs onto a dense, gap-free row space. Buses keep their
// declaration order; phases run A, B, C within a bus. Absent phases get -1.
struct NodeIndex {
    std::vector<std::pair<int, Phase>> entries;   // row -> (bus, phase)
    std::vector<std::array<int, 3>> rows_of_bus;  // bus -> per-phase row or -1

    static NodeIndex build(const Feeder& f);

    int row(int bus, Phase p) const { return rows_of_bus[static_cast<std::size_t>(bus)][static_cast<int>(p)]; }
    int size() const { return static_cast<int>(entries.size()); }
};

struct AdmittanceMatrix {
    NodeIndex index;
    Eigen::SparseMatrix<Complex> matrix;  // square, node-phase by node-phase
};

/// Assembles the nodal admittance matrix from per-branch 3x3 blocks:
/// off-diagonal blocks get -series, diagonal blocks get series + shunt/2 at
/// each endpoint, accumulated in branch order. Throws on a present node-phase
/// whose row would be identically zero (singular node).
AdmittanceMatrix build_admittance(const Feeder& f);

}  // namespace gridcast
