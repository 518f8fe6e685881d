#pragma once

#include <string>
#include <vector>

#include "gridcast/cluster_tree.hpp"
#include "gridcast/feeder.hpp"

namespace gridcast {

// Quantities carried by cascade I/O slots. Load and fed powers are inputs;
// voltages and head powers are outputs.
enum class Quantity { PLoad, QLoad, PFed, QFed, Vmag, Vang, PHead, QHead };

const char* quantity_name(Quantity q);

struct SlotRef {
    int bus = -1;
    Phase phase = Phase::A;
    Quantity quantity = Quantity::PLoad;

    bool operator==(const SlotRef&) const = default;
};

struct IoLayout {
    std::vector<SlotRef> inputs;
    std::vector<SlotRef> outputs;

    int fed_offset = 0;          // index of the first fed input slot
    int head_output_offset = -1; // index of the first head-power output slot, -1 when top
};

std::string slot_label(const SlotRef& slot, const Feeder& f);

/// Canonical slot allocation per cluster. Inputs: six load-power slots per
/// cluster bus (bus id order, phases A/B/C, P before Q; absent phases are
/// structural zeros), then six fed slots per child (child head id order).
/// Outputs: (Vmag, Vang) per present node-phase in the same bus order, then
/// six head-power slots unless the cluster is the top one.
std::vector<IoLayout> allocate_io(const ClusterTree& tree, const Feeder& f);

}  // namespace gridcast
