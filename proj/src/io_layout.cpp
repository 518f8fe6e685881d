#include "gridcast/io_layout.hpp"

#include <algorithm>

#include "gridcast/errors.hpp"

namespace gridcast {

const char* quantity_name(Quantity q) {
    switch (q) {
        case Quantity::PLoad: return "P_load";
        case Quantity::QLoad: return "Q_load";
        case Quantity::PFed: return "P_fed";
        case Quantity::QFed: return "Q_fed";
        case Quantity::Vmag: return "Vmag";
        case Quantity::Vang: return "Vang";
        case Quantity::PHead: return "P_head";
        case Quantity::QHead: return "Q_head";
    }
    return "?";
}

std::string slot_label(const SlotRef& slot, const Feeder& f) {
    return std::string(quantity_name(slot.quantity)) + ":" +
           f.buses[static_cast<std::size_t>(slot.bus)].id + ":" + phase_letter(slot.phase);
}

std::vector<IoLayout> allocate_io(const ClusterTree& tree, const Feeder& f) {
    std::vector<IoLayout> layouts(tree.clusters.size());
    for (std::size_t ci = 0; ci < tree.clusters.size(); ++ci) {
        const Cluster& c = tree.clusters[ci];
        IoLayout& io = layouts[ci];

        // independent load slots: 6 per cluster bus regardless of present
        // phases, keeping the layout width uniform
        for (int bus : c.buses)
            for (Phase p : kAllPhases) {
                io.inputs.push_back({bus, p, Quantity::PLoad});
                io.inputs.push_back({bus, p, Quantity::QLoad});
            }
        io.fed_offset = static_cast<int>(io.inputs.size());

        // fed slots: 6 per child, ordered by child head bus id
        std::vector<int> children = c.children;
        std::sort(children.begin(), children.end(), [&](int a, int b) {
            return f.buses[static_cast<std::size_t>(tree.clusters[static_cast<std::size_t>(a)].head_bus)].id <
                   f.buses[static_cast<std::size_t>(tree.clusters[static_cast<std::size_t>(b)].head_bus)].id;
        });
        for (int child : children) {
            int head = tree.clusters[static_cast<std::size_t>(child)].head_bus;
            for (Phase p : kAllPhases) {
                io.inputs.push_back({head, p, Quantity::PFed});
                io.inputs.push_back({head, p, Quantity::QFed});
            }
        }

        // voltage outputs for present node-phases only
        for (int bus : c.buses)
            for (Phase p : kAllPhases) {
                if (!f.buses[static_cast<std::size_t>(bus)].phases.contains(p)) continue;
                io.outputs.push_back({bus, p, Quantity::Vmag});
                io.outputs.push_back({bus, p, Quantity::Vang});
            }

        if (static_cast<int>(ci) != tree.top) {
            io.head_output_offset = static_cast<int>(io.outputs.size());
            for (Phase p : kAllPhases) {
                io.outputs.push_back({c.head_bus, p, Quantity::PHead});
                io.outputs.push_back({c.head_bus, p, Quantity::QHead});
            }
        }
    }
    return layouts;
}

}  // namespace gridcast
