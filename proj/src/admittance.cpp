#include "gridcast/admittance.hpp"

#include <map>

#include "gridcast/errors.hpp"

namespace gridcast {

NodeIndex NodeIndex::build(const Feeder& f) {
    NodeIndex idx;
    idx.rows_of_bus.assign(f.buses.size(), {-1, -1, -1});
    for (std::size_t b = 0; b < f.buses.size(); ++b)
        for (Phase p : kAllPhases)
            if (f.buses[b].phases.contains(p)) {
                idx.rows_of_bus[b][static_cast<int>(p)] = static_cast<int>(idx.entries.size());
                idx.entries.emplace_back(static_cast<int>(b), p);
            }
    return idx;
}

AdmittanceMatrix build_admittance(const Feeder& f) {
    AdmittanceMatrix out;
    out.index = NodeIndex::build(f);
    const NodeIndex& idx = out.index;

    // Accumulate into an ordered map so the per-entry addition order is the
    // branch order, matching a naive dense assembly bit for bit.
    std::map<std::pair<int, int>, Complex> entries;
    auto add = [&](int r, int c, const Complex& v) {
        if (r < 0 || c < 0 || v == Complex(0, 0)) return;
        entries[{r, c}] += v;
    };

    for (const auto& br : f.branches) {
        for (Phase p : kAllPhases)
            for (Phase q : kAllPhases) {
                Complex ys = br.series(static_cast<int>(p), static_cast<int>(q));
                Complex yh = 0.5 * br.shunt(static_cast<int>(p), static_cast<int>(q));
                int fp = idx.row(br.from, p), fq = idx.row(br.from, q);
                int tp = idx.row(br.to, p), tq = idx.row(br.to, q);
                add(fp, fq, ys + yh);
                add(tp, tq, ys + yh);
                add(fp, tq, -ys);
                add(tp, fq, -ys);
            }
    }

    std::vector<char> has_row(static_cast<std::size_t>(idx.size()), 0);
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(entries.size());
    for (const auto& [rc, v] : entries) {
        triplets.emplace_back(rc.first, rc.second, v);
        if (v != Complex(0, 0)) has_row[static_cast<std::size_t>(rc.first)] = 1;
    }

    std::string singular;
    for (int r = 0; r < idx.size(); ++r)
        if (!has_row[static_cast<std::size_t>(r)]) {
            const auto& [bus, phase] = idx.entries[static_cast<std::size_t>(r)];
            singular += " " + f.buses[static_cast<std::size_t>(bus)].id + "." + phase_letter(phase);
        }
    if (!singular.empty()) throw Error("singular node-phases (all-zero admittance row):" + singular);

    out.matrix.resize(idx.size(), idx.size());
    out.matrix.setFromTriplets(triplets.begin(), triplets.end());
    out.matrix.makeCompressed();
    return out;
}

}  // namespace gridcast
