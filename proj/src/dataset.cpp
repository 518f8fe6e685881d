#include "gridcast/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/hash.hpp"
#include "gridcast/parallel.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

namespace {

const char* group_of_quantity(Quantity q) {
    switch (q) {
        case Quantity::Vmag: return "vmag";
        case Quantity::Vang: return "vang";
        case Quantity::PHead: return "p_head";
        case Quantity::QHead: return "q_head";
        default: return "input";
    }
}

}  // namespace

std::map<std::string, LoadShape> build_shape_table(const Feeder& f, int n_samples,
                                                   const SynthOptions& opts) {
    std::set<std::string> ids;
    for (const auto& ld : f.loads) ids.insert(ld.shape_id);
    LoadShape base = synth_base_shape(n_samples, mix_seed(opts.shape_seed, 0));

    CompandingConfig cfg = opts.companding;
    cfg.seed = mix_seed(opts.shape_seed, 1);
    auto family = mu_law_family(base, cfg, static_cast<int>(std::max<std::size_t>(ids.size(), 1)));

    std::map<std::string, LoadShape> table;
    std::size_t k = 0;
    for (const auto& id : ids) {
        LoadShape shape = family[k++ % family.size()];
        shape.id = id;
        table.emplace(id, std::move(shape));
    }
    return table;
}

SampleBank generate_samples(const Feeder& f, const std::map<std::string, LoadShape>& shapes,
                            const SynthOptions& opts) {
    if (opts.n_samples < 1) throw Error("n_samples must be >= 1");
    const int n_loads = static_cast<int>(f.loads.size());

    SampleBank bank;
    bank.feeder_digest = feeder_hash(f);
    bank.multipliers.resize(opts.n_samples, n_loads);
    for (int l = 0; l < n_loads; ++l) {
        auto it = shapes.find(f.loads[static_cast<std::size_t>(l)].shape_id);
        if (it == shapes.end())
            throw Error("load " + std::to_string(l) + " references missing shape '" +
                        f.loads[static_cast<std::size_t>(l)].shape_id + "'");
        const auto& mult = it->second.multipliers;
        for (int t = 0; t < opts.n_samples; ++t)
            bank.multipliers(t, l) =
                mult[static_cast<std::size_t>(t) % mult.size()];
    }

    bank.solutions.resize(static_cast<std::size_t>(opts.n_samples));
    bank.converged.assign(static_cast<std::size_t>(opts.n_samples), 0);

    // distinct samples solve concurrently; each worker chunk owns its own
    // factorization of the shared immutable feeder
    const int workers = resolve_workers(opts.workers);
    const AdmittanceMatrix y = build_admittance(f);
    bank.index = y.index;
    std::vector<FixedPointSolver> engines;
    engines.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) engines.emplace_back(f, y);

    std::atomic<int> cursor{0};
    parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
        const FixedPointSolver& engine = engines[w];
        std::vector<double> mult(static_cast<std::size_t>(n_loads));
        for (;;) {
            int t = cursor.fetch_add(1);
            if (t >= opts.n_samples) return;
            for (int l = 0; l < n_loads; ++l) mult[static_cast<std::size_t>(l)] = bank.multipliers(t, l);
            PowerFlowSolution sol = engine.solve(mult, opts.solver);
            bank.converged[static_cast<std::size_t>(t)] = sol.converged ? 1 : 0;
            bank.solutions[static_cast<std::size_t>(t)] = std::move(sol);
        }
    });

    for (int t = 0; t < opts.n_samples; ++t)
        if (bank.converged[static_cast<std::size_t>(t)]) bank.retained.push_back(t);

    double bad_ratio =
        1.0 - static_cast<double>(bank.retained.size()) / static_cast<double>(opts.n_samples);
    if (bad_ratio > opts.max_nonconverged_ratio)
        throw Error("non-convergent sample ratio " + fmt_sig9(bad_ratio) + " exceeds " +
                    fmt_sig9(opts.max_nonconverged_ratio) + " (" +
                    std::to_string(opts.n_samples - static_cast<int>(bank.retained.size())) + " of " +
                    std::to_string(opts.n_samples) + " samples failed)");
    return bank;
}

void split_rows_80_20(int n, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    int n_train = static_cast<int>(std::lround(0.8 * n));
    n_train = std::clamp(n_train, n > 1 ? 1 : 0, n > 1 ? n - 1 : n);
    train.assign(order.begin(), order.begin() + n_train);
    test.assign(order.begin() + n_train, order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
}

ClusterDataset assemble_cluster_dataset(const SampleBank& bank, const Feeder& f,
                                        const ClusterTree& tree, int cluster_id,
                                        const IoLayout& layout, const SynthOptions& opts) {
    if (cluster_id < 0 || cluster_id >= tree.size()) throw Error("cluster id out of range");
    const int n_rows = static_cast<int>(bank.retained.size());
    if (n_rows < 2) throw Error("not enough converged samples to build a dataset");

    ClusterDataset ds;
    ds.layout = layout;
    ds.inputs.setZero(n_rows, static_cast<int>(layout.inputs.size()));
    ds.outputs.setZero(n_rows, static_cast<int>(layout.outputs.size()));

    // per-load column lookup: (bus, phase) -> load indices
    std::vector<std::vector<int>> loads_at(f.buses.size() * 3);
    for (std::size_t l = 0; l < f.loads.size(); ++l) {
        const Load& ld = f.loads[l];
        loads_at[static_cast<std::size_t>(ld.bus) * 3 + static_cast<std::size_t>(ld.phase)]
            .push_back(static_cast<int>(l));
    }

    for (int r = 0; r < n_rows; ++r) {
        int t = bank.retained[static_cast<std::size_t>(r)];
        const PowerFlowSolution& sol = bank.solutions[static_cast<std::size_t>(t)];

        for (std::size_t col = 0; col < layout.inputs.size(); ++col) {
            const SlotRef& slot = layout.inputs[col];
            if (slot.quantity == Quantity::PLoad || slot.quantity == Quantity::QLoad) {
                double v = 0.0;
                for (int l : loads_at[static_cast<std::size_t>(slot.bus) * 3 +
                                      static_cast<std::size_t>(slot.phase)]) {
                    const Load& ld = f.loads[static_cast<std::size_t>(l)];
                    double base = slot.quantity == Quantity::PLoad ? ld.base_p_kw : ld.base_q_kvar;
                    v += bank.multipliers(t, l) * base / f.base_kva;
                }
                ds.inputs(r, static_cast<int>(col)) = v;
            }
        }
        // fed inputs: boundary power of each child from the same solution
        for (int child : tree.clusters[static_cast<std::size_t>(cluster_id)].children) {
            const Cluster& cc = tree.clusters[static_cast<std::size_t>(child)];
            auto s = branch_injected_power(sol, f, bank.index, cc.head_branch, cc.head_bus);
            for (std::size_t col = 0; col < layout.inputs.size(); ++col) {
                const SlotRef& slot = layout.inputs[col];
                if (slot.bus != cc.head_bus) continue;
                if (slot.quantity == Quantity::PFed)
                    ds.inputs(r, static_cast<int>(col)) = s[static_cast<std::size_t>(slot.phase)];
                else if (slot.quantity == Quantity::QFed)
                    ds.inputs(r, static_cast<int>(col)) = s[static_cast<std::size_t>(slot.phase) + 3];
            }
        }

        const Cluster& c = tree.clusters[static_cast<std::size_t>(cluster_id)];
        std::array<double, 6> head{};
        if (static_cast<int>(cluster_id) != tree.top)
            head = branch_injected_power(sol, f, bank.index, c.head_branch, c.head_bus);
        for (std::size_t col = 0; col < layout.outputs.size(); ++col) {
            const SlotRef& slot = layout.outputs[col];
            switch (slot.quantity) {
                case Quantity::Vmag:
                    ds.outputs(r, static_cast<int>(col)) = sol.vmag(bank.index.row(slot.bus, slot.phase));
                    break;
                case Quantity::Vang:
                    ds.outputs(r, static_cast<int>(col)) = sol.vang_deg(bank.index.row(slot.bus, slot.phase));
                    break;
                case Quantity::PHead:
                    ds.outputs(r, static_cast<int>(col)) = head[static_cast<std::size_t>(slot.phase)];
                    break;
                case Quantity::QHead:
                    ds.outputs(r, static_cast<int>(col)) = head[static_cast<std::size_t>(slot.phase) + 3];
                    break;
                default:
                    throw Error("unexpected output quantity");
            }
        }
    }

    // outlier removal: window-3 moving median over every column (inputs and
    // outputs alike; the choice is recorded in the manifest)
    auto filter_columns = [&](Eigen::MatrixXd& m) {
        std::vector<double> col(static_cast<std::size_t>(n_rows));
        for (int c = 0; c < m.cols(); ++c) {
            for (int r = 0; r < n_rows; ++r) col[static_cast<std::size_t>(r)] = m(r, c);
            auto filtered = moving_median(col, opts.median_window);
            for (int r = 0; r < n_rows; ++r) m(r, c) = filtered[static_cast<std::size_t>(r)];
        }
    };
    if (opts.median_window > 1 && n_rows > 1) {
        filter_columns(ds.inputs);
        filter_columns(ds.outputs);
    }

    split_rows_80_20(n_rows, opts.split_seed, ds.train_rows, ds.test_rows);

    for (const auto& slot : layout.inputs) ds.input_names.push_back(slot_label(slot, f));
    for (const auto& slot : layout.outputs) {
        ds.output_names.push_back(slot_label(slot, f));
        ds.output_groups.push_back(group_of_quantity(slot.quantity));
    }
    return ds;
}

ClusterDataset generate_cluster_dataset(const Feeder& f, const ClusterTree& tree, int cluster_id,
                                        const std::map<std::string, LoadShape>& shapes,
                                        const SynthOptions& opts) {
    SampleBank bank = generate_samples(f, shapes, opts);
    auto layouts = allocate_io(tree, f);
    return assemble_cluster_dataset(bank, f, tree, cluster_id,
                                    layouts[static_cast<std::size_t>(cluster_id)], opts);
}

ClusterDataset make_dataset(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                            double train_fraction, std::uint64_t split_seed) {
    if (inputs.rows() != outputs.rows()) throw Error("input/output row mismatch");
    ClusterDataset ds;
    ds.inputs = inputs;
    ds.outputs = outputs;
    const int n = static_cast<int>(inputs.rows());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(split_seed);
    rng.shuffle(order);
    int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * n)), 1, std::max(1, n - 1));
    ds.train_rows.assign(order.begin(), order.begin() + n_train);
    ds.test_rows.assign(order.begin() + n_train, order.end());
    std::sort(ds.train_rows.begin(), ds.train_rows.end());
    std::sort(ds.test_rows.begin(), ds.test_rows.end());
    for (int c = 0; c < inputs.cols(); ++c) ds.input_names.push_back("x" + std::to_string(c));
    for (int c = 0; c < outputs.cols(); ++c) {
        ds.output_names.push_back("y" + std::to_string(c));
        ds.output_groups.push_back("output");
    }
    return ds;
}

void write_dataset_csv(const ClusterDataset& ds, const std::string& dir, const std::string& cluster,
                       bool train_split) {
    const auto& rows = train_split ? ds.train_rows : ds.test_rows;
    std::ostringstream out;
    out << "sample";
    for (const auto& name : ds.input_names) out << ',' << name;
    for (const auto& name : ds.output_names) out << ',' << name;
    out << '\n';
    for (int r : rows) {
        out << r;
        for (int c = 0; c < ds.inputs.cols(); ++c) out << ',' << fmt_sig9(ds.inputs(r, c));
        for (int c = 0; c < ds.outputs.cols(); ++c) out << ',' << fmt_sig9(ds.outputs(r, c));
        out << '\n';
    }
    write_file(dir + "/cluster_" + cluster + (train_split ? "_train.csv" : "_test.csv"), out.str());
}

std::string synth_manifest(const Feeder& f, const ClusterTree& tree, const SampleBank& bank,
                           const SynthOptions& opts) {
    std::ostringstream out;
    out << "[synth]\n";
    out << "feeder_hash " << hash_hex(bank.feeder_digest) << "\n";
    out << "n_samples " << opts.n_samples << "\n";
    out << "retained " << bank.retained.size() << "\n";
    out << "shape_seed " << opts.shape_seed << "\n";
    out << "split_seed " << opts.split_seed << "\n";
    out << "jitter_sigma " << fmt_full(opts.companding.jitter_sigma) << "\n";
    out << "mu_min " << fmt_full(opts.companding.mu_min) << "\n";
    out << "mu_max " << fmt_full(opts.companding.mu_max) << "\n";
    if (!opts.companding.mu_values.empty()) {
        out << "mu_values";
        for (double mu : opts.companding.mu_values) out << ' ' << fmt_full(mu);
        out << "\n";
    }
    out << "median_window " << opts.median_window << "\n";
    out << "median_applied_to all_columns\n";
    out << "solver_tolerance " << fmt_full(opts.solver.tolerance) << "\n";
    out << "clusters " << tree.size() << "\n";
    out << "loads " << f.loads.size() << "\n";
    return out.str();
}

}  // namespace gridcast
