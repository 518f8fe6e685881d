#include "gridcast/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/hash.hpp"
#include "gridcast/parallel.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

CascadeModel train_tree(const ClusterTree& tree, const Feeder& f,
                        const std::vector<ClusterDataset>& datasets, const MlpConfig& cfg,
                        int workers, std::vector<TrainReport>* reports) {
    if (static_cast<int>(datasets.size()) != tree.size())
        throw Error("expected " + std::to_string(tree.size()) + " datasets, got " +
                    std::to_string(datasets.size()));

    CascadeModel cm;
    cm.tree = tree;
    cm.layouts = allocate_io(tree, f);
    cm.models.resize(static_cast<std::size_t>(tree.size()));
    cm.feeder_digest = feeder_hash(f);
    if (reports) reports->resize(static_cast<std::size_t>(tree.size()));

    for (int ci = 0; ci < tree.size(); ++ci) {
        const ClusterDataset& ds = datasets[static_cast<std::size_t>(ci)];
        if (ds.inputs.rows() == 0)
            throw Error("missing dataset for cluster " + cluster_name(ci));
        if (ds.inputs.cols() != static_cast<long>(cm.layouts[static_cast<std::size_t>(ci)].inputs.size()) ||
            ds.outputs.cols() != static_cast<long>(cm.layouts[static_cast<std::size_t>(ci)].outputs.size()))
            throw Error("dataset layout mismatch for cluster " + cluster_name(ci));
    }

    parallel_for(static_cast<std::size_t>(tree.size()), workers, [&](std::size_t ci) {
        MlpConfig cluster_cfg = cfg;
        cluster_cfg.seed = mix_seed(cfg.seed, ci);
        try {
            auto [model, report] = train_mlp(datasets[ci], cluster_cfg);
            cm.models[ci] = std::move(model);
            if (reports) (*reports)[ci] = std::move(report);
        } catch (const Error& e) {
            throw Error("training cluster " + cluster_name(static_cast<int>(ci)) + ": " + e.what());
        }
    });
    return cm;
}

SystemInputs make_system_inputs(const Feeder& f, const Eigen::MatrixXd& multipliers) {
    if (multipliers.cols() != static_cast<long>(f.loads.size()))
        throw Error("multiplier matrix must have one column per load");

    std::vector<int> order(f.buses.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return f.buses[static_cast<std::size_t>(a)].id < f.buses[static_cast<std::size_t>(b)].id;
    });

    SystemInputs si;
    si.position_of_bus.assign(f.buses.size(), -1);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        si.position_of_bus[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);

    si.values.setZero(multipliers.rows(), 6 * static_cast<long>(f.buses.size()));
    for (std::size_t l = 0; l < f.loads.size(); ++l) {
        const Load& ld = f.loads[l];
        int pcol = si.column(ld.bus, ld.phase, true);
        int qcol = si.column(ld.bus, ld.phase, false);
        for (int r = 0; r < multipliers.rows(); ++r) {
            double m = multipliers(r, static_cast<int>(l));
            si.values(r, pcol) += m * ld.base_p_kw / f.base_kva;
            si.values(r, qcol) += m * ld.base_q_kvar / f.base_kva;
        }
    }
    return si;
}

double critical_path_time(const TimingRecord& tr, const ClusterTree& tree) {
    if (static_cast<int>(tr.cluster_seconds.size()) != tree.size())
        throw Error("timing record is missing cluster entries");
    // finish(c) = t_c + max over children finish(child)
    std::vector<double> finish(tr.cluster_seconds.size(), -1.0);
    // clusters are stored in BFS order, so children have larger indices
    for (int ci = tree.size() - 1; ci >= 0; --ci) {
        double child_max = 0.0;
        for (int child : tree.clusters[static_cast<std::size_t>(ci)].children)
            child_max = std::max(child_max, finish[static_cast<std::size_t>(child)]);
        finish[static_cast<std::size_t>(ci)] = tr.cluster_seconds[static_cast<std::size_t>(ci)] + child_max;
    }
    return finish[static_cast<std::size_t>(tree.top)];
}

TimingRecord finalize_timing(std::vector<double> cluster_seconds, const ClusterTree& tree) {
    TimingRecord tr;
    tr.cluster_seconds = std::move(cluster_seconds);

    auto layers = tree.layers();
    tr.layer_max.resize(layers.size(), 0.0);
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (int ci : layers[l])
            tr.layer_max[l] = std::max(tr.layer_max[l], tr.cluster_seconds[static_cast<std::size_t>(ci)]);

    for (int ci = 0; ci < tree.size(); ++ci) {
        if (!tree.clusters[static_cast<std::size_t>(ci)].children.empty()) continue;
        double sum = 0.0;
        for (int at = ci; at >= 0; at = tree.clusters[static_cast<std::size_t>(at)].parent)
            sum += tr.cluster_seconds[static_cast<std::size_t>(at)];
        tr.path_sums.push_back(sum);
    }
    tr.t_ats = critical_path_time(tr, tree);
    return tr;
}

CascadePrediction predict_cascade(const CascadeModel& cm, const Feeder& f,
                                  const SystemInputs& inputs, const CascadeOptions& opts) {
    const ClusterTree& tree = cm.tree;
    if (static_cast<int>(cm.models.size()) != tree.size() ||
        static_cast<int>(cm.layouts.size()) != tree.size())
        throw Error("cascade model is incomplete");

    NodeIndex idx = NodeIndex::build(f);
    const long rows = inputs.values.rows();

    CascadePrediction pred;
    pred.vmag.setZero(rows, idx.size());
    pred.vang.setZero(rows, idx.size());
    pred.head_power.resize(static_cast<std::size_t>(tree.size()));
    if (opts.keep_cluster_inputs) pred.cluster_inputs.resize(static_cast<std::size_t>(tree.size()));
    std::vector<double> seconds(static_cast<std::size_t>(tree.size()), 0.0);

    auto layers = tree.layers();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        // clusters inside one layer are independent: children finished in the
        // previous (deeper) round, and each writes only its own output slots
        parallel_for(layer.size(), opts.workers, [&](std::size_t k) {
            int ci = layer[k];
            const IoLayout& io = cm.layouts[static_cast<std::size_t>(ci)];
            const Cluster& c = tree.clusters[static_cast<std::size_t>(ci)];

            Eigen::MatrixXd x(rows, static_cast<long>(io.inputs.size()));
            for (std::size_t col = 0; col < io.inputs.size(); ++col) {
                const SlotRef& slot = io.inputs[col];
                if (slot.quantity == Quantity::PLoad || slot.quantity == Quantity::QLoad)
                    x.col(static_cast<long>(col)) =
                        inputs.values.col(inputs.column(slot.bus, slot.phase, slot.quantity == Quantity::PLoad));
            }
            // fed slots: six per child, aligned with the child's head outputs
            int fed = io.fed_offset;
            std::vector<int> children = c.children;
            std::sort(children.begin(), children.end(), [&](int a, int b) {
                return f.buses[static_cast<std::size_t>(tree.clusters[static_cast<std::size_t>(a)].head_bus)].id <
                       f.buses[static_cast<std::size_t>(tree.clusters[static_cast<std::size_t>(b)].head_bus)].id;
            });
            for (int child : children) {
                const Eigen::MatrixXd& head = pred.head_power[static_cast<std::size_t>(child)];
                if (head.rows() != rows) throw Error("cascade layout inconsistency: child head missing");
                for (int s = 0; s < 6; ++s) x.col(fed + s) = head.col(s);
                fed += 6;
            }

            auto t0 = std::chrono::steady_clock::now();
            Eigen::MatrixXd y = predict_mlp(cm.models[static_cast<std::size_t>(ci)], x);
            seconds[static_cast<std::size_t>(ci)] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            for (std::size_t col = 0; col < io.outputs.size(); ++col) {
                const SlotRef& slot = io.outputs[col];
                switch (slot.quantity) {
                    case Quantity::Vmag:
                        pred.vmag.col(idx.row(slot.bus, slot.phase)) = y.col(static_cast<long>(col));
                        break;
                    case Quantity::Vang:
                        pred.vang.col(idx.row(slot.bus, slot.phase)) = y.col(static_cast<long>(col));
                        break;
                    default: break;
                }
            }
            if (io.head_output_offset >= 0) {
                Eigen::MatrixXd head(rows, 6);
                for (int s = 0; s < 6; ++s) head.col(s) = y.col(io.head_output_offset + s);
                pred.head_power[static_cast<std::size_t>(ci)] = std::move(head);
            }
            if (opts.keep_cluster_inputs) pred.cluster_inputs[static_cast<std::size_t>(ci)] = std::move(x);
        });
    }

    pred.timing = finalize_timing(std::move(seconds), tree);
    return pred;
}

void save_bundle(const CascadeModel& cm, const Feeder& f, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/partition.txt", serialize_cluster_tree(cm.tree, f));
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        write_file(dir + "/model_" + cluster_name(ci) + ".txt",
                   serialize_mlp(cm.models[static_cast<std::size_t>(ci)]));
    std::ostringstream manifest;
    manifest << "[bundle]\n";
    manifest << "feeder_hash " << hash_hex(cm.feeder_digest) << '\n';
    manifest << "clusters " << cm.tree.size() << '\n';
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        manifest << "model " << cluster_name(ci) << " model_" << cluster_name(ci) << ".txt\n";
    write_file(dir + "/manifest.txt", manifest.str());
}

CascadeModel load_bundle(const std::string& dir, const Feeder& f) {
    CascadeModel cm;
    cm.feeder_digest = feeder_hash(f);

    auto manifest = parse_sections(read_file(dir + "/manifest.txt"));
    for (const auto& s : manifest) {
        if (s.name != "bundle") continue;
        for (const auto& line : s.lines) {
            if (line.tokens.size() == 2 && line.tokens[0].value == "feeder_hash" &&
                line.tokens[1].value != hash_hex(cm.feeder_digest))
                throw Error("bundle was built for a different feeder (hash mismatch)");
        }
    }

    cm.tree = parse_cluster_tree(read_file(dir + "/partition.txt"), f);
    cm.layouts = allocate_io(cm.tree, f);
    cm.models.resize(static_cast<std::size_t>(cm.tree.size()));
    for (int ci = 0; ci < cm.tree.size(); ++ci) {
        cm.models[static_cast<std::size_t>(ci)] =
            parse_mlp(read_file(dir + "/model_" + cluster_name(ci) + ".txt"));
        const IoLayout& io = cm.layouts[static_cast<std::size_t>(ci)];
        const MlpModel& m = cm.models[static_cast<std::size_t>(ci)];
        if (m.input_width() != static_cast<int>(io.inputs.size()) ||
            m.output_width() != static_cast<int>(io.outputs.size()))
            throw Error("bundle model " + cluster_name(ci) + " does not match the layout");
    }
    return cm;
}

}  // namespace gridcast
