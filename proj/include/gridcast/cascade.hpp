#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridcast/dataset.hpp"
#include "gridcast/io_layout.hpp"
#include "gridcast/mlp.hpp"

namespace gridcast {

/// The deployable surrogate: the cluster tree plus one trained model and one
/// I/O layout per cluster. Immutable after training.
struct CascadeModel {
    ClusterTree tree;
    std::vector<IoLayout> layouts;
    std::vector<MlpModel> models;
    std::uint64_t feeder_digest = 0;
};

/// Trains every cluster model independently on its teacher-forced dataset
/// (fed inputs are ground-truth boundary powers). Per-cluster seeds derive
/// from cfg.seed and the cluster index, so concurrent and sequential training
/// produce identical weights. Throws naming the cluster on a missing dataset
/// or divergence.
CascadeModel train_tree(const ClusterTree& tree, const Feeder& f,
                        const std::vector<ClusterDataset>& datasets, const MlpConfig& cfg,
                        int workers = 1, std::vector<TrainReport>* reports = nullptr);

// Full-system load state batch: for every bus (by id order) six columns
// (phase A/B/C, P then Q) of per-unit load powers.
struct SystemInputs {
    Eigen::MatrixXd values;
    std::vector<int> position_of_bus;  // bus index -> slot group position

    int column(int bus, Phase phase, bool active) const {
        return 6 * position_of_bus[static_cast<std::size_t>(bus)] +
               2 * static_cast<int>(phase) + (active ? 0 : 1);
    }
};

SystemInputs make_system_inputs(const Feeder& f, const Eigen::MatrixXd& multipliers);

struct TimingRecord {
    std::vector<double> cluster_seconds;  // prediction wall time per cluster
    std::vector<double> layer_max;
    std::vector<double> path_sums;        // one entry per root-to-leaf path
    double t_ats = 0.0;
};

/// Array-tree-structure critical path: a cluster starts once all its children
/// finished, so t_ATS is the maximum over root-to-leaf paths of the summed
/// cluster times along the path. Throws on a missing time entry.
double critical_path_time(const TimingRecord& tr, const ClusterTree& tree);

/// Fills layer_max / path_sums / t_ats from cluster_seconds.
TimingRecord finalize_timing(std::vector<double> cluster_seconds, const ClusterTree& tree);

struct CascadePrediction {
    Eigen::MatrixXd vmag;  // rows x node-phases (NodeIndex order), per-unit
    Eigen::MatrixXd vang;  // degrees
    std::vector<Eigen::MatrixXd> head_power;      // per cluster: rows x 6, empty for top
    std::vector<Eigen::MatrixXd> cluster_inputs;  // populated when keep_cluster_inputs
    TimingRecord timing;
};

struct CascadeOptions {
    int workers = 1;
    bool keep_cluster_inputs = false;
};

/// Bottom-up inference: the deepest layer first, every predicted head power
/// filling the matching parent fed slot, the top cluster last. Clusters
/// within one layer evaluate concurrently; outputs are bit-identical to
/// sequential evaluation.
CascadePrediction predict_cascade(const CascadeModel& cm, const Feeder& f,
                                  const SystemInputs& inputs, const CascadeOptions& opts = {});

/// Bundle directory: partition export, one model file per cluster, manifest.
/// Loadable for prediction with just the feeder document.
void save_bundle(const CascadeModel& cm, const Feeder& f, const std::string& dir);
CascadeModel load_bundle(const std::string& dir, const Feeder& f);

}  // namespace gridcast
