#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridcast/cluster_tree.hpp"
#include "gridcast/io_layout.hpp"
#include "gridcast/loadshape.hpp"
#include "gridcast/solver.hpp"

namespace gridcast {

/// Supervised substrate for one cluster model. Rows are retained time
/// samples; columns follow the cluster IoLayout exactly.
struct ClusterDataset {
    IoLayout layout;
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd outputs;
    std::vector<int> train_rows;  // sorted, disjoint from test_rows
    std::vector<int> test_rows;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    std::vector<std::string> output_groups;  // metric group per output column
};

// One full-feeder solve per time sample, shared by every cluster dataset so
// boundary quantities stay consistent across the tree.
struct SampleBank {
    Eigen::MatrixXd multipliers;             // n_samples x n_loads
    std::vector<PowerFlowSolution> solutions;
    std::vector<char> converged;
    std::vector<int> retained;               // sample indices kept (converged)
    std::uint64_t feeder_digest = 0;
    NodeIndex index;
};

struct SynthOptions {
    int n_samples = 2000;
    std::uint64_t shape_seed = 11;
    std::uint64_t split_seed = 13;
    CompandingConfig companding;
    SolverOptions solver;
    int median_window = 3;
    double max_nonconverged_ratio = 0.10;
    int workers = 0;
};

/// Builds per-shape-id profiles for every shape referenced by the feeder
/// loads: a seeded base profile companded into one variant per distinct id.
std::map<std::string, LoadShape> build_shape_table(const Feeder& f, int n_samples,
                                                   const SynthOptions& opts);

/// Solves the full feeder once per time sample (concurrently; results are
/// ordered by sample index). Throws when more than max_nonconverged_ratio of
/// the samples fail to converge.
SampleBank generate_samples(const Feeder& f, const std::map<std::string, LoadShape>& shapes,
                            const SynthOptions& opts);

/// Extracts one cluster's dataset from the bank: teacher-forced fed inputs,
/// per-column moving-median filtering, seeded 80/20 split.
ClusterDataset assemble_cluster_dataset(const SampleBank& bank, const Feeder& f,
                                        const ClusterTree& tree, int cluster_id,
                                        const IoLayout& layout, const SynthOptions& opts);

/// Convenience one-shot used by tests: bank generation plus assembly.
ClusterDataset generate_cluster_dataset(const Feeder& f, const ClusterTree& tree, int cluster_id,
                                        const std::map<std::string, LoadShape>& shapes,
                                        const SynthOptions& opts);

/// Helper for synthetic (non-feeder) datasets in tests and examples.
ClusterDataset make_dataset(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                            double train_fraction, std::uint64_t split_seed);

/// The 80/20 row split shared by every cluster dataset: a seeded shuffle of
/// 0..n-1, first 80% (rounded) to train, remainder to test, both sorted.
void split_rows_80_20(int n, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test);

void write_dataset_csv(const ClusterDataset& ds, const std::string& dir,
                       const std::string& cluster, bool train_split);

std::string synth_manifest(const Feeder& f, const ClusterTree& tree, const SampleBank& bank,
                           const SynthOptions& opts);

}  // namespace gridcast
