#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "gridcast/bench.hpp"
#include "gridcast/cascade.hpp"
#include "gridcast/grid_search.hpp"

namespace gridcast {

/// One configuration document drives the whole pipeline; every seed is
/// explicit so reruns are reproducible.
struct RunConfig {
    std::string feeder_path;
    std::string out_dir = "out";
    int workers = 0;  // 0 = available parallelism

    std::uint64_t partition_seed = 1;
    int restarts = 8;
    int max_levels = 1;
    GranularityPolicy granularity;

    SynthOptions synth;

    MlpConfig train;

    int timing_reps = 20;

    bool has_grid = false;
    HyperGrid grid;
    std::string sweep_cluster = "A";
};

RunConfig parse_run_config(const std::string& text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

/// Applies a seed override to every stage seed (each mixed with a distinct
/// stage tag).
void override_seeds(RunConfig& cfg, std::uint64_t seed);

struct PipelineResult {
    ClusterTree tree;
    CascadeModel model;
    BenchmarkReport report;
    bool dataset_stage_skipped = false;
    bool train_stage_skipped = false;
};

/// parse -> partition -> datasets -> train -> benchmark -> reports, with
/// per-stage hash caching under the output directory.
PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log);

/// Partition stage only; writes the partition export.
ClusterTree run_partition_stage(const RunConfig& cfg, std::ostream& log);

/// Grid sweep over the configured cluster; writes the ranking CSV.
std::vector<GridResult> run_sweep(const RunConfig& cfg, std::ostream& log);

/// Re-benchmark an existing bundle without retraining.
BenchmarkReport run_bench_only(const RunConfig& cfg, std::ostream& log);

}  // namespace gridcast
