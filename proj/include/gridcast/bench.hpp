#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridcast/cascade.hpp"
#include "gridcast/metrics.hpp"

namespace gridcast {

struct ClusterErrorReport {
    std::string name;
    MetricSet vmag;                                  // per-unit (scaled to % in CSVs)
    std::array<std::optional<MetricSet>, 3> vang;    // degrees, per phase; empty = absent
    std::optional<MetricSet> head_s;                 // relative, empty for the top cluster
};

struct ScatterPoint {
    double truth = 0.0;
    double predicted = 0.0;
    int bus = -1;
    char phase = '-';
    int sample = 0;
};

struct ScatterSeries {
    std::string cluster;
    std::string quantity;  // vmag | vang | s_head
    std::vector<ScatterPoint> points;
};

struct BenchmarkReport {
    std::vector<ClusterErrorReport> clusters;
    std::vector<ScatterSeries> scatter;
    TimingRecord timing;
    double oracle_seconds = 0.0;
    double speedup = 0.0;  // oracle_seconds / timing.t_ats
    int test_rows = 0;
    int excluded_rows = 0;  // oracle non-convergent test rows
};

// Truth/prediction tables over the same retained test rows; the assembly is
// separate from the measurement so the report math can be exercised with any
// prediction source (including the oracle itself).
struct BenchTables {
    Eigen::MatrixXd vmag_truth, vang_truth;  // rows x node-phases
    Eigen::MatrixXd vmag_pred, vang_pred;
    std::vector<Eigen::MatrixXd> head_truth, head_pred;  // per cluster, rows x 6
    std::vector<int> sample_ids;
};

BenchmarkReport assemble_report(const BenchTables& tables, const ClusterTree& tree,
                                const Feeder& f, const TimingRecord& timing,
                                double oracle_seconds);

struct BenchOptions {
    int timing_reps = 20;  // median over repetitions
    int workers = 1;
    SolverOptions solver;
};

/// Runs the oracle and the cascade over the same test multipliers (rows that
/// fail to converge are excluded and counted), compares them per cluster, and
/// measures both sides on this machine in this run.
BenchmarkReport run_benchmark(const CascadeModel& cm, const Feeder& f,
                              const Eigen::MatrixXd& test_multipliers,
                              const std::vector<int>& sample_ids, const BenchOptions& opts = {});

/// Writes metrics.csv, timing.csv and per-cluster scatter CSVs. Timing lives
/// only in timing.csv so the other artifacts stay byte-deterministic.
void emit_report(const BenchmarkReport& r, const std::string& dir);

}  // namespace gridcast
