#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridcast/bench.hpp"
#include "gridcast/community.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/text.hpp"
#include "test_support.hpp"

using namespace gridcast;
using namespace gridcast::testing;

namespace {

// naive reference implementation, kept deliberately separate from the library
struct NaiveMetrics {
    double mae, maxae, mape, maxape;
};

NaiveMetrics naive_metrics(const std::vector<double>& truth, const std::vector<double>& pred) {
    NaiveMetrics m{0, 0, 0, 0};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double e = truth[i] - pred[i];
        if (e < 0) e = -e;
        m.mae += e;
        if (e > m.maxae) m.maxae = e;
        double t = truth[i] < 0 ? -truth[i] : truth[i];
        double rel = 100.0 * e / t;
        m.mape += rel;
        if (rel > m.maxape) m.maxape = rel;
    }
    m.mae /= static_cast<double>(truth.size());
    m.mape /= static_cast<double>(truth.size());
    return m;
}

}  // namespace

TEST_CASE("identity prediction gives all-zero metrics") {
    std::vector<double> v{1.0, 2.0, 3.0};
    MetricSet m = compute_metrics(v, v, true);
    CHECK(m.mae == 0.0);
    CHECK(m.maxae == 0.0);
    CHECK(m.mape == 0.0);
    CHECK(m.maxape == 0.0);
}

TEST_CASE("single-element metrics") {
    std::vector<double> t{2.0}, p{1.0};
    MetricSet m = compute_metrics(t, p, true);
    CHECK(m.mae == 1.0);
    CHECK(m.maxae == 1.0);
    CHECK(m.mape == doctest::Approx(50.0).epsilon(1e-15));
    CHECK(m.maxape == doctest::Approx(50.0).epsilon(1e-15));
}

TEST_CASE("two-element hand-computed metrics") {
    std::vector<double> t{1.0, 2.0}, p{1.1, 1.8};
    MetricSet m = compute_metrics(t, p, true);
    CHECK(m.mae == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(m.maxae == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.mape == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(m.maxape == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("metric preconditions") {
    std::vector<double> a{1.0, 2.0}, b{1.0};
    CHECK_THROWS_AS(compute_metrics(a, b, false), Error);
    CHECK_THROWS_AS(compute_metrics({}, {}, false), Error);
    std::vector<double> zero{0.0}, one{1.0};
    CHECK_THROWS_AS(compute_metrics(zero, one, true), Error);
    CHECK_NOTHROW(compute_metrics(zero, one, false));
}

TEST_CASE("metrics agree with the naive loop on random vectors") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.below(40));
        std::vector<double> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            t[static_cast<std::size_t>(i)] = rng.normal() + (rng.uniform01() < 0.5 ? 3.0 : -3.0);
            p[static_cast<std::size_t>(i)] = t[static_cast<std::size_t>(i)] + 0.1 * rng.normal();
        }
        MetricSet m = compute_metrics(t, p, true);
        NaiveMetrics ref = naive_metrics(t, p);
        CHECK(std::abs(m.mae - ref.mae) <= 1e-12);
        CHECK(std::abs(m.maxae - ref.maxae) <= 1e-12);
        CHECK(std::abs(m.mape - ref.mape) <= 1e-12);
        CHECK(std::abs(m.maxape - ref.maxape) <= 1e-12);
        CHECK(m.maxae >= m.mae);
        CHECK(m.maxape >= m.mape);
    }
}

namespace {

struct BenchFixture {
    Feeder feeder;
    ClusterTree tree;
    std::vector<IoLayout> layouts;
    SynthOptions opts;
    std::map<std::string, LoadShape> shapes;
    SampleBank bank;
    std::vector<ClusterDataset> datasets;
    CascadeModel model;
    Eigen::MatrixXd test_multipliers;
    std::vector<int> sample_ids;

    BenchFixture() {
        feeder = make_random_radial_feeder(10, 21, false);
        opts.n_samples = 220;
        opts.workers = 2;
        FlowGraph g = FlowGraph::from_feeder(feeder);
        Partition part = detect_communities(g);
        GranularityPolicy policy;
        policy.max_size = 5;
        tree = legalize_to_cluster_tree(feeder, part, policy);
        layouts = allocate_io(tree, feeder);
        shapes = build_shape_table(feeder, opts.n_samples, opts);
        bank = generate_samples(feeder, shapes, opts);
        for (int ci = 0; ci < tree.size(); ++ci)
            datasets.push_back(assemble_cluster_dataset(bank, feeder, tree, ci,
                                                        layouts[static_cast<std::size_t>(ci)], opts));
        MlpConfig cfg;
        cfg.epochs = 60;
        cfg.batch_size = 64;
        cfg.seed = 5;
        model = train_tree(tree, feeder, datasets, cfg, 2);

        const auto& rows = datasets.front().test_rows;
        test_multipliers.resize(static_cast<int>(rows.size()), static_cast<int>(feeder.loads.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            int t = bank.retained[static_cast<std::size_t>(rows[i])];
            sample_ids.push_back(t);
            for (std::size_t l = 0; l < feeder.loads.size(); ++l)
                test_multipliers(static_cast<int>(i), static_cast<int>(l)) =
                    bank.multipliers(t, static_cast<int>(l));
        }
    }
};

}  // namespace

TEST_CASE("loopback report: oracle as its own prediction scores zero everywhere") {
    BenchFixture fx;
    // truth tables straight from the oracle
    NodeIndex idx = NodeIndex::build(fx.feeder);
    const int rows = static_cast<int>(fx.test_multipliers.rows());
    BenchTables tables;
    tables.vmag_truth.resize(rows, idx.size());
    tables.vang_truth.resize(rows, idx.size());
    tables.head_truth.resize(static_cast<std::size_t>(fx.tree.size()));
    FixedPointSolver engine(fx.feeder);
    for (int ci = 0; ci < fx.tree.size(); ++ci)
        if (ci != fx.tree.top) tables.head_truth[static_cast<std::size_t>(ci)].resize(rows, 6);
    std::vector<double> mult(fx.feeder.loads.size());
    for (int r = 0; r < rows; ++r) {
        for (std::size_t l = 0; l < fx.feeder.loads.size(); ++l)
            mult[l] = fx.test_multipliers(r, static_cast<int>(l));
        PowerFlowSolution sol = engine.solve(mult);
        REQUIRE(sol.converged);
        for (int k = 0; k < idx.size(); ++k) {
            tables.vmag_truth(r, k) = sol.vmag(k);
            tables.vang_truth(r, k) = sol.vang_deg(k);
        }
        for (int ci = 0; ci < fx.tree.size(); ++ci) {
            if (ci == fx.tree.top) continue;
            const Cluster& c = fx.tree.clusters[static_cast<std::size_t>(ci)];
            auto s = branch_injected_power(sol, fx.feeder, idx, c.head_branch, c.head_bus);
            for (int k = 0; k < 6; ++k)
                tables.head_truth[static_cast<std::size_t>(ci)](r, k) = s[static_cast<std::size_t>(k)];
        }
    }
    tables.vmag_pred = tables.vmag_truth;
    tables.vang_pred = tables.vang_truth;
    tables.head_pred = tables.head_truth;

    TimingRecord timing = finalize_timing(std::vector<double>(static_cast<std::size_t>(fx.tree.size()), 0.01),
                                          fx.tree);
    BenchmarkReport report = assemble_report(tables, fx.tree, fx.feeder, timing, timing.t_ats);

    CHECK(report.speedup == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& c : report.clusters) {
        CHECK(c.vmag.mae == 0.0);
        CHECK(c.vmag.maxae == 0.0);
        for (const auto& vang : c.vang)
            if (vang) CHECK(vang->mae == 0.0);
        if (c.head_s) {
            CHECK(c.head_s->mape == 0.0);
            CHECK(c.head_s->maxape == 0.0);
        }
    }
}

TEST_CASE("full benchmark run produces a consistent report") {
    BenchFixture fx;
    BenchOptions opts;
    opts.timing_reps = 3;
    BenchmarkReport report = run_benchmark(fx.model, fx.feeder, fx.test_multipliers, fx.sample_ids, opts);

    CHECK(report.clusters.size() == static_cast<std::size_t>(fx.tree.size()));
    CHECK(report.test_rows == fx.test_multipliers.rows() - report.excluded_rows);
    CHECK(report.speedup == doctest::Approx(report.oracle_seconds / report.timing.t_ats));
    CHECK(critical_path_time(report.timing, fx.tree) == report.timing.t_ats);

    // top cluster has no head column, every other cluster does
    for (int ci = 0; ci < fx.tree.size(); ++ci) {
        const auto& c = report.clusters[static_cast<std::size_t>(ci)];
        if (ci == fx.tree.top) CHECK_FALSE(c.head_s.has_value());
        else CHECK(c.head_s.has_value());
        CHECK(c.vmag.maxae >= c.vmag.mae);
    }

    // scatter row counts: test rows x node-phases of the cluster
    NodeIndex idx = NodeIndex::build(fx.feeder);
    for (const auto& series : report.scatter) {
        if (series.quantity != "vmag") continue;
        int ci = -1;
        for (int k = 0; k < fx.tree.size(); ++k)
            if (cluster_name(k) == series.cluster) ci = k;
        REQUIRE(ci >= 0);
        int node_phases = 0;
        for (int bus : fx.tree.clusters[static_cast<std::size_t>(ci)].buses)
            for (Phase p : kAllPhases)
                if (idx.row(bus, p) >= 0) ++node_phases;
        CHECK(series.points.size() ==
              static_cast<std::size_t>(report.test_rows) * static_cast<std::size_t>(node_phases));
    }
}

TEST_CASE("emitted CSVs round-trip the metric values") {
    BenchFixture fx;
    BenchOptions opts;
    opts.timing_reps = 2;
    BenchmarkReport report = run_benchmark(fx.model, fx.feeder, fx.test_multipliers, fx.sample_ids, opts);

    auto dir = std::filesystem::temp_directory_path() / "gridcast_bench_test";
    std::filesystem::remove_all(dir);
    emit_report(report, dir.string());

    std::ifstream metrics(dir / "metrics.csv");
    REQUIRE(metrics.good());
    std::string header;
    std::getline(metrics, header);
    CHECK(header.find("vmag_mae_pct") != std::string::npos);
    CHECK(header.find("s_head_mape_pct") != std::string::npos);

    int data_rows = 0;
    std::string line;
    while (std::getline(metrics, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 11);
        const auto& cr = report.clusters[static_cast<std::size_t>(data_rows)];
        CHECK(cells[0] == cr.name);
        // values reproduce exactly at the emitted precision
        CHECK(cells[1] == fmt_sig9(cr.vmag.mae * 100.0));
        if (cr.head_s) CHECK(cells[9] == fmt_sig9(cr.head_s->mape));
        else CHECK(cells[9] == "None");
        ++data_rows;
    }
    CHECK(data_rows == static_cast<int>(report.clusters.size()));

    // scatter files exist with the right headers
    for (const auto& series : report.scatter) {
        std::ifstream sc(dir / ("scatter_" + series.cluster + "_" + series.quantity + ".csv"));
        REQUIRE(sc.good());
        std::getline(sc, line);
        CHECK(line == "truth,predicted,bus,phase,sample");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("empty report emits header-only CSVs") {
    BenchmarkReport empty;
    auto dir = std::filesystem::temp_directory_path() / "gridcast_bench_empty";
    std::filesystem::remove_all(dir);
    emit_report(empty, dir.string());
    std::ifstream metrics(dir / "metrics.csv");
    std::string header, extra;
    REQUIRE(std::getline(metrics, header));
    CHECK_FALSE(std::getline(metrics, extra));
    std::filesystem::remove_all(dir);
}
