#include "gridcast/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

namespace {

double phase_sum_apparent(const Eigen::MatrixXd& head, int row) {
    // one scalar per boundary: apparent power summed over phases
    double s = 0.0;
    for (int p = 0; p < 3; ++p)
        s += std::hypot(head(row, p), head(row, p + 3));
    return s;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

BenchmarkReport assemble_report(const BenchTables& tables, const ClusterTree& tree,
                                const Feeder& f, const TimingRecord& timing,
                                double oracle_seconds) {
    NodeIndex idx = NodeIndex::build(f);
    const int rows = static_cast<int>(tables.vmag_truth.rows());

    BenchmarkReport report;
    report.timing = timing;
    report.oracle_seconds = oracle_seconds;
    report.speedup = timing.t_ats > 0.0 ? oracle_seconds / timing.t_ats : 0.0;
    report.test_rows = rows;

    for (int ci = 0; ci < tree.size(); ++ci) {
        const Cluster& c = tree.clusters[static_cast<std::size_t>(ci)];
        ClusterErrorReport cr;
        cr.name = cluster_name(ci);

        std::vector<double> vmag_t, vmag_p;
        std::array<std::vector<double>, 3> vang_t, vang_p;
        ScatterSeries sc_vmag{cr.name, "vmag", {}};
        ScatterSeries sc_vang{cr.name, "vang", {}};

        for (int bus : c.buses)
            for (Phase ph : kAllPhases) {
                int r = idx.row(bus, ph);
                if (r < 0) continue;
                for (int row = 0; row < rows; ++row) {
                    double tv = tables.vmag_truth(row, r), pv = tables.vmag_pred(row, r);
                    double ta = tables.vang_truth(row, r), pa = tables.vang_pred(row, r);
                    vmag_t.push_back(tv);
                    vmag_p.push_back(pv);
                    vang_t[static_cast<std::size_t>(ph)].push_back(ta);
                    vang_p[static_cast<std::size_t>(ph)].push_back(pa);
                    int sample = tables.sample_ids.empty() ? row
                                                           : tables.sample_ids[static_cast<std::size_t>(row)];
                    sc_vmag.points.push_back({tv, pv, bus, phase_letter(ph), sample});
                    sc_vang.points.push_back({ta, pa, bus, phase_letter(ph), sample});
                }
            }

        cr.vmag = compute_metrics(vmag_t, vmag_p, false);
        for (Phase ph : kAllPhases) {
            auto& t = vang_t[static_cast<std::size_t>(ph)];
            auto& p = vang_p[static_cast<std::size_t>(ph)];
            if (!t.empty()) cr.vang[static_cast<std::size_t>(ph)] = compute_metrics(t, p, false);
        }

        if (ci != tree.top) {
            const auto& head_t = tables.head_truth[static_cast<std::size_t>(ci)];
            const auto& head_p = tables.head_pred[static_cast<std::size_t>(ci)];
            std::vector<double> s_t(static_cast<std::size_t>(rows)), s_p(static_cast<std::size_t>(rows));
            ScatterSeries sc_s{cr.name, "s_head", {}};
            for (int row = 0; row < rows; ++row) {
                s_t[static_cast<std::size_t>(row)] = phase_sum_apparent(head_t, row);
                s_p[static_cast<std::size_t>(row)] = phase_sum_apparent(head_p, row);
                int sample = tables.sample_ids.empty() ? row
                                                       : tables.sample_ids[static_cast<std::size_t>(row)];
                sc_s.points.push_back({s_t[static_cast<std::size_t>(row)],
                                       s_p[static_cast<std::size_t>(row)], c.head_bus, '-', sample});
            }
            cr.head_s = compute_metrics(s_t, s_p, true);
            report.scatter.push_back(std::move(sc_s));
        }

        report.scatter.push_back(std::move(sc_vmag));
        report.scatter.push_back(std::move(sc_vang));
        report.clusters.push_back(std::move(cr));
    }
    return report;
}

BenchmarkReport run_benchmark(const CascadeModel& cm, const Feeder& f,
                              const Eigen::MatrixXd& test_multipliers,
                              const std::vector<int>& sample_ids, const BenchOptions& opts) {
    if (opts.timing_reps < 1) throw Error("timing_reps must be >= 1");
    const int rows = static_cast<int>(test_multipliers.rows());
    if (rows < 1) throw Error("benchmark needs at least one test row");

    FixedPointSolver engine(f);
    const NodeIndex& idx = engine.index();

    // oracle pass: truth tables, excluding rows the oracle cannot solve
    std::vector<PowerFlowSolution> solutions;
    std::vector<int> kept_rows;
    std::vector<double> mult(f.loads.size());
    for (int row = 0; row < rows; ++row) {
        for (std::size_t l = 0; l < f.loads.size(); ++l)
            mult[l] = test_multipliers(row, static_cast<int>(l));
        PowerFlowSolution sol = engine.solve(mult, opts.solver);
        if (!sol.converged) continue;
        solutions.push_back(std::move(sol));
        kept_rows.push_back(row);
    }
    const int kept = static_cast<int>(kept_rows.size());
    if (kept == 0) throw Error("oracle failed to converge on every test row");

    Eigen::MatrixXd kept_multipliers(kept, test_multipliers.cols());
    for (int i = 0; i < kept; ++i)
        kept_multipliers.row(i) = test_multipliers.row(kept_rows[static_cast<std::size_t>(i)]);

    BenchTables tables;
    tables.vmag_truth.resize(kept, idx.size());
    tables.vang_truth.resize(kept, idx.size());
    tables.head_truth.resize(static_cast<std::size_t>(cm.tree.size()));
    tables.head_pred.resize(static_cast<std::size_t>(cm.tree.size()));
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        if (ci != cm.tree.top)
            tables.head_truth[static_cast<std::size_t>(ci)].resize(kept, 6);

    for (int i = 0; i < kept; ++i) {
        const PowerFlowSolution& sol = solutions[static_cast<std::size_t>(i)];
        for (int r = 0; r < idx.size(); ++r) {
            tables.vmag_truth(i, r) = sol.vmag(r);
            tables.vang_truth(i, r) = sol.vang_deg(r);
        }
        for (int ci = 0; ci < cm.tree.size(); ++ci) {
            if (ci == cm.tree.top) continue;
            const Cluster& c = cm.tree.clusters[static_cast<std::size_t>(ci)];
            auto s = branch_injected_power(sol, f, idx, c.head_branch, c.head_bus);
            for (int k = 0; k < 6; ++k)
                tables.head_truth[static_cast<std::size_t>(ci)](i, k) = s[static_cast<std::size_t>(k)];
        }
    }

    for (const int r : kept_rows) {
        if (!sample_ids.empty())
            tables.sample_ids.push_back(sample_ids[static_cast<std::size_t>(r)]);
    }

    // cascade pass (predictions are identical across repetitions; timing is
    // the per-cluster median)
    SystemInputs inputs = make_system_inputs(f, kept_multipliers);
    CascadeOptions copts;
    copts.workers = opts.workers;
    CascadePrediction pred = predict_cascade(cm, f, inputs, copts);
    std::vector<std::vector<double>> cluster_times(static_cast<std::size_t>(cm.tree.size()));
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        cluster_times[static_cast<std::size_t>(ci)].push_back(
            pred.timing.cluster_seconds[static_cast<std::size_t>(ci)]);
    for (int rep = 1; rep < opts.timing_reps; ++rep) {
        CascadePrediction timed = predict_cascade(cm, f, inputs, copts);
        for (int ci = 0; ci < cm.tree.size(); ++ci)
            cluster_times[static_cast<std::size_t>(ci)].push_back(
                timed.timing.cluster_seconds[static_cast<std::size_t>(ci)]);
    }
    std::vector<double> median_times(static_cast<std::size_t>(cm.tree.size()));
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        median_times[static_cast<std::size_t>(ci)] = median_of(cluster_times[static_cast<std::size_t>(ci)]);
    TimingRecord timing = finalize_timing(std::move(median_times), cm.tree);

    // oracle timing over the identical batch, same machine, same run
    std::vector<double> oracle_times;
    for (int rep = 0; rep < opts.timing_reps; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < kept; ++i) {
            for (std::size_t l = 0; l < f.loads.size(); ++l)
                mult[l] = kept_multipliers(i, static_cast<int>(l));
            PowerFlowSolution sol = engine.solve(mult, opts.solver);
            (void)sol;
        }
        oracle_times.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    tables.vmag_pred = pred.vmag;
    tables.vang_pred = pred.vang;
    for (int ci = 0; ci < cm.tree.size(); ++ci)
        if (ci != cm.tree.top)
            tables.head_pred[static_cast<std::size_t>(ci)] =
                pred.head_power[static_cast<std::size_t>(ci)];

    BenchmarkReport report = assemble_report(tables, cm.tree, f, timing, median_of(oracle_times));
    report.excluded_rows = rows - kept;

    // internal consistency: the stored t_ATS must re-derive from the stored
    // per-cluster times
    double recheck = critical_path_time(report.timing, cm.tree);
    if (recheck != report.timing.t_ats) throw Error("t_ATS consistency check failed");
    return report;
}

namespace {

std::string metric_or_none(const std::optional<MetricSet>& m, bool relative, double scale) {
    if (!m) return "None,None";
    if (relative) return fmt_sig9(m->mape) + "," + fmt_sig9(m->maxape);
    return fmt_sig9(m->mae * scale) + "," + fmt_sig9(m->maxae * scale);
}

}  // namespace

void emit_report(const BenchmarkReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);

    std::ostringstream metrics;
    metrics << "cluster,vmag_mae_pct,vmag_maxae_pct,vang_a_mae_deg,vang_a_maxae_deg,"
               "vang_b_mae_deg,vang_b_maxae_deg,vang_c_mae_deg,vang_c_maxae_deg,"
               "s_head_mape_pct,s_head_maxape_pct\n";
    for (const auto& c : r.clusters) {
        metrics << c.name << ',' << fmt_sig9(c.vmag.mae * 100.0) << ','
                << fmt_sig9(c.vmag.maxae * 100.0);
        for (int p = 0; p < 3; ++p)
            metrics << ',' << metric_or_none(c.vang[static_cast<std::size_t>(p)], false, 1.0);
        metrics << ',' << metric_or_none(c.head_s, true, 1.0) << '\n';
    }
    write_file(dir + "/metrics.csv", metrics.str());

    std::ostringstream timing;
    timing << "entry,seconds\n";
    for (std::size_t ci = 0; ci < r.timing.cluster_seconds.size(); ++ci)
        timing << "cluster_" << cluster_name(static_cast<int>(ci)) << ','
               << fmt_sig9(r.timing.cluster_seconds[ci]) << '\n';
    timing << "t_ats," << fmt_sig9(r.timing.t_ats) << '\n';
    timing << "oracle," << fmt_sig9(r.oracle_seconds) << '\n';
    timing << "speedup," << fmt_sig9(r.speedup) << '\n';
    timing << "test_rows," << r.test_rows << '\n';
    timing << "excluded_rows," << r.excluded_rows << '\n';
    write_file(dir + "/timing.csv", timing.str());

    for (const auto& series : r.scatter) {
        std::ostringstream sc;
        sc << "truth,predicted,bus,phase,sample\n";
        for (const auto& pt : series.points)
            sc << fmt_sig9(pt.truth) << ',' << fmt_sig9(pt.predicted) << ',' << pt.bus << ','
               << pt.phase << ',' << pt.sample << '\n';
        write_file(dir + "/scatter_" + series.cluster + "_" + series.quantity + ".csv", sc.str());
    }
}

}  // namespace gridcast
