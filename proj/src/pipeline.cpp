#include "gridcast/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "gridcast/community.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/hash.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

namespace {

namespace fs = std::filesystem;

double want_double(const TextLine& line) {
    auto v = parse_double(line.tokens[1].value);
    if (!v) throw ParseError("expected a number for " + line.tokens[0].value, line.line, 1);
    return *v;
}

int want_int(const TextLine& line) { return static_cast<int>(want_double(line)); }

std::uint64_t want_seed(const TextLine& line) {
    try {
        return std::stoull(line.tokens[1].value);
    } catch (const std::exception&) {
        throw ParseError("expected a seed for " + line.tokens[0].value, line.line, 1);
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
    RunConfig cfg;
    auto resolve = [&](const std::string& path) {
        if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
        return base_dir + "/" + path;
    };

    for (const auto& section : parse_sections(text)) {
        for (const auto& line : section.lines) {
            if (line.tokens.size() < 2)
                throw ParseError("config line needs: key value(s)", line.line, 1);
            const std::string& key = line.tokens[0].value;
            const std::string& val = line.tokens[1].value;

            if (section.name == "run") {
                if (key == "feeder") cfg.feeder_path = resolve(val);
                else if (key == "out") cfg.out_dir = resolve(val);
                else if (key == "workers") cfg.workers = want_int(line);
                else throw ParseError("unknown [run] key " + key, line.line, 1);
            } else if (section.name == "partition") {
                if (key == "seed") {
                    cfg.partition_seed = want_seed(line);
                    cfg.granularity.seed = cfg.partition_seed;
                } else if (key == "restarts") cfg.restarts = want_int(line);
                else if (key == "max_levels") cfg.max_levels = want_int(line);
                else if (key == "min_size") cfg.granularity.min_size = want_int(line);
                else if (key == "max_size") cfg.granularity.max_size = want_int(line);
                else throw ParseError("unknown [partition] key " + key, line.line, 1);
            } else if (section.name == "synth") {
                if (key == "n_samples") cfg.synth.n_samples = want_int(line);
                else if (key == "shape_seed") cfg.synth.shape_seed = want_seed(line);
                else if (key == "split_seed") cfg.synth.split_seed = want_seed(line);
                else if (key == "jitter_sigma") cfg.synth.companding.jitter_sigma = want_double(line);
                else if (key == "mu_min") cfg.synth.companding.mu_min = want_double(line);
                else if (key == "mu_max") cfg.synth.companding.mu_max = want_double(line);
                else if (key == "mu_values") {
                    for (std::size_t k = 1; k < line.tokens.size(); ++k) {
                        auto mu = parse_double(line.tokens[k].value);
                        if (!mu) throw ParseError("bad mu value", line.line, 1);
                        cfg.synth.companding.mu_values.push_back(*mu);
                    }
                } else if (key == "tolerance") cfg.synth.solver.tolerance = want_double(line);
                else if (key == "max_iterations") cfg.synth.solver.max_iterations = want_int(line);
                else if (key == "median_window") cfg.synth.median_window = want_int(line);
                else throw ParseError("unknown [synth] key " + key, line.line, 1);
            } else if (section.name == "train") {
                if (key == "hidden") {
                    cfg.train.hidden_neurons = val == "auto" ? 0 : want_int(line);
                } else if (key == "hidden_layers") cfg.train.hidden_layers = want_int(line);
                else if (key == "activation_hidden") {
                    auto a = parse_activation(val);
                    if (!a) throw ParseError("unknown activation " + val, line.line, 1);
                    cfg.train.activation_hidden = *a;
                } else if (key == "activation_output") {
                    auto a = parse_activation(val);
                    if (!a) throw ParseError("unknown activation " + val, line.line, 1);
                    cfg.train.activation_output = *a;
                } else if (key == "optimizer") {
                    auto o = parse_optimizer(val);
                    if (!o) throw ParseError("unknown optimizer " + val, line.line, 1);
                    cfg.train.optimizer = *o;
                } else if (key == "learning_rate") cfg.train.learning_rate = want_double(line);
                else if (key == "batch_size") cfg.train.batch_size = want_int(line);
                else if (key == "epochs") cfg.train.epochs = want_int(line);
                else if (key == "seed") cfg.train.seed = want_seed(line);
                else throw ParseError("unknown [train] key " + key, line.line, 1);
            } else if (section.name == "bench") {
                if (key == "timing_reps") cfg.timing_reps = want_int(line);
                else throw ParseError("unknown [bench] key " + key, line.line, 1);
            } else if (section.name == "grid") {
                cfg.has_grid = true;
                auto each = [&](auto push) {
                    for (std::size_t k = 1; k < line.tokens.size(); ++k) push(line.tokens[k].value);
                };
                if (key == "cluster") cfg.sweep_cluster = val;
                else if (key == "seed") cfg.grid.seed = want_seed(line);
                else if (key == "learning_rate") cfg.grid.learning_rate = want_double(line);
                else if (key == "hidden_multipliers") {
                    cfg.grid.hidden_multipliers.clear();
                    each([&](const std::string& s) {
                        auto v = parse_double(s);
                        if (!v) throw ParseError("bad multiplier " + s, line.line, 1);
                        cfg.grid.hidden_multipliers.push_back(*v);
                    });
                } else if (key == "hidden_layers") {
                    cfg.grid.hidden_layers.clear();
                    each([&](const std::string& s) { cfg.grid.hidden_layers.push_back(std::stoi(s)); });
                } else if (key == "batch_sizes") {
                    cfg.grid.batch_sizes.clear();
                    each([&](const std::string& s) { cfg.grid.batch_sizes.push_back(std::stoi(s)); });
                } else if (key == "epochs") {
                    cfg.grid.epochs.clear();
                    each([&](const std::string& s) { cfg.grid.epochs.push_back(std::stoi(s)); });
                } else if (key == "optimizers") {
                    cfg.grid.optimizers.clear();
                    each([&](const std::string& s) {
                        auto o = parse_optimizer(s);
                        if (!o) throw ParseError("unknown optimizer " + s, line.line, 1);
                        cfg.grid.optimizers.push_back(*o);
                    });
                } else if (key == "hidden_activations") {
                    cfg.grid.hidden_activations.clear();
                    each([&](const std::string& s) {
                        auto a = parse_activation(s);
                        if (!a) throw ParseError("unknown activation " + s, line.line, 1);
                        cfg.grid.hidden_activations.push_back(*a);
                    });
                } else if (key == "output_activations") {
                    cfg.grid.output_activations.clear();
                    each([&](const std::string& s) {
                        auto a = parse_activation(s);
                        if (!a) throw ParseError("unknown activation " + s, line.line, 1);
                        cfg.grid.output_activations.push_back(*a);
                    });
                } else throw ParseError("unknown [grid] key " + key, line.line, 1);
            } else if (section.name.empty()) {
                throw ParseError("content before first section", line.line, 1);
            } else {
                throw ParseError("unknown section [" + section.name + "]", section.line, 1);
            }
        }
    }
    if (cfg.feeder_path.empty()) throw Error("config must set [run] feeder");
    cfg.synth.workers = cfg.workers;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::string text = read_file(path);
    fs::path base = fs::path(path).parent_path();
    return parse_run_config(text, base.string());
}

void override_seeds(RunConfig& cfg, std::uint64_t seed) {
    cfg.partition_seed = mix_seed(seed, 1);
    cfg.granularity.seed = cfg.partition_seed;
    cfg.synth.shape_seed = mix_seed(seed, 2);
    cfg.synth.split_seed = mix_seed(seed, 3);
    cfg.synth.companding.seed = mix_seed(seed, 4);
    cfg.train.seed = mix_seed(seed, 5);
    cfg.grid.seed = mix_seed(seed, 6);
}

namespace {

std::string partition_settings_digest(const RunConfig& cfg) {
    std::ostringstream s;
    s << cfg.partition_seed << '|' << cfg.restarts << '|' << cfg.max_levels << '|'
      << cfg.granularity.min_size << '|' << cfg.granularity.max_size << '|'
      << cfg.granularity.recursive_split;
    return s.str();
}

std::string synth_settings_digest(const RunConfig& cfg) {
    std::ostringstream s;
    const auto& sy = cfg.synth;
    s << sy.n_samples << '|' << sy.shape_seed << '|' << sy.split_seed << '|'
      << fmt_full(sy.companding.jitter_sigma) << '|' << fmt_full(sy.companding.mu_min) << '|'
      << fmt_full(sy.companding.mu_max) << '|' << sy.median_window << '|'
      << fmt_full(sy.solver.tolerance) << '|' << sy.solver.max_iterations;
    for (double mu : sy.companding.mu_values) s << '|' << fmt_full(mu);
    return s.str();
}

std::string train_settings_digest(const RunConfig& cfg) {
    std::ostringstream s;
    const auto& t = cfg.train;
    s << t.hidden_neurons << '|' << t.hidden_layers << '|' << activation_name(t.activation_hidden)
      << '|' << activation_name(t.activation_output) << '|' << optimizer_name(t.optimizer) << '|'
      << fmt_full(t.learning_rate) << '|' << t.batch_size << '|' << t.epochs << '|' << t.seed;
    return s.str();
}

bool cache_matches(const std::string& path, const std::string& digest) {
    if (!fs::exists(path)) return false;
    return read_file(path) == digest;
}

// Reconstructs the per-sample multiplier matrix for the benchmark without
// re-solving: shapes and splits are pure functions of the seeds.
void rebuild_test_inputs(const Feeder& f, const RunConfig& cfg, const std::vector<int>& retained,
                         Eigen::MatrixXd& test_multipliers, std::vector<int>& sample_ids) {
    auto shapes = build_shape_table(f, cfg.synth.n_samples, cfg.synth);
    const int n = static_cast<int>(retained.size());
    if (n < 2) throw Error("dataset manifest lists fewer than two retained rows");
    std::vector<int> train_rows, test_rows;
    split_rows_80_20(n, cfg.synth.split_seed, train_rows, test_rows);
    test_multipliers.resize(static_cast<int>(test_rows.size()), static_cast<int>(f.loads.size()));
    sample_ids.clear();
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
        int t = retained[static_cast<std::size_t>(test_rows[i])];
        sample_ids.push_back(t);
        for (std::size_t l = 0; l < f.loads.size(); ++l) {
            const auto& mult = shapes.at(f.loads[l].shape_id).multipliers;
            test_multipliers(static_cast<int>(i), static_cast<int>(l)) =
                mult[static_cast<std::size_t>(t) % mult.size()];
        }
    }
}

std::vector<int> read_retained_rows(const std::string& manifest_path) {
    std::vector<int> retained;
    for (const auto& section : parse_sections(read_file(manifest_path))) {
        if (section.name != "retained") continue;
        for (const auto& line : section.lines)
            for (const auto& tok : line.tokens) retained.push_back(std::stoi(tok.value));
    }
    return retained;
}

}  // namespace

ClusterTree run_partition_stage(const RunConfig& cfg, std::ostream& log) {
    Feeder f = load_feeder_file(cfg.feeder_path);
    auto violations = validate_feeder(f);
    if (!violations.empty()) {
        std::string msg = "feeder validation failed:";
        for (const auto& v : violations) msg += "\n  [" + v.code + "] " + v.message;
        throw Error(msg);
    }

    fs::create_directories(cfg.out_dir);
    std::string digest = hash_hex(fnv1a64(serialize_feeder(f) + "\n" + partition_settings_digest(cfg)));
    std::string cache_path = cfg.out_dir + "/cache_partition.txt";
    std::string export_path = cfg.out_dir + "/partition.txt";

    if (cache_matches(cache_path, digest) && fs::exists(export_path)) {
        log << "[cache] partition stage skipped (hash match)\n";
        return parse_cluster_tree(read_file(export_path), f);
    }

    FlowGraph g = FlowGraph::from_feeder(f);
    DetectOptions opts;
    opts.seed = cfg.partition_seed;
    opts.restarts = cfg.restarts;
    opts.max_levels = cfg.max_levels;
    Partition part = detect_communities(g, opts);
    ClusterTree tree = legalize_to_cluster_tree(f, part, cfg.granularity);

    std::string why = tree.check_invariants(f);
    if (!why.empty()) throw Error("legalization produced an invalid tree: " + why);

    write_file(export_path, serialize_cluster_tree(tree, f));
    write_file(cache_path, digest);
    log << "[partition] " << tree.size() << " clusters over " << tree.depth() << " layers\n";
    return tree;
}

PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log) {
    PipelineResult result;
    Feeder f = load_feeder_file(cfg.feeder_path);
    result.tree = run_partition_stage(cfg, log);
    const ClusterTree& tree = result.tree;

    std::string partition_text = read_file(cfg.out_dir + "/partition.txt");
    std::string data_digest = hash_hex(
        fnv1a64(serialize_feeder(f) + "\n" + partition_text + "\n" + synth_settings_digest(cfg)));
    std::string train_digest = hash_hex(fnv1a64(data_digest + "\n" + train_settings_digest(cfg)));

    std::string dataset_dir = cfg.out_dir + "/datasets";
    std::string bundle_dir = cfg.out_dir + "/bundle";
    std::string manifest_path = dataset_dir + "/manifest.txt";
    bool data_cached = cache_matches(cfg.out_dir + "/cache_datasets.txt", data_digest) &&
                       fs::exists(manifest_path);
    bool train_cached = cache_matches(cfg.out_dir + "/cache_train.txt", train_digest) &&
                        fs::exists(bundle_dir + "/manifest.txt");

    Eigen::MatrixXd test_multipliers;
    std::vector<int> sample_ids;

    if (data_cached && train_cached) {
        log << "[cache] dataset stage skipped (hash match)\n";
        log << "[cache] training stage skipped (hash match)\n";
        result.dataset_stage_skipped = true;
        result.train_stage_skipped = true;
        result.model = load_bundle(bundle_dir, f);
        rebuild_test_inputs(f, cfg, read_retained_rows(manifest_path), test_multipliers, sample_ids);
    } else {
        auto shapes = build_shape_table(f, cfg.synth.n_samples, cfg.synth);
        log << "[synth] solving " << cfg.synth.n_samples << " samples over " << f.loads.size()
            << " loads\n";
        SampleBank bank = generate_samples(f, shapes, cfg.synth);
        log << "[synth] retained " << bank.retained.size() << " converged samples\n";

        auto layouts = allocate_io(tree, f);
        std::vector<ClusterDataset> datasets;
        datasets.reserve(static_cast<std::size_t>(tree.size()));
        for (int ci = 0; ci < tree.size(); ++ci)
            datasets.push_back(assemble_cluster_dataset(bank, f, tree, ci,
                                                        layouts[static_cast<std::size_t>(ci)],
                                                        cfg.synth));

        fs::create_directories(dataset_dir);
        for (int ci = 0; ci < tree.size(); ++ci) {
            write_dataset_csv(datasets[static_cast<std::size_t>(ci)], dataset_dir, cluster_name(ci), true);
            write_dataset_csv(datasets[static_cast<std::size_t>(ci)], dataset_dir, cluster_name(ci), false);
        }
        std::ostringstream manifest;
        manifest << synth_manifest(f, tree, bank, cfg.synth);
        manifest << "\n[retained]\n";
        for (std::size_t i = 0; i < bank.retained.size(); ++i)
            manifest << bank.retained[i] << ((i + 1) % 32 == 0 ? "\n" : " ");
        manifest << "\n";
        write_file(manifest_path, manifest.str());
        write_file(cfg.out_dir + "/cache_datasets.txt", data_digest);

        if (train_cached) {
            log << "[cache] training stage skipped (hash match)\n";
            result.train_stage_skipped = true;
            result.model = load_bundle(bundle_dir, f);
        } else {
            log << "[train] training " << tree.size() << " cluster models\n";
            std::vector<TrainReport> reports;
            result.model = train_tree(tree, f, datasets, cfg.train, cfg.workers, &reports);
            for (int ci = 0; ci < tree.size(); ++ci) {
                const TrainReport& tr = reports[static_cast<std::size_t>(ci)];
                log << "[train] cluster " << cluster_name(ci) << ": val MAE " << fmt_sig9(tr.val_mae)
                    << " (" << fmt_sig9(tr.train_seconds) << " s)\n";
            }
            save_bundle(result.model, f, bundle_dir);
            write_file(cfg.out_dir + "/cache_train.txt", train_digest);
        }

        // test rows are shared across clusters (same split seed)
        const ClusterDataset& ds0 = datasets.front();
        test_multipliers.resize(static_cast<int>(ds0.test_rows.size()),
                                static_cast<int>(f.loads.size()));
        for (std::size_t i = 0; i < ds0.test_rows.size(); ++i) {
            int t = bank.retained[static_cast<std::size_t>(ds0.test_rows[i])];
            sample_ids.push_back(t);
            for (std::size_t l = 0; l < f.loads.size(); ++l)
                test_multipliers(static_cast<int>(i), static_cast<int>(l)) =
                    bank.multipliers(t, static_cast<int>(l));
        }
    }

    log << "[bench] " << test_multipliers.rows() << " test rows, " << cfg.timing_reps
        << " timing repetitions\n";
    BenchOptions bopts;
    bopts.timing_reps = cfg.timing_reps;
    bopts.workers = cfg.workers;
    bopts.solver = cfg.synth.solver;
    result.report = run_benchmark(result.model, f, test_multipliers, sample_ids, bopts);
    emit_report(result.report, cfg.out_dir + "/report");
    log << "[bench] t_ATS " << fmt_sig9(result.report.timing.t_ats) << " s, oracle "
        << fmt_sig9(result.report.oracle_seconds) << " s, speedup "
        << fmt_sig9(result.report.speedup) << "x\n";
    return result;
}

std::vector<GridResult> run_sweep(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.has_grid) throw Error("config has no [grid] section");
    Feeder f = load_feeder_file(cfg.feeder_path);
    ClusterTree tree = run_partition_stage(cfg, log);

    int cluster_id = -1;
    for (int ci = 0; ci < tree.size(); ++ci)
        if (cluster_name(ci) == cfg.sweep_cluster) cluster_id = ci;
    if (cluster_id < 0) throw Error("sweep cluster " + cfg.sweep_cluster + " not in the tree");

    auto shapes = build_shape_table(f, cfg.synth.n_samples, cfg.synth);
    log << "[synth] solving " << cfg.synth.n_samples << " samples\n";
    SampleBank bank = generate_samples(f, shapes, cfg.synth);
    auto layouts = allocate_io(tree, f);
    ClusterDataset ds = assemble_cluster_dataset(bank, f, tree, cluster_id,
                                                 layouts[static_cast<std::size_t>(cluster_id)],
                                                 cfg.synth);

    log << "[sweep] cluster " << cfg.sweep_cluster << ": " << ds.inputs.cols() << " inputs, "
        << ds.outputs.cols() << " outputs\n";
    auto results = grid_search(ds, cfg.grid, cfg.workers);
    fs::create_directories(cfg.out_dir);
    write_file(cfg.out_dir + "/sweep_ranking.csv", grid_results_csv(results));
    log << "[sweep] " << results.size() << " configurations ranked; best val MAE "
        << fmt_sig9(results.front().val_mae) << "\n";
    return results;
}

BenchmarkReport run_bench_only(const RunConfig& cfg, std::ostream& log) {
    Feeder f = load_feeder_file(cfg.feeder_path);
    std::string bundle_dir = cfg.out_dir + "/bundle";
    std::string manifest_path = cfg.out_dir + "/datasets/manifest.txt";
    if (!fs::exists(bundle_dir + "/manifest.txt"))
        throw Error("no bundle under " + bundle_dir + "; run the pipeline first");
    if (!fs::exists(manifest_path))
        throw Error("no dataset manifest under " + cfg.out_dir + "; run the pipeline first");

    CascadeModel cm = load_bundle(bundle_dir, f);
    Eigen::MatrixXd test_multipliers;
    std::vector<int> sample_ids;
    rebuild_test_inputs(f, cfg, read_retained_rows(manifest_path), test_multipliers, sample_ids);

    BenchOptions bopts;
    bopts.timing_reps = cfg.timing_reps;
    bopts.workers = cfg.workers;
    bopts.solver = cfg.synth.solver;
    BenchmarkReport report = run_benchmark(cm, f, test_multipliers, sample_ids, bopts);
    emit_report(report, cfg.out_dir + "/report");
    log << "[bench] speedup " << fmt_sig9(report.speedup) << "x\n";
    return report;
}

}  // namespace gridcast
