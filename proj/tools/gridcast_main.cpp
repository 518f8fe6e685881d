// gridcast command line: pipeline | solve | sweep | partition | bench.
// Exit codes: 0 ok, 1 stage failure, 2 usage error.

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/pipeline.hpp"
#include "gridcast/text.hpp"

namespace {

using namespace gridcast;

struct CommonFlags {
    std::string config_path;
    std::string out_override;
    int workers = -1;
    long long seed_override = -1;
};

RunConfig make_config(const CommonFlags& flags) {
    RunConfig cfg = load_run_config(flags.config_path);
    if (!flags.out_override.empty()) cfg.out_dir = flags.out_override;
    if (flags.workers >= 0) {
        cfg.workers = flags.workers;
        cfg.synth.workers = flags.workers;
    }
    if (flags.seed_override >= 0)
        override_seeds(cfg, static_cast<std::uint64_t>(flags.seed_override));
    return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration document")->required();
    cmd->add_option("--out", flags.out_override, "override the output directory");
    cmd->add_option("--workers", flags.workers, "worker threads (0 = all cores)");
    cmd->add_option("--seed-override", flags.seed_override, "replace every configured seed");
}

int cmd_solve(const std::string& feeder_path, const std::string& multipliers_path) {
    Feeder f = load_feeder_file(feeder_path);
    auto violations = validate_feeder(f);
    if (!violations.empty()) {
        for (const auto& v : violations)
            std::cerr << "error: feeder: [" << v.code << "] " << v.message << "\n";
        return 1;
    }

    std::vector<double> multipliers;
    for (const auto& section : parse_sections(read_file(multipliers_path)))
        for (const auto& line : section.lines)
            for (const auto& tok : line.tokens) {
                auto v = parse_double(tok.value);
                if (!v) {
                    std::cerr << "error: multipliers: bad value '" << tok.value << "' at line "
                              << tok.line << "\n";
                    return 1;
                }
                multipliers.push_back(*v);
            }
    if (multipliers.size() != f.loads.size()) {
        std::cerr << "error: multipliers: expected " << f.loads.size() << " values, got "
                  << multipliers.size() << "\n";
        return 1;
    }

    PowerFlowSolution sol = solve_fixed_point(f, multipliers);
    if (!sol.converged) {
        std::cerr << "error: solver did not converge; final mismatch " << fmt_sig9(sol.final_mismatch)
                  << " pu after " << sol.iterations << " iterations\n";
        return 1;
    }

    NodeIndex idx = NodeIndex::build(f);
    std::cout << "bus,phase,vmag_pu,vang_deg\n";
    for (int r = 0; r < idx.size(); ++r) {
        const auto& [bus, phase] = idx.entries[static_cast<std::size_t>(r)];
        std::cout << f.buses[static_cast<std::size_t>(bus)].id << ',' << phase_letter(phase) << ','
                  << fmt_sig9(sol.vmag(r)) << ',' << fmt_sig9(sol.vang_deg(r)) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distribution power flow: fixed-point oracle and hierarchical ANN surrogate"};
    app.require_subcommand(1);

    CommonFlags pipeline_flags, sweep_flags, partition_flags, bench_flags;
    std::string feeder_path, multipliers_path;

    CLI::App* pipeline = app.add_subcommand("pipeline", "run the full pipeline from a config");
    add_common(pipeline, pipeline_flags);

    CLI::App* solve = app.add_subcommand("solve", "solve one load state with the oracle");
    solve->add_option("feeder", feeder_path, "feeder document")->required();
    solve->add_option("multipliers", multipliers_path, "one multiplier per load")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter grid search on one cluster");
    add_common(sweep, sweep_flags);

    CLI::App* partition = app.add_subcommand("partition", "partition the feeder and export the tree");
    add_common(partition, partition_flags);

    CLI::App* bench = app.add_subcommand("bench", "re-benchmark an existing bundle");
    add_common(bench, bench_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (pipeline->parsed()) {
            run_pipeline(make_config(pipeline_flags), std::cerr);
            return 0;
        }
        if (solve->parsed()) return cmd_solve(feeder_path, multipliers_path);
        if (sweep->parsed()) {
            run_sweep(make_config(sweep_flags), std::cerr);
            return 0;
        }
        if (partition->parsed()) {
            RunConfig cfg = make_config(partition_flags);
            run_partition_stage(cfg, std::cerr);
            std::cout << read_file(cfg.out_dir + "/partition.txt");
            return 0;
        }
        if (bench->parsed()) {
            run_bench_only(make_config(bench_flags), std::cerr);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
