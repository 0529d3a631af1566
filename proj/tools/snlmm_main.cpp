#include <CLI11.hpp>
#include <iostream>

#include "snlmm/cli.hpp"
#include "snlmm/errors.hpp"

// Command-line front end: fit, test, trace, critvals, power.
// Exit codes: 0 ok, 1 usage error, 2 numerical failure, 3 non-convergence.

int main(int argc, char** argv) {
    CLI::App app{"Score-based parameter-instability tests for two-level linear mixed models, "
                 "with self-normalization for cluster-dependent scores"};
    app.require_subcommand(1);

    snlmm::RunConfig config;
    std::string config_file;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON config file; its entries override flags");
        sub->add_option("--seed", config.seed, "RNG seed");
        sub->add_option("--jobs", config.jobs, "worker threads");
        sub->add_option("--out", config.out_path, "output JSON path (default: stdout)");
        sub->add_option("--alpha", config.alpha, "test level");
        sub->add_option("--null-cache", config.null_cache, "null-table cache directory");
    };
    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--data", config.data_path, "input CSV (header row required)");
        sub->add_option("--cluster", config.cluster_col, "cluster id column");
        sub->add_option("--response", config.response_col, "response column");
        sub->add_option("--fixed", config.fixed_cols,
                        "fixed-effect covariate columns (intercept implied)")
            ->delimiter(',');
        sub->add_option("--random", config.random_cols,
                        "random-effect covariate columns (intercept implied)")
            ->delimiter(',');
        sub->add_option("--aux", config.aux_col, "auxiliary ordering column");
    };

    auto* fit = app.add_subcommand("fit", "fit the mixed model by marginal ML");
    add_common(fit);
    add_data(fit);

    for (const char* name : {"test", "trace"}) {
        auto* sub = app.add_subcommand(
            name, std::string(name) == "test" ? "run fluctuation tests against the auxiliary order"
                                              : "emit per-k trace CSVs only");
        add_common(sub);
        add_data(sub);
        sub->add_option("--scores", config.scores_path, "externally produced score CSV");
        sub->add_option("--params", config.params, "parameters to test (default: all)")
            ->delimiter(',');
        sub->add_option("--stats", config.stats, "statistics: SN, SN_ord, CvM, DM, maxLM")
            ->delimiter(',');
        sub->add_option("--trace-out", config.trace_prefix, "prefix for per-k trace CSVs");
        sub->add_option("--grid", config.grid, "bridge grid size for null tables");
        sub->add_option("--reps", config.reps, "null-table replications");
    }

    auto* critvals = app.add_subcommand("critvals", "pre-generate null tables");
    add_common(critvals);
    critvals->add_option("--stats", config.stats, "statistics to simulate")->delimiter(',');
    critvals->add_option("--grid", config.grid, "bridge grid size");
    critvals->add_option("--reps", config.reps, "replications");
    critvals->add_option("--qprime", config.qprime, "tested dimension");

    auto* power = app.add_subcommand("power", "run a Monte Carlo power study");
    add_common(power);
    power->add_option("--study", config.study_config, "study design JSON");
    power->add_option("--truth", config.truth_path, "truth config JSON (default: built-in)");
    power->add_option("--checkpoints", config.checkpoint_dir, "per-condition checkpoint dir");
    power->add_option("--csv-out", config.csv_out, "power table CSV path");
    power->add_option("--grid", config.grid, "bridge grid size for null tables");
    power->add_option("--reps", config.reps, "null-table replications");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? snlmm::kExitOk : snlmm::kExitUsage;
    }

    config.command = app.get_subcommands().front()->get_name();
    try {
        if (!config_file.empty()) config.apply_config_file(config_file);
        return snlmm::run_command(config);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return snlmm::kExitUsage;
    } catch (const snlmm::BoundaryParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return snlmm::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return snlmm::kExitNumeric;
    }
}
