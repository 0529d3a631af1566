#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace snlmm {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a batch run needs; assembled from flags, then overridden by
/// an optional JSON config file. Referenced input files are checked up
/// front.
struct RunConfig {
    std::string command;
    // data / columns
    std::string data_path;
    std::string scores_path;
    std::string cluster_col;
    std::string response_col;
    std::string aux_col;
    std::vector<std::string> fixed_cols;
    std::vector<std::string> random_cols;
    // testing
    std::vector<std::string> params;
    std::vector<std::string> stats = {"SN"};
    double alpha = 0.05;
    // reproducibility / resources
    std::uint64_t seed = 1;
    int jobs = 1;
    // outputs
    std::string out_path;
    std::string trace_prefix;
    std::string csv_out;
    // null-distribution simulation
    std::string null_cache;
    int grid = 1000;
    int reps = 10000;
    int qprime = 1;
    // power study
    std::string study_config;
    std::string truth_path;
    std::string checkpoint_dir;

    /// Applies a JSON config file on top of the current values (config
    /// wins over flags) and fail-fast checks that inputs exist.
    void apply_config_file(const std::string& path);
    void check_inputs() const;
};

/// Exit codes shared by all commands.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitNumeric = 2,
    kExitNonConvergence = 3,
};

int cmd_fit(const RunConfig& config);
int cmd_test(const RunConfig& config, bool trace_only = false);
int cmd_critvals(const RunConfig& config);
int cmd_power(const RunConfig& config);

/// Dispatches on config.command; returns an ExitCode.
int run_command(const RunConfig& config);

} // namespace snlmm
