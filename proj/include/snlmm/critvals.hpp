#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "snlmm/stats.hpp"

namespace snlmm {

/// Simulated null distribution of a statistic, obtained from Brownian
/// bridge functionals.
struct NullTable {
    StatKind kind = StatKind::SN;
    int qprime = 1;
    int grid_size = 1000;
    int replications = 0;
    std::uint64_t seed = 0;
    std::map<double, double> quantiles;   // alpha -> critical value
    std::vector<double> samples;          // sorted draws, optional
    std::vector<double> cutpoint_fracs;   // SN_ord only: cutpoints as t in (0,1)

    bool has_samples() const { return !samples.empty(); }
    double critical_value(double alpha) const;
};

/// One draw of q' independent standard Brownian bridges on the grid
/// {1/n_g, ..., 1}: cumulative sums of iid N(0, 1/n_g) increments minus
/// t times the total. The final row is exactly zero.
Eigen::MatrixXd simulate_bridge(int n_g, int qprime, std::mt19937_64& rng);

struct NullSimOptions {
    bool keep_samples = true;
    int threads = 1;
    std::vector<double> alphas = {0.10, 0.05, 0.01};
    std::vector<double> cutpoint_fracs;   // required for SN_ord
};

/// Simulates the null distribution of `kind` for q' parameters: R bridges
/// on an n_g grid, the statistic's functional applied to each (bridge
/// increments act as the ordered scores, identity information), empirical
/// quantiles stored for the requested alphas. Deterministic in
/// (kind, q', n_g, R, seed); replications use per-index RNG substreams so
/// the result does not depend on thread scheduling.
NullTable null_distribution(StatKind kind, int qprime, int n_g, int R, std::uint64_t seed,
                            const NullSimOptions& opts = {});

/// Right-tail p-value with continuity correction (r+1)/(R+1), r = number of
/// null draws >= value. Throws NumericError if the table carries no samples.
double p_value(const NullTable& table, double value);

/// JSON persistence for null tables.
std::string null_table_json(const NullTable& table);
NullTable null_table_from_json(const std::string& json_text);
void save_null_table(const NullTable& table, const std::string& path);
NullTable load_null_table(const std::string& path);

/// File-cache lookup keyed by (kind, q', n_g, R, seed, cutpoints): loads the
/// table if cached under `cache_dir`, otherwise simulates and stores it.
/// An empty cache_dir disables persistence.
NullTable cached_null_table(const std::string& cache_dir, StatKind kind, int qprime,
                            int n_g, int R, std::uint64_t seed,
                            const NullSimOptions& opts = {});

} // namespace snlmm
