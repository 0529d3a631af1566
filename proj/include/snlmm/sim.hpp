#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "snlmm/critvals.hpp"
#include "snlmm/model.hpp"

namespace snlmm {

/// The sleepstudy-style model shape used throughout the simulation study:
/// intercept + slope fixed effects, correlated intercept + slope random
/// effects, 10 observations per subject at Days 0..9.
ModelSpec sleepstudy_spec();

/// Frozen data-generating parameters: the published marginal ML estimates
/// for the sleepstudy model (see config/default_truth.json for provenance).
ThetaVector default_truth();

/// Truth-config (JSON) round trip. Values survive bit-exactly.
void save_truth_config(const ThetaVector& truth, const ModelSpec& spec, const std::string& path);
ThetaVector load_truth_config(const std::string& path, const ModelSpec& spec);

/// One cell of the simulation design.
struct SimCondition {
    int J = 24;                     // subjects; n = 10 J observations
    double d = 0.0;                 // change magnitude in ase units
    int changed_param = 0;          // canonical index (0 = intercept, 1 = slope)
    std::vector<int> tested_params; // canonical indices to test
    std::vector<StatKind> stats = {StatKind::SN};
    int replications = 500;
    std::uint64_t seed = 1;
    double alpha = 0.05;

    std::string key() const;       // stable identifier for checkpoints
};

struct PowerCell {
    int rejections = 0;
    int completed = 0;

    double rate() const { return completed > 0 ? double(rejections) / completed : 0.0; }
    double mc_se() const;
};

struct ConditionResult {
    SimCondition cond;
    // cells[t][s]: tested_params[t] x stats[s]
    std::vector<std::vector<PowerCell>> cells;
    int failures = 0;
    int replications_run = 0;
};

struct PowerTable {
    std::vector<ConditionResult> conditions;
};

/// Asymptotic standard error of one canonical parameter at (J, truth) under
/// the no-change model: sqrt of the corresponding diagonal entry of the
/// inverse expected information for the balanced Days 0..9 design.
double asymptotic_se(const ThetaVector& truth, int J, int param);

/// The additive shift applied to the changed parameter for subjects below
/// the auxiliary median: d * ase(changed_param).
double change_magnitude(const SimCondition& cond, const ThetaVector& truth);

/// Draws one dataset: J subjects x 10 observations, Days 0..9, random
/// effects from N(0, G), residuals N(0, s2), auxiliary ("cognitive
/// ability") iid standard normal per subject. Subjects below the median
/// auxiliary value get the changed parameter shifted by
/// d * ase(changed_param).
LongDataset generate_dataset(const SimCondition& cond, const ThetaVector& truth,
                             std::mt19937_64& rng);

/// Runs the power study: per replication generate -> fit the no-change
/// model -> score -> test each requested parameter with each statistic at
/// cond.alpha -> tally. Null tables must cover every requested
/// (kind, q'=1) at the chosen alpha. Fit failures are excluded and
/// reported; above 2% in a condition the run fails (NumericError).
///
/// Deterministic in (conds, truth, seeds) for any parallelism degree.
struct PowerStudyOptions {
    int threads = 1;
    std::string checkpoint_dir;  // per-condition resume files, "" = off
    bool progress = false;
};
PowerTable run_power_study(const std::vector<SimCondition>& conds, const ThetaVector& truth,
                           const std::map<StatKind, NullTable>& tables,
                           const PowerStudyOptions& opts = {});

/// CSV layout: rows are (changed parameter block) x tested parameter x
/// sample size, columns the d grid. JSON carries rates plus Monte Carlo
/// standard errors and exclusion counts.
void write_power_csv(const PowerTable& table, const ModelSpec& spec, const std::string& path);
std::string power_table_json(const PowerTable& table, const ModelSpec& spec);

/// Checkpoint helpers (JSON per condition, keyed by SimCondition::key).
bool load_condition_checkpoint(const std::string& dir, const SimCondition& cond,
                               ConditionResult& out);
void save_condition_checkpoint(const std::string& dir, const ConditionResult& result);

} // namespace snlmm
