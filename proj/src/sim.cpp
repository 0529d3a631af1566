#include "snlmm/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "snlmm/detail/parallel.hpp"
#include "snlmm/errors.hpp"
#include "snlmm/fit.hpp"
#include "snlmm/rng.hpp"
#include "snlmm/scores.hpp"

namespace snlmm {

namespace {
constexpr int kObsPerSubject = 10;
constexpr const char* kTruthVersion = "1";
} // namespace

ModelSpec sleepstudy_spec() { return ModelSpec::make({"Days"}, {"Days"}); }

ThetaVector default_truth() {
    // Published marginal ML estimates for the sleepstudy model
    // (intercept, Days slope, intercept variance, intercept-slope
    // covariance, slope variance, residual variance).
    ThetaVector t;
    t.values.resize(6);
    t.values << 251.405, 10.467, 565.48, 11.055, 32.68, 654.94;
    return t;
}

void save_truth_config(const ThetaVector& truth, const ModelSpec& spec, const std::string& path) {
    nlohmann::json j;
    j["version"] = kTruthVersion;
    j["provenance"] =
        "Marginal ML estimates for the sleepstudy model (reaction time on days of sleep "
        "deprivation, correlated random intercept and slope per subject). Regenerate with: "
        "snlmm fit --data sleepstudy.csv --cluster Subject --response Reaction --fixed Days "
        "--random Days --aux Days";
    nlohmann::json params;
    for (int k = 0; k < spec.q(); ++k) params[spec.names[k]] = truth.values(k);
    j["theta"] = params;
    j["order"] = spec.names;
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

ThetaVector load_truth_config(const std::string& path, const ModelSpec& spec) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    ThetaVector t;
    t.values.resize(spec.q());
    for (int k = 0; k < spec.q(); ++k) t.values(k) = j.at("theta").at(spec.names[k]).get<double>();
    t.validate(spec);
    return t;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

namespace {

// One cluster's template design: Days 0..9 in both X and Z.
void fill_design(Eigen::MatrixXd& X, Eigen::MatrixXd& Z) {
    X.resize(kObsPerSubject, 2);
    for (int i = 0; i < kObsPerSubject; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = double(i);
    }
    Z = X;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    return es.eigenvectors() *
           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace

double asymptotic_se(const ThetaVector& truth, int J, int param) {
    const ModelSpec spec = sleepstudy_spec();
    if (param < 0 || param >= spec.q()) throw std::invalid_argument("parameter index out of range");

    // balanced design: the information is J times one cluster's
    ClusterData one;
    one.p = 2;
    one.r = 2;
    one.n = kObsPerSubject;
    one.y.resize(1);
    one.X.resize(1);
    one.Z.resize(1);
    one.rows.resize(1);
    one.y[0] = Eigen::VectorXd::Zero(kObsPerSubject);
    fill_design(one.X[0], one.Z[0]);
    for (int i = 0; i < kObsPerSubject; ++i) one.rows[0].push_back(i);

    const Eigen::MatrixXd info = double(J) * expected_information(spec, truth, one);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError("expected information at the truth is not positive definite");
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(spec.q(), spec.q()));
    return std::sqrt(cov(param, param));
}

double change_magnitude(const SimCondition& cond, const ThetaVector& truth) {
    return cond.d * asymptotic_se(truth, cond.J, cond.changed_param);
}

LongDataset generate_dataset(const SimCondition& cond, const ThetaVector& truth,
                             std::mt19937_64& rng) {
    const ModelSpec spec = sleepstudy_spec();
    truth.validate(spec);
    if (cond.changed_param != 0 && cond.changed_param != 1)
        throw std::invalid_argument("changed parameter must be the intercept or the slope");

    const int J = cond.J;
    const double shift = (cond.d == 0.0) ? 0.0 : change_magnitude(cond, truth);

    std::normal_distribution<double> stdnorm(0.0, 1.0);
    Eigen::VectorXd aux(J);
    for (int j = 0; j < J; ++j) aux(j) = stdnorm(rng);

    std::vector<double> sorted(aux.data(), aux.data() + J);
    std::nth_element(sorted.begin(), sorted.begin() + J / 2, sorted.end());
    double median;
    if (J % 2 == 1) {
        median = sorted[J / 2];
    } else {
        const double upper = sorted[J / 2];
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + J / 2);
        median = 0.5 * (lower + upper);
    }

    const Eigen::VectorXd beta = truth.beta(spec);
    const Eigen::MatrixXd Groot = psd_sqrt(truth.G(spec));
    const double sigma_r = std::sqrt(truth.sigma_r2(spec));

    LongDataset data;
    const int n = J * kObsPerSubject;
    data.response.resize(n);
    data.fixed_covariates.resize(n, 2);
    data.random_covariates.resize(n, 2);
    data.auxiliary.resize(n);
    data.cluster.reserve(n);

    Eigen::MatrixXd X, Z;
    fill_design(X, Z);

    for (int j = 0; j < J; ++j) {
        data.cluster_labels.push_back("subj" + std::to_string(j + 1));
        Eigen::Vector2d z(stdnorm(rng), stdnorm(rng));
        const Eigen::Vector2d b = Groot * z;

        Eigen::Vector2d beta_j = beta;
        if (aux(j) < median) beta_j(cond.changed_param) += shift;

        for (int i = 0; i < kObsPerSubject; ++i) {
            const int row = j * kObsPerSubject + i;
            const double mean = (beta_j(0) + b(0)) + (beta_j(1) + b(1)) * X(i, 1);
            data.response(row) = mean + sigma_r * stdnorm(rng);
            data.fixed_covariates.row(row) = X.row(i);
            data.random_covariates.row(row) = Z.row(i);
            data.auxiliary(row) = aux(j);
            data.cluster.push_back(j);
        }
    }
    data.validate();
    return data;
}

// ---------------------------------------------------------------------------
// Power study
// ---------------------------------------------------------------------------

double PowerCell::mc_se() const {
    if (completed == 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / completed);
}

std::string SimCondition::key() const {
    char buf[64];
    std::string k = "J" + std::to_string(J);
    std::snprintf(buf, sizeof(buf), "_d%g", d);
    k += buf;
    k += "_cp" + std::to_string(changed_param) + "_t";
    for (size_t i = 0; i < tested_params.size(); ++i)
        k += (i ? "-" : "") + std::to_string(tested_params[i]);
    k += "_s";
    for (size_t i = 0; i < stats.size(); ++i) k += (i ? "-" : "") + to_string(stats[i]);
    std::snprintf(buf, sizeof(buf), "_R%d_seed%llu_a%g", replications,
                  static_cast<unsigned long long>(seed), alpha);
    return k + buf;
}

namespace {

std::uint64_t fnv_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct RepOutcome {
    bool failed = false;
    // reject[t * n_stats + s]
    std::vector<char> reject;
};

bool needs_traditional(const std::vector<StatKind>& stats) {
    for (StatKind s : stats)
        if (s == StatKind::CvM || s == StatKind::DM || s == StatKind::maxLM) return true;
    return false;
}

RepOutcome run_replication(const SimCondition& cond, const ThetaVector& truth,
                           const std::map<StatKind, NullTable>& tables, std::uint64_t cond_hash,
                           int rep) {
    const size_t n_cells = cond.tested_params.size() * cond.stats.size();
    RepOutcome out;
    out.reject.assign(n_cells, 0);

    auto rng = substream(cond.seed, cond_hash, static_cast<std::uint64_t>(rep));
    const LongDataset data = generate_dataset(cond, truth, rng);

    try {
        const FittedLmm fit = fit_ml(sleepstudy_spec(), data);
        if (!fit.converged) {
            out.failed = true;
            return out;
        }
        const ScoreMatrix S = casewise_scores(fit, data);

        CumProcess proc;
        if (needs_traditional(cond.stats)) proc = cumulative_process(S, fit.info);

        for (size_t t = 0; t < cond.tested_params.size(); ++t) {
            const std::vector<int> cols{cond.tested_params[t]};
            for (size_t s = 0; s < cond.stats.size(); ++s) {
                const StatKind kind = cond.stats[s];
                TestResult res;
                switch (kind) {
                    case StatKind::CvM: res = cvm_stat(proc, cols); break;
                    case StatKind::DM: res = dm_stat(proc, cols); break;
                    case StatKind::maxLM: res = maxlm_stat(proc, cols); break;
                    case StatKind::SN: res = sn_stat(S, cols); break;
                    default:
                        throw std::invalid_argument("power study supports CvM, DM, maxLM, SN");
                }
                const double crit = tables.at(kind).critical_value(cond.alpha);
                out.reject[t * cond.stats.size() + s] = res.value > crit ? 1 : 0;
            }
        }
    } catch (const SingularModelError&) {
        out.failed = true;
    } catch (const BoundaryParameterError&) {
        out.failed = true;
    } catch (const NumericError&) {
        out.failed = true;
    } catch (const RankDeficientError&) {
        out.failed = true;
    }
    return out;
}

} // namespace

PowerTable run_power_study(const std::vector<SimCondition>& conds, const ThetaVector& truth,
                           const std::map<StatKind, NullTable>& tables,
                           const PowerStudyOptions& opts) {
    // fail fast on missing tables
    std::set<StatKind> kinds;
    for (const auto& c : conds)
        for (StatKind s : c.stats) kinds.insert(s);
    for (StatKind s : kinds) {
        auto it = tables.find(s);
        if (it == tables.end())
            throw std::invalid_argument("no null table supplied for " + to_string(s));
        for (const auto& c : conds) it->second.critical_value(c.alpha);
    }

    PowerTable table;
    for (const auto& cond : conds) {
        ConditionResult result;
        if (!opts.checkpoint_dir.empty() &&
            load_condition_checkpoint(opts.checkpoint_dir, cond, result)) {
            table.conditions.push_back(std::move(result));
            if (opts.progress)
                std::fprintf(stderr, "[power] %s: restored from checkpoint\n", cond.key().c_str());
            continue;
        }

        const std::uint64_t cond_hash = fnv_hash(cond.key());
        std::vector<RepOutcome> reps(cond.replications);
        detail::parallel_for(cond.replications, opts.threads, [&](int rep) {
            reps[rep] = run_replication(cond, truth, tables, cond_hash, rep);
        });

        result.cond = cond;
        result.replications_run = cond.replications;
        result.cells.assign(cond.tested_params.size(),
                            std::vector<PowerCell>(cond.stats.size()));
        for (const auto& rep : reps) {
            if (rep.failed) {
                ++result.failures;
                continue;
            }
            for (size_t t = 0; t < cond.tested_params.size(); ++t)
                for (size_t s = 0; s < cond.stats.size(); ++s) {
                    auto& cell = result.cells[t][s];
                    ++cell.completed;
                    cell.rejections += rep.reject[t * cond.stats.size() + s];
                }
        }

        if (result.failures > 0.02 * cond.replications)
            throw NumericError("condition " + cond.key() + " had " +
                               std::to_string(result.failures) + " fit failures out of " +
                               std::to_string(cond.replications) + " (> 2%)");

        if (!opts.checkpoint_dir.empty())
            save_condition_checkpoint(opts.checkpoint_dir, result);
        if (opts.progress) {
            std::fprintf(stderr, "[power] %s: done (%d failures)\n", cond.key().c_str(),
                         result.failures);
        }
        table.conditions.push_back(std::move(result));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Export and checkpoints
// ---------------------------------------------------------------------------

void write_power_csv(const PowerTable& table, const ModelSpec& spec, const std::string& path) {
    std::set<double> ds;
    for (const auto& c : table.conditions) ds.insert(c.cond.d);

    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out << "changed_param,statistic,tested_param,n";
    for (double d : ds) out << ",d=" << d;
    out << "\n";

    // rows: (changed, statistic, tested, J); columns: d
    std::map<std::tuple<int, std::string, int, int>, std::map<double, double>> rows;
    for (const auto& c : table.conditions) {
        for (size_t t = 0; t < c.cond.tested_params.size(); ++t)
            for (size_t s = 0; s < c.cond.stats.size(); ++s)
                rows[{c.cond.changed_param, to_string(c.cond.stats[s]),
                      c.cond.tested_params[t], c.cond.J}][c.cond.d] = c.cells[t][s].rate();
    }
    out.precision(10);
    for (const auto& [key, vals] : rows) {
        const auto& [changed, stat, tested, J] = key;
        out << spec.names[changed] << "," << stat << "," << spec.names[tested] << ","
            << J * kObsPerSubject;
        for (double d : ds) {
            out << ",";
            auto it = vals.find(d);
            if (it != vals.end()) out << it->second;
        }
        out << "\n";
    }
}

namespace {

nlohmann::json condition_json(const ConditionResult& r, const ModelSpec& spec) {
    nlohmann::json jc;
    jc["key"] = r.cond.key();
    jc["J"] = r.cond.J;
    jc["n"] = r.cond.J * kObsPerSubject;
    jc["d"] = r.cond.d;
    jc["changed_param"] = spec.names[r.cond.changed_param];
    jc["alpha"] = r.cond.alpha;
    jc["seed"] = r.cond.seed;
    jc["replications"] = r.replications_run;
    jc["failures"] = r.failures;
    nlohmann::json cells = nlohmann::json::array();
    for (size_t t = 0; t < r.cond.tested_params.size(); ++t) {
        for (size_t s = 0; s < r.cond.stats.size(); ++s) {
            const auto& cell = r.cells[t][s];
            nlohmann::json je;
            je["tested_param"] = spec.names[r.cond.tested_params[t]];
            je["statistic"] = to_string(r.cond.stats[s]);
            je["rejections"] = cell.rejections;
            je["completed"] = cell.completed;
            je["rate"] = cell.rate();
            je["mc_se"] = cell.mc_se();
            cells.push_back(je);
        }
    }
    jc["cells"] = cells;
    return jc;
}

} // namespace

std::string power_table_json(const PowerTable& table, const ModelSpec& spec) {
    nlohmann::json j;
    j["conditions"] = nlohmann::json::array();
    for (const auto& c : table.conditions) j["conditions"].push_back(condition_json(c, spec));
    return j.dump(2);
}

bool load_condition_checkpoint(const std::string& dir, const SimCondition& cond,
                               ConditionResult& out) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(dir) / (cond.key() + ".json");
    if (!fs::exists(path)) return false;
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("key").get<std::string>() != cond.key()) return false;
        out.cond = cond;
        out.failures = j.at("failures").get<int>();
        out.replications_run = j.at("replications").get<int>();
        out.cells.assign(cond.tested_params.size(), std::vector<PowerCell>(cond.stats.size()));
        const auto& cells = j.at("cells");
        size_t idx = 0;
        for (size_t t = 0; t < cond.tested_params.size(); ++t)
            for (size_t s = 0; s < cond.stats.size(); ++s, ++idx) {
                out.cells[t][s].rejections = cells.at(idx).at("rejections").get<int>();
                out.cells[t][s].completed = cells.at(idx).at("completed").get<int>();
            }
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void save_condition_checkpoint(const std::string& dir, const ConditionResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir));
    const fs::path path = fs::path(dir) / (result.cond.key() + ".json");
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write checkpoint '" + path.string() + "'");
    out << condition_json(result, sleepstudy_spec()).dump(2) << "\n";
}

} // namespace snlmm
