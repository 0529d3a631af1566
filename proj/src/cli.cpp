#include "snlmm/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "snlmm/critvals.hpp"
#include "snlmm/errors.hpp"
#include "snlmm/fit.hpp"
#include "snlmm/scores.hpp"
#include "snlmm/sim.hpp"

namespace snlmm {

namespace {

using nlohmann::json;

void maybe_set(const json& j, const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}
void maybe_set(const json& j, const char* key, std::vector<std::string>& out) {
    if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
}
template <class T>
void maybe_set_num(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json config_echo(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    if (!c.data_path.empty()) j["data"] = c.data_path;
    if (!c.scores_path.empty()) j["scores"] = c.scores_path;
    if (!c.cluster_col.empty()) j["cluster"] = c.cluster_col;
    if (!c.response_col.empty()) j["response"] = c.response_col;
    if (!c.aux_col.empty()) j["aux"] = c.aux_col;
    j["fixed"] = c.fixed_cols;
    j["random"] = c.random_cols;
    if (!c.params.empty()) j["params"] = c.params;
    j["stats"] = c.stats;
    j["alpha"] = c.alpha;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    if (!c.null_cache.empty()) j["null_cache"] = c.null_cache;
    j["grid"] = c.grid;
    j["reps"] = c.reps;
    if (!c.study_config.empty()) j["study"] = c.study_config;
    if (!c.truth_path.empty()) j["truth"] = c.truth_path;
    return j;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text << std::endl;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out << text << "\n";
}

json fit_report(const FittedLmm& fit, const RunConfig& config) {
    json j;
    j["version"] = kVersion;
    j["config"] = config_echo(config);
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["loglik"] = fit.loglik;
    j["grad_norm"] = fit.grad_norm;
    json theta;
    for (int k = 0; k < fit.spec.q(); ++k) theta[fit.spec.names[k]] = fit.theta_hat.values(k);
    j["theta"] = theta;
    j["parameter_order"] = fit.spec.names;
    std::vector<std::vector<double>> info(fit.spec.q(), std::vector<double>(fit.spec.q()));
    for (int a = 0; a < fit.spec.q(); ++a)
        for (int b = 0; b < fit.spec.q(); ++b) info[a][b] = fit.info(a, b);
    j["information"] = info;
    json bdry = json::array();
    for (int k : fit.boundary_params) bdry.push_back(fit.spec.names[k]);
    j["boundary_params"] = bdry;
    return j;
}

CsvSchema schema_from(const RunConfig& c) {
    if (c.cluster_col.empty() || c.response_col.empty() || c.aux_col.empty())
        throw std::invalid_argument("--cluster, --response and --aux are required");
    return CsvSchema{c.cluster_col, c.response_col, c.fixed_cols, c.random_cols, c.aux_col};
}

std::vector<int> resolve_params(const std::vector<std::string>& requested,
                                const std::vector<std::string>& names) {
    std::vector<int> out;
    if (requested.empty()) {
        for (size_t k = 0; k < names.size(); ++k) out.push_back(static_cast<int>(k));
        return out;
    }
    for (const auto& name : requested) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw std::invalid_argument("unknown parameter '" + name + "'");
        out.push_back(static_cast<int>(it - names.begin()));
    }
    return out;
}

} // namespace

void RunConfig::apply_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
    json j;
    in >> j;
    maybe_set(j, "data", data_path);
    maybe_set(j, "scores", scores_path);
    maybe_set(j, "cluster", cluster_col);
    maybe_set(j, "response", response_col);
    maybe_set(j, "aux", aux_col);
    maybe_set(j, "fixed", fixed_cols);
    maybe_set(j, "random", random_cols);
    maybe_set(j, "params", params);
    maybe_set(j, "stats", stats);
    maybe_set_num(j, "alpha", alpha);
    maybe_set_num(j, "seed", seed);
    maybe_set_num(j, "jobs", jobs);
    maybe_set(j, "out", out_path);
    maybe_set(j, "trace_out", trace_prefix);
    maybe_set(j, "csv_out", csv_out);
    maybe_set(j, "null_cache", null_cache);
    maybe_set_num(j, "grid", grid);
    maybe_set_num(j, "reps", reps);
    maybe_set_num(j, "qprime", qprime);
    maybe_set(j, "study", study_config);
    maybe_set(j, "truth", truth_path);
    maybe_set(j, "checkpoints", checkpoint_dir);
}

void RunConfig::check_inputs() const {
    namespace fs = std::filesystem;
    for (const std::string* path : {&data_path, &scores_path, &study_config, &truth_path}) {
        if (!path->empty() && !fs::exists(*path))
            throw std::invalid_argument("input file '" + *path + "' does not exist");
    }
}

int cmd_fit(const RunConfig& config) {
    if (config.data_path.empty()) throw std::invalid_argument("--data is required");
    const LongDataset data = read_csv(config.data_path, schema_from(config));
    const ModelSpec spec = ModelSpec::make(config.fixed_cols, config.random_cols);
    const FittedLmm fit = fit_ml(spec, data);
    write_output(config.out_path, fit_report(fit, config).dump(2));
    if (!fit.converged) {
        std::cerr << "fit did not converge (grad_norm " << fit.grad_norm << ")\n";
        return kExitNonConvergence;
    }
    return kExitOk;
}

int cmd_test(const RunConfig& config, bool trace_only) {
    ScoreMatrix S;
    Eigen::MatrixXd info;
    bool have_info = false;
    json report;
    report["version"] = kVersion;
    report["config"] = config_echo(config);

    if (!config.scores_path.empty()) {
        S = read_scores_csv(config.scores_path);
    } else {
        if (config.data_path.empty())
            throw std::invalid_argument("either --data or --scores is required");
        const LongDataset data = read_csv(config.data_path, schema_from(config));
        const ModelSpec spec = ModelSpec::make(config.fixed_cols, config.random_cols);
        const FittedLmm fit = fit_ml(spec, data);
        if (!fit.converged) {
            std::cerr << "fit did not converge (grad_norm " << fit.grad_norm << ")\n";
            return kExitNonConvergence;
        }
        report["fit"] = fit_report(fit, config);
        S = casewise_scores(fit, data);
        info = fit.info;
        have_info = true;
    }

    const std::vector<int> tested = resolve_params(config.params, S.names);
    CumProcess proc;
    bool have_proc = false;

    json results = json::array();
    for (int param : tested) {
        const std::vector<int> cols{param};
        for (const auto& stat_name : config.stats) {
            const StatKind kind = stat_kind_from_string(stat_name);
            TestResult res;
            std::vector<double> cutpoint_fracs;
            switch (kind) {
                case StatKind::CvM:
                case StatKind::DM:
                case StatKind::maxLM: {
                    if (!have_info)
                        throw std::invalid_argument(to_string(kind) +
                                                    " needs the model information matrix; it is "
                                                    "unavailable for externally supplied scores");
                    if (!have_proc) {
                        proc = cumulative_process(S, info);
                        have_proc = true;
                    }
                    res = kind == StatKind::CvM
                              ? cvm_stat(proc, cols)
                              : (kind == StatKind::DM ? dm_stat(proc, cols)
                                                      : maxlm_stat(proc, cols));
                    break;
                }
                case StatKind::SN:
                    res = sn_stat(S, cols);
                    break;
                case StatKind::SN_ord: {
                    const auto cuts = ordinal_cutpoints(S.aux_sorted);
                    res = sn_stat(S, cols, SnWeights::ordinal(cuts));
                    for (int k : cuts) cutpoint_fracs.push_back(double(k) / double(S.n()));
                    break;
                }
                case StatKind::SN_w:
                    throw std::invalid_argument(
                        "SN_w needs a weight function; the CLI exposes SN and SN_ord");
            }

            if (!config.null_cache.empty()) {
                NullSimOptions nopts;
                nopts.threads = config.jobs;
                nopts.cutpoint_fracs = cutpoint_fracs;
                const NullTable table = cached_null_table(config.null_cache, kind, 1, config.grid,
                                                          config.reps, config.seed, nopts);
                res.alpha = config.alpha;
                res.critical_value = table.critical_value(config.alpha);
                res.p_value = p_value(table, res.value);
            }

            if (!config.trace_prefix.empty() || trace_only) {
                const std::string prefix =
                    config.trace_prefix.empty() ? "trace" : config.trace_prefix;
                const std::string path =
                    prefix + "_" + S.names[param] + "_" + to_string(kind) + ".csv";
                write_trace_csv(res, S.aux_sorted, path);
            }
            json entry = json::parse(test_result_json(res, S.names));
            results.push_back(entry);
        }
    }
    report["tests"] = results;
    if (!trace_only) write_output(config.out_path, report.dump(2));
    return kExitOk;
}

int cmd_critvals(const RunConfig& config) {
    if (config.null_cache.empty())
        throw std::invalid_argument("--null-cache directory is required for critvals");
    json j;
    j["version"] = kVersion;
    j["config"] = config_echo(config);
    json tables = json::array();
    for (const auto& stat_name : config.stats) {
        const StatKind kind = stat_kind_from_string(stat_name);
        NullSimOptions opts;
        opts.threads = config.jobs;
        const NullTable t = cached_null_table(config.null_cache, kind, config.qprime, config.grid,
                                              config.reps, config.seed, opts);
        json je;
        je["kind"] = to_string(kind);
        je["qprime"] = t.qprime;
        je["grid_size"] = t.grid_size;
        je["replications"] = t.replications;
        for (const auto& [alpha, crit] : t.quantiles)
            je["critical_values"][std::to_string(alpha)] = crit;
        tables.push_back(je);
    }
    j["tables"] = tables;
    write_output(config.out_path, j.dump(2));
    return kExitOk;
}

int cmd_power(const RunConfig& config) {
    if (config.study_config.empty())
        throw std::invalid_argument("--study JSON file is required for power");
    std::ifstream in(config.study_config);
    if (!in) throw std::invalid_argument("cannot open '" + config.study_config + "'");
    json j;
    in >> j;

    const ModelSpec spec = sleepstudy_spec();
    const ThetaVector truth = config.truth_path.empty()
                                  ? default_truth()
                                  : load_truth_config(config.truth_path, spec);

    const auto Js = j.value("J", std::vector<int>{24});
    const auto ds = j.value("d", std::vector<double>{0, 1, 2, 3, 4});
    const auto changed = j.value("changed", std::vector<std::string>{"intercept"});
    const auto tested_names = j.value("tested", spec.names);
    const auto stat_names = j.value("stats", std::vector<std::string>{"SN"});
    const int replications = j.value("replications", 500);
    const std::uint64_t seed = j.value("seed", config.seed);
    const double alpha = j.value("alpha", config.alpha);

    std::vector<StatKind> kinds;
    for (const auto& s : stat_names) kinds.push_back(stat_kind_from_string(s));
    const std::vector<int> tested = resolve_params(tested_names, spec.names);

    std::vector<SimCondition> conds;
    for (const auto& cname : changed) {
        const int cp = resolve_params({cname}, spec.names).front();
        for (int J : Js) {
            for (double d : ds) {
                SimCondition c;
                c.J = J;
                c.d = d;
                c.changed_param = cp;
                c.tested_params = tested;
                c.stats = kinds;
                c.replications = replications;
                c.seed = seed;
                c.alpha = alpha;
                conds.push_back(c);
            }
        }
    }

    const int null_grid = j.contains("null") ? j["null"].value("grid", config.grid) : config.grid;
    const int null_reps = j.contains("null") ? j["null"].value("reps", config.reps) : config.reps;
    const std::uint64_t null_seed =
        j.contains("null") ? j["null"].value("seed", std::uint64_t{99}) : std::uint64_t{99};

    std::map<StatKind, NullTable> tables;
    NullSimOptions nopts;
    nopts.threads = config.jobs;
    for (StatKind k : std::set<StatKind>(kinds.begin(), kinds.end()))
        tables.emplace(k, cached_null_table(config.null_cache, k, 1, null_grid, null_reps,
                                            null_seed, nopts));

    PowerStudyOptions popts;
    popts.threads = config.jobs;
    popts.checkpoint_dir = config.checkpoint_dir;
    popts.progress = true;
    const PowerTable table = run_power_study(conds, truth, tables, popts);

    write_output(config.out_path, power_table_json(table, spec));
    if (!config.csv_out.empty()) write_power_csv(table, spec, config.csv_out);
    return kExitOk;
}

int run_command(const RunConfig& config) {
    config.check_inputs();
    if (config.command == "fit") return cmd_fit(config);
    if (config.command == "test") return cmd_test(config);
    if (config.command == "trace") return cmd_test(config, /*trace_only=*/true);
    if (config.command == "critvals") return cmd_critvals(config);
    if (config.command == "power") return cmd_power(config);
    throw std::invalid_argument("unknown command '" + config.command + "'");
}

} // namespace snlmm
