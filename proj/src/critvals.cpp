#include "snlmm/critvals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "snlmm/detail/parallel.hpp"
#include "snlmm/errors.hpp"
#include "snlmm/rng.hpp"

namespace snlmm {

double NullTable::critical_value(double alpha) const {
    auto it = quantiles.find(alpha);
    if (it == quantiles.end())
        throw std::invalid_argument("null table has no quantile for alpha = " +
                                    std::to_string(alpha));
    return it->second;
}

Eigen::MatrixXd simulate_bridge(int n_g, int qprime, std::mt19937_64& rng) {
    if (n_g < 10) throw std::invalid_argument("bridge grid size must be >= 10");
    if (qprime < 1) throw std::invalid_argument("bridge dimension must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(n_g)));
    Eigen::MatrixXd B(n_g, qprime);
    for (int c = 0; c < qprime; ++c) {
        double run = 0.0;
        for (int i = 0; i < n_g; ++i) {
            run += normal(rng);
            B(i, c) = run;
        }
        const double total = run;
        for (int i = 0; i < n_g; ++i) B(i, c) -= (double(i + 1) / double(n_g)) * total;
    }
    return B;
}

namespace {

// Bridge increments act as the ordered scores (identity information).
ScoreMatrix bridge_as_scores(const Eigen::MatrixXd& bridge) {
    const Eigen::Index n = bridge.rows();
    Eigen::MatrixXd S(n, bridge.cols());
    S.row(0) = bridge.row(0);
    for (Eigen::Index i = 1; i < n; ++i) S.row(i) = bridge.row(i) - bridge.row(i - 1);
    Eigen::VectorXd aux(n);
    for (Eigen::Index i = 0; i < n; ++i) aux(i) = double(i + 1) / double(n);
    return order_by_auxiliary(S, aux);
}

std::vector<int> fracs_to_ks(const std::vector<double>& fracs, int n_g) {
    std::vector<int> ks;
    for (double f : fracs) {
        int k = static_cast<int>(std::lround(f * n_g));
        k = std::max(1, std::min(n_g - 1, k));
        ks.push_back(k);
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

double bridge_functional(StatKind kind, const Eigen::MatrixXd& bridge,
                         const std::vector<double>& cutpoint_fracs) {
    const int n = static_cast<int>(bridge.rows());
    switch (kind) {
        case StatKind::CvM: {
            double sum = 0.0;
            for (int k = 0; k < n; ++k) sum += bridge.row(k).squaredNorm();
            return sum / double(n);
        }
        case StatKind::DM:
            return bridge.cwiseAbs().maxCoeff();
        case StatKind::maxLM: {
            const double trim = 0.1;
            const int lo = static_cast<int>(std::ceil(double(n) * trim));
            const int hi = static_cast<int>(std::floor(double(n) * (1.0 - trim)));
            double best = 0.0;
            for (int k = lo; k <= hi; ++k) {
                const double t = double(k) / double(n);
                best = std::max(best, bridge.row(k - 1).squaredNorm() / (t * (1.0 - t)));
            }
            return best;
        }
        case StatKind::SN: {
            const ScoreMatrix S = bridge_as_scores(bridge);
            std::vector<int> cols(bridge.cols());
            for (size_t c = 0; c < cols.size(); ++c) cols[c] = static_cast<int>(c);
            return sn_stat(S, cols).value;
        }
        case StatKind::SN_ord: {
            const ScoreMatrix S = bridge_as_scores(bridge);
            std::vector<int> cols(bridge.cols());
            for (size_t c = 0; c < cols.size(); ++c) cols[c] = static_cast<int>(c);
            return sn_stat(S, cols, SnWeights::ordinal(fracs_to_ks(cutpoint_fracs, n))).value;
        }
        case StatKind::SN_w:
            throw std::invalid_argument(
                "SN_w null simulation needs an explicit weight; use SN_ord for the ordinal weight");
    }
    throw std::invalid_argument("unknown statistic kind");
}

} // namespace

NullTable null_distribution(StatKind kind, int qprime, int n_g, int R, std::uint64_t seed,
                            const NullSimOptions& opts) {
    if (R < 1) throw std::invalid_argument("need at least one replication");
    if (kind == StatKind::SN_ord && opts.cutpoint_fracs.empty())
        throw std::invalid_argument("SN_ord null simulation requires cutpoint fractions");

    std::vector<double> draws(R);
    detail::parallel_for(R, opts.threads, [&](int rep) {
        auto rng = substream(seed, static_cast<std::uint64_t>(rep));
        const Eigen::MatrixXd bridge = simulate_bridge(n_g, qprime, rng);
        draws[rep] = bridge_functional(kind, bridge, opts.cutpoint_fracs);
    });
    std::sort(draws.begin(), draws.end());

    NullTable table;
    table.kind = kind;
    table.qprime = qprime;
    table.grid_size = n_g;
    table.replications = R;
    table.seed = seed;
    table.cutpoint_fracs = opts.cutpoint_fracs;
    for (double alpha : opts.alphas) {
        // order statistic at level 1 - alpha
        int idx = static_cast<int>(std::ceil((1.0 - alpha) * R)) - 1;
        idx = std::max(0, std::min(R - 1, idx));
        table.quantiles[alpha] = draws[idx];
    }
    if (opts.keep_samples) table.samples = std::move(draws);
    return table;
}

double p_value(const NullTable& table, double value) {
    if (!table.has_samples())
        throw NumericError("null table was saved without samples; regenerate with samples "
                           "retained to compute p-values");
    const auto& s = table.samples;
    const auto lb = std::lower_bound(s.begin(), s.end(), value);
    const auto r = static_cast<double>(s.end() - lb); // draws >= value
    return (r + 1.0) / (double(s.size()) + 1.0);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

std::string null_table_json(const NullTable& table) {
    nlohmann::json j;
    j["kind"] = to_string(table.kind);
    j["qprime"] = table.qprime;
    j["grid_size"] = table.grid_size;
    j["replications"] = table.replications;
    j["seed"] = table.seed;
    for (const auto& [alpha, crit] : table.quantiles)
        j["quantiles"][std::to_string(alpha)] = crit;
    if (!table.cutpoint_fracs.empty()) j["cutpoint_fracs"] = table.cutpoint_fracs;
    if (table.has_samples()) j["samples"] = table.samples;
    return j.dump();
}

NullTable null_table_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    NullTable t;
    t.kind = stat_kind_from_string(j.at("kind").get<std::string>());
    t.qprime = j.at("qprime").get<int>();
    t.grid_size = j.at("grid_size").get<int>();
    t.replications = j.at("replications").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("quantiles").items())
        t.quantiles[std::stod(key)] = value.get<double>();
    if (j.contains("cutpoint_fracs")) t.cutpoint_fracs = j["cutpoint_fracs"].get<std::vector<double>>();
    if (j.contains("samples")) t.samples = j["samples"].get<std::vector<double>>();
    return t;
}

void save_null_table(const NullTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out << null_table_json(table);
}

NullTable load_null_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return null_table_from_json(text);
}

namespace {

std::string cache_file_name(StatKind kind, int qprime, int n_g, int R, std::uint64_t seed,
                            const std::vector<double>& cutpoint_fracs) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s_q%d_g%d_R%d_s%llu", to_string(kind).c_str(), qprime, n_g,
                  R, static_cast<unsigned long long>(seed));
    std::string name = buf;
    if (!cutpoint_fracs.empty()) {
        std::uint64_t h = 1469598103934665603ULL; // FNV-1a over the fractions
        for (double f : cutpoint_fracs) {
            char fb[32];
            std::snprintf(fb, sizeof(fb), "%.12g", f);
            for (const char* c = fb; *c; ++c) {
                h ^= static_cast<unsigned char>(*c);
                h *= 1099511628211ULL;
            }
        }
        std::snprintf(buf, sizeof(buf), "_c%016llx", static_cast<unsigned long long>(h));
        name += buf;
    }
    return name + ".json";
}

} // namespace

NullTable cached_null_table(const std::string& cache_dir, StatKind kind, int qprime, int n_g,
                            int R, std::uint64_t seed, const NullSimOptions& opts) {
    if (cache_dir.empty()) return null_distribution(kind, qprime, n_g, R, seed, opts);

    namespace fs = std::filesystem;
    const fs::path path =
        fs::path(cache_dir) / cache_file_name(kind, qprime, n_g, R, seed, opts.cutpoint_fracs);
    if (fs::exists(path)) {
        NullTable t = load_null_table(path.string());
        if (t.kind == kind && t.qprime == qprime && t.grid_size == n_g &&
            t.replications == R && t.seed == seed)
            return t;
    }
    NullTable t = null_distribution(kind, qprime, n_g, R, seed, opts);
    fs::create_directories(fs::path(cache_dir));
    save_null_table(t, path.string());
    return t;
}

} // namespace snlmm
