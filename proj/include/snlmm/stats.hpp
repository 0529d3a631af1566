#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "snlmm/scores.hpp"

namespace snlmm {

enum class StatKind { CvM, DM, maxLM, SN, SN_w, SN_ord };

std::string to_string(StatKind kind);
StatKind stat_kind_from_string(const std::string& s);

/// Per-k trace of a statistic. For SN-type statistics `values[i]` is the
/// (possibly weighted) quadratic form at k_grid[i]; `skipped` lists k where
/// V_n(k) was numerically singular. For CvM the values are the per-k
/// summands, for DM/maxLM the per-k maxima.
struct SnTrace {
    std::vector<int> k_grid;
    std::vector<double> values;
    std::vector<int> skipped;
    int argmax_k = -1;
    double argmax_aux = 0.0;

    double max_value() const;
};

struct TestResult {
    StatKind kind = StatKind::SN;
    double value = 0.0;
    double critical_value = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    SnTrace trace;
    std::vector<int> cols;

    bool has_critical_value() const { return critical_value == critical_value; }
    bool has_p_value() const { return p_value == p_value; }
    bool rejects() const { return has_critical_value() && value > critical_value; }
};

/// Weighting scheme for the self-normalized statistic.
struct SnWeights {
    enum class Kind { None, Custom, Ordinal };
    Kind kind = Kind::None;
    std::function<double(double)> w;  // Custom: weight as a function of t = k/n
    std::vector<int> cutpoints;       // Ordinal: 1-based k positions of level ends

    static SnWeights none() { return {}; }
    static SnWeights custom(std::function<double(double)> f);
    static SnWeights ordinal(std::vector<int> cutpoints);
};

/// Cumulative positions k_1..k_{m-1} of the distinct levels of a
/// nondecreasing auxiliary vector (the last level's end, k = n, excluded).
std::vector<int> ordinal_cutpoints(const Eigen::VectorXd& aux_sorted);

/// Cramer-von Mises statistic n^{-1} sum_k B(k/n)' B(k/n) over the selected
/// columns of the decorrelated process.
TestResult cvm_stat(const CumProcess& P, const std::vector<int>& cols);

/// Double-maximum statistic max_{k,j} |B_j(k/n)|.
TestResult dm_stat(const CumProcess& P, const std::vector<int>& cols);

/// max-LM statistic: max over k in [ceil(n*trim), floor(n*(1-trim))] of
/// {t(1-t)}^{-1} sum_j B_j(k/n)^2, t = k/n.
TestResult maxlm_stat(const CumProcess& P, const std::vector<int>& cols, double trim = 0.1);

/// T_n(k) = n^{-1/2} (B*_{1,k} - (k/n) B*_{1,n}), selected columns.
Eigen::VectorXd t_vec(const ScoreMatrix& S, int k, const std::vector<int>& cols);

/// Deviation matrix C_{a,b}: column j is the forward (a <= b) or backward
/// (a > b) partial cumulative sum at step j minus j/m times the block total.
Eigen::MatrixXd c_matrix(const ScoreMatrix& S, int a, int b, const std::vector<int>& cols);

/// Self-normalizer V_n(k) = n^{-2} [ C_{1,k} C_{1,k}' + C_{n,k+1} C_{n,k+1}' ].
Eigen::MatrixXd v_matrix(const ScoreMatrix& S, int k, const std::vector<int>& cols);

/// One entry of the recursive sweep over all admissible k.
struct VSweep {
    std::vector<int> ks;                  // admissible k, ascending
    std::vector<Eigen::MatrixXd> v;       // V_n(k)
    std::vector<Eigen::MatrixXd> v_inv;   // V_n(k)^{-1}
    std::vector<char> fallback_direct;    // rank-1 update broke down; inverted directly
    std::vector<char> singular;           // no usable inverse at this k
    std::vector<double> min_eigval;

    int n_fallbacks() const;
};

/// Produces V_n(k)^{-1} for all admissible k in [q'+1, n-q'-1] in a single
/// O(n q'^2) pass: running cross-product updates assemble each V_n(k), and
/// the inverses are propagated by Sherman-Morrison rank-1 updates of the
/// running cross-product core plus a rank-4 Woodbury correction. A rank-1
/// denominator below 1e-12 (or a singular correction) falls back to direct
/// inversion for that k and is recorded.
VSweep v_matrix_sweep_recursive(const ScoreMatrix& S, const std::vector<int>& cols);

/// Reference sweep: per-k direct assembly and inversion of v_matrix,
/// O(n^2 q'^2) total. Oracle for the recursive path and debugging aid.
VSweep v_matrix_sweep_direct(const ScoreMatrix& S, const std::vector<int>& cols);

/// Self-normalized statistic sup_k T_n(k)' V_n(k)^{-1} T_n(k) over the
/// selected columns, optionally weighted (SN_w) or restricted to ordinal
/// cutpoints with the {t(1-t)}^{-1} weight (SN_ord).
///
/// k ranges over [q'+1, n-q'-1]; k with
/// min-eig V_n(k) < 1e-10 tr(V_n(k))/q' are skipped and recorded.
/// Throws NumericError if every k is skipped, std::invalid_argument if
/// n < 2(q'+1).
TestResult sn_stat(const ScoreMatrix& S, const std::vector<int>& cols,
                   const SnWeights& weights = SnWeights::none());

/// Writes a per-k trace as CSV (columns: k, aux, value and, when present,
/// critical_value).
void write_trace_csv(const TestResult& result, const Eigen::VectorXd& aux_sorted,
                     const std::string& path);

/// JSON export of a test result (statistic, value, critical value, p-value,
/// argmax location).
std::string test_result_json(const TestResult& result, const std::vector<std::string>& names);

} // namespace snlmm
