#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "snlmm/model.hpp"

namespace snlmm {

/// Casewise score contributions ordered by the auxiliary variable.
/// Row i of S is the level-1 score of the observation with the i-th
/// smallest auxiliary value; `order[i]` is that observation's original row.
struct ScoreMatrix {
    Eigen::MatrixXd S;             // n x q, sorted by auxiliary
    std::vector<int> order;        // sorted position -> original row
    Eigen::VectorXd aux_sorted;    // nondecreasing
    std::vector<std::string> names; // q column labels

    Eigen::Index n() const { return S.rows(); }
    Eigen::Index q() const { return S.cols(); }
};

/// Scaled cumulative score process; row k holds
///   B(k/n) = n^{-1/2} Ihat^{-1/2} * (sum of the first k ordered scores).
struct CumProcess {
    Eigen::MatrixXd B;             // n x q
    Eigen::MatrixXd info_root_inv; // Ihat^{-1/2}, symmetric
    Eigen::VectorXd aux_sorted;    // carried along for reporting
};

/// Level-1 score allocation at the fitted parameters, ordered by
/// data.auxiliary.
///
/// Within cluster j, with u = V_j^{-1} res_j:
///   - fixed effect c: row i gets X_j(i,c) * u_i;
///   - variance component with dV = A: row i gets
///       -1/2 [diag(V_j^{-1} A)]_i + 1/2 u_i (A u)_i.
/// Rows of a cluster sum exactly to the analytic cluster score, and all
/// rows sum to the total score (~ 0 at the ML fit).
///
/// Throws BoundaryParameterError when the fit has boundary variance
/// estimates (the allocation is not meaningful there).
ScoreMatrix casewise_scores(const FittedLmm& fitted, const LongDataset& data);

/// Sorts raw score rows by the auxiliary variable, ascending, stable in the
/// original row index. Throws on non-finite auxiliary values.
ScoreMatrix order_by_auxiliary(const Eigen::MatrixXd& S, const Eigen::VectorXd& aux,
                               std::vector<std::string> names = {});

/// Partial cumulative score B*_{a,b} (1-based, inclusive). For a <= b the
/// forward sum over positions a..b; for a > b the backward sum, whose total
/// equals B*_{b,a}.
Eigen::VectorXd partial_cumsum(const ScoreMatrix& S, int a, int b);

/// Builds the scaled cumulative process. `info` must be symmetric positive
/// definite; its inverse square root is computed via eigendecomposition.
/// Throws NumericError listing the smallest eigenvalue otherwise.
CumProcess cumulative_process(const ScoreMatrix& S, const Eigen::MatrixXd& info);

/// CSV round-trip for score matrices (q named columns plus an "aux"
/// column), so externally produced scores can enter the pipeline.
void write_scores_csv(const ScoreMatrix& S, const std::string& path);
ScoreMatrix read_scores_csv(const std::string& path);

} // namespace snlmm
