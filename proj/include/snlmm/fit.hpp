#pragma once

#include "snlmm/model.hpp"

namespace snlmm {

struct FitOptions {
    double grad_tol = 1e-6;  // max-abs gradient in the reporting parameterization
    int max_iter = 500;
    bool verbose = false;
};

/// Marginal maximum likelihood fit.
///
/// Search runs in an unconstrained parameterization (beta profiled out;
/// log-Cholesky factor of G relative to s2; log s2) under BFGS, then a
/// Fisher-scoring polish in the reporting parameterization drives the
/// gradient below grad_tol. Variance components may end up on the boundary
/// (G singular or s2-dominated); those parameters are flagged in the
/// result rather than rejected.
///
/// Throws RankDeficientError if the fixed-effect design is rank deficient,
/// std::invalid_argument if n <= q.
FittedLmm fit_ml(const ModelSpec& spec, const LongDataset& data, const FitOptions& opts = {});
FittedLmm fit_ml(const ModelSpec& spec, const ClusterData& data, const FitOptions& opts = {});

} // namespace snlmm
