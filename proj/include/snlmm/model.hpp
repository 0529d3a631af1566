#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "snlmm/dataset.hpp"

namespace snlmm {

/// Shape of the two-level linear mixed model
///   y_j = X_j beta + Z_j b_j + e_j,   b_j ~ N(0, G),   e_j ~ N(0, s2 I),
/// with p fixed effects and r random effects per cluster.
///
/// The canonical ("reporting") parameter order is
///   beta_1..beta_p, vech(G) column-major (g11, g21, g22, ...), s2,
/// giving q = p + r(r+1)/2 + 1 parameters. Scores, the information matrix
/// and all tests use this parameterization.
struct ModelSpec {
    int p = 0;
    int r = 0;
    std::vector<std::string> names;

    int n_cov() const { return r * (r + 1) / 2; } // distinct entries of G
    int q() const { return p + n_cov() + 1; }

    /// Spec for an intercept + named covariates model; generates canonical
    /// parameter names ("intercept", covariates, "var_*", "cov_*_*",
    /// "var_resid").
    static ModelSpec make(const std::vector<std::string>& fixed_names,
                          const std::vector<std::string>& random_names);

    /// Index helpers into the canonical order.
    int beta_index(int i) const { return i; }
    int cov_index(int a, int b) const;   // entry (a,b) of G, a >= b
    int resid_index() const { return q() - 1; }
};

/// Parameter vector in the canonical order of a ModelSpec.
struct ThetaVector {
    Eigen::VectorXd values;

    Eigen::VectorXd beta(const ModelSpec& spec) const { return values.head(spec.p); }
    Eigen::MatrixXd G(const ModelSpec& spec) const;
    double sigma_r2(const ModelSpec& spec) const { return values(spec.q() - 1); }

    /// Assembles a ThetaVector from parts.
    static ThetaVector from_parts(const ModelSpec& spec, const Eigen::VectorXd& beta,
                                  const Eigen::MatrixXd& G, double sigma_r2);

    /// Throws std::invalid_argument if G is not symmetric PSD or s2 <= 0.
    void validate(const ModelSpec& spec) const;
};

/// Per-cluster dense views of the data, the working representation for all
/// likelihood computations. Cluster sizes are small by design; everything
/// is dense.
struct ClusterData {
    std::vector<Eigen::VectorXd> y;   // n_j
    std::vector<Eigen::MatrixXd> X;   // n_j x p
    std::vector<Eigen::MatrixXd> Z;   // n_j x r
    std::vector<std::vector<int>> rows; // original row indices
    int p = 0, r = 0;
    Eigen::Index n = 0;

    int J() const { return static_cast<int>(y.size()); }

    static ClusterData split(const LongDataset& data);
};

/// Result of fit_ml.
struct FittedLmm {
    ModelSpec spec;
    ThetaVector theta_hat;
    double loglik = 0.0;
    Eigen::MatrixXd info;      // q x q expected information
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;    // max-abs score at theta_hat, reporting scale

    // Parameters estimated on (or numerically at) the boundary. Score-based
    // tests refuse these.
    std::vector<int> boundary_params;

    bool is_boundary(int param) const;
};

/// Marginal log-likelihood sum_j l_j with
///   l_j = -1/2 [ n_j log 2*pi + log|V_j| + res_j' V_j^{-1} res_j ],
///   V_j = Z_j G Z_j' + s2 I.
/// Throws SingularModelError naming the offending cluster when some V_j is
/// not positive definite.
double marginal_loglik(const ModelSpec& spec, const ThetaVector& theta, const ClusterData& data);
double marginal_loglik(const ModelSpec& spec, const ThetaVector& theta, const LongDataset& data);

/// Cluster-level score vectors (gradient contributions per cluster) in the
/// canonical parameterization: rows j = 1..J, columns = parameters.
Eigen::MatrixXd cluster_scores(const ModelSpec& spec, const ThetaVector& theta,
                               const ClusterData& data);

/// Total score (gradient of marginal_loglik) in the canonical
/// parameterization.
Eigen::VectorXd score_total(const ModelSpec& spec, const ThetaVector& theta,
                            const ClusterData& data);

/// Expected information of the marginal likelihood, block diagonal in
/// (beta; variance components):
///   I_bb      = sum_j X_j' V_j^{-1} X_j
///   I_{tk,tl} = 1/2 sum_j tr(V_j^{-1} dV_k V_j^{-1} dV_l)
/// Cross blocks are exactly zero; the result is exactly symmetric.
Eigen::MatrixXd expected_information(const ModelSpec& spec, const ThetaVector& theta,
                                     const ClusterData& data);

/// Expected information at the fit, per the FittedLmm contract.
Eigen::MatrixXd information_matrix(const FittedLmm& fitted, const LongDataset& data);

} // namespace snlmm
