#pragma once

#include <Eigen/Dense>
#include <vector>

#include "snlmm/model.hpp"

namespace snlmm::detail {

/// Solved state of one cluster at a given theta: V_j, its inverse,
/// residual and whitened residual u = V_j^{-1} (y_j - X_j beta).
struct ClusterSolve {
    Eigen::MatrixXd V;
    Eigen::MatrixXd Vinv;
    Eigen::VectorXd resid;
    Eigen::VectorXd u;
    double logdet = 0.0;
};

ClusterSolve solve_cluster(const ModelSpec& spec, const ThetaVector& theta,
                           const ClusterData& data, int j);

/// dV_j/dtheta_k for the variance-component parameters in canonical order
/// (G entries column-major lower triangle, then the residual variance).
std::vector<Eigen::MatrixXd> dv_matrices(const ModelSpec& spec, const Eigen::MatrixXd& Z);

} // namespace snlmm::detail
