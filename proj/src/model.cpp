#include "snlmm/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snlmm/detail/cluster.hpp"
#include "snlmm/errors.hpp"

namespace snlmm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

// ---------------------------------------------------------------------------
// ModelSpec / ThetaVector
// ---------------------------------------------------------------------------

ModelSpec ModelSpec::make(const std::vector<std::string>& fixed_names,
                          const std::vector<std::string>& random_names) {
    ModelSpec spec;
    std::vector<std::string> fx = {"intercept"};
    fx.insert(fx.end(), fixed_names.begin(), fixed_names.end());
    std::vector<std::string> rd = {"intercept"};
    rd.insert(rd.end(), random_names.begin(), random_names.end());
    spec.p = static_cast<int>(fx.size());
    spec.r = static_cast<int>(rd.size());
    spec.names = fx;
    for (int b = 0; b < spec.r; ++b) {
        for (int a = b; a < spec.r; ++a) {
            if (a == b)
                spec.names.push_back("var_" + rd[a]);
            else
                spec.names.push_back("cov_" + rd[b] + "_" + rd[a]);
        }
    }
    spec.names.push_back("var_resid");
    return spec;
}

int ModelSpec::cov_index(int a, int b) const {
    if (a < b) std::swap(a, b);
    // column-major lower triangle: (0,0),(1,0),..,(r-1,0),(1,1),..
    int idx = 0;
    for (int col = 0; col < b; ++col) idx += r - col;
    idx += a - b;
    return p + idx;
}

Eigen::MatrixXd ThetaVector::G(const ModelSpec& spec) const {
    Eigen::MatrixXd G(spec.r, spec.r);
    for (int b = 0; b < spec.r; ++b)
        for (int a = b; a < spec.r; ++a) G(a, b) = G(b, a) = values(spec.cov_index(a, b));
    return G;
}

ThetaVector ThetaVector::from_parts(const ModelSpec& spec, const Eigen::VectorXd& beta,
                                    const Eigen::MatrixXd& G, double sigma_r2) {
    ThetaVector t;
    t.values.resize(spec.q());
    t.values.head(spec.p) = beta;
    for (int b = 0; b < spec.r; ++b)
        for (int a = b; a < spec.r; ++a) t.values(spec.cov_index(a, b)) = G(a, b);
    t.values(spec.resid_index()) = sigma_r2;
    return t;
}

void ThetaVector::validate(const ModelSpec& spec) const {
    if (values.size() != spec.q())
        throw std::invalid_argument("theta has length " + std::to_string(values.size()) +
                                    ", spec requires " + std::to_string(spec.q()));
    if (!(sigma_r2(spec) > 0.0)) throw std::invalid_argument("residual variance must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G(spec));
    const double lo = es.eigenvalues().minCoeff();
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (lo < -1e-10 * scale)
        throw std::invalid_argument("random-effect covariance is not positive semi-definite");
}

// ---------------------------------------------------------------------------
// ClusterData
// ---------------------------------------------------------------------------

ClusterData ClusterData::split(const LongDataset& data) {
    data.validate();
    const int J = data.n_clusters();
    const int p = static_cast<int>(data.fixed_covariates.cols());
    const int r = static_cast<int>(data.random_covariates.cols());

    std::vector<int> counts(J, 0);
    for (int c : data.cluster) ++counts[c];

    ClusterData cd;
    cd.p = p;
    cd.r = r;
    cd.n = data.n();
    cd.y.resize(J);
    cd.X.resize(J);
    cd.Z.resize(J);
    cd.rows.resize(J);
    for (int j = 0; j < J; ++j) {
        cd.y[j].resize(counts[j]);
        cd.X[j].resize(counts[j], p);
        cd.Z[j].resize(counts[j], r);
        cd.rows[j].reserve(counts[j]);
    }
    std::vector<int> fill(J, 0);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const int j = data.cluster[i];
        const int k = fill[j]++;
        cd.y[j](k) = data.response(i);
        cd.X[j].row(k) = data.fixed_covariates.row(i);
        cd.Z[j].row(k) = data.random_covariates.row(i);
        cd.rows[j].push_back(static_cast<int>(i));
    }
    return cd;
}

// ---------------------------------------------------------------------------
// Cluster-level likelihood machinery
// ---------------------------------------------------------------------------

namespace detail {

ClusterSolve solve_cluster(const ModelSpec& spec, const ThetaVector& theta,
                           const ClusterData& data, int j) {
    const auto& Z = data.Z[j];
    const Eigen::Index nj = Z.rows();
    const Eigen::MatrixXd G = theta.G(spec);
    const double s2 = theta.sigma_r2(spec);

    ClusterSolve cs;
    cs.V = Z * G * Z.transpose();
    cs.V.diagonal().array() += s2;
    Eigen::LLT<Eigen::MatrixXd> llt(cs.V);
    if (llt.info() != Eigen::Success)
        throw SingularModelError("marginal covariance of cluster " + std::to_string(j) +
                                 " is not positive definite");
    cs.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    cs.Vinv = llt.solve(Eigen::MatrixXd::Identity(nj, nj));
    cs.resid = data.y[j] - data.X[j] * theta.beta(spec);
    cs.u = llt.solve(cs.resid);
    return cs;
}

// dV_j/dtheta_k for the variance-component parameters, in canonical order.
std::vector<Eigen::MatrixXd> dv_matrices(const ModelSpec& spec, const Eigen::MatrixXd& Z) {
    const Eigen::Index nj = Z.rows();
    std::vector<Eigen::MatrixXd> dv;
    dv.reserve(spec.n_cov() + 1);
    for (int b = 0; b < spec.r; ++b) {
        for (int a = b; a < spec.r; ++a) {
            Eigen::MatrixXd A = Z.col(a) * Z.col(b).transpose();
            if (a != b) A += Eigen::MatrixXd(Z.col(b) * Z.col(a).transpose());
            dv.push_back(std::move(A));
        }
    }
    dv.push_back(Eigen::MatrixXd::Identity(nj, nj));
    return dv;
}

} // namespace detail

double marginal_loglik(const ModelSpec& spec, const ThetaVector& theta, const ClusterData& data) {
    theta.validate(spec);
    double ll = 0.0;
    for (int j = 0; j < data.J(); ++j) {
        const auto cs = detail::solve_cluster(spec, theta, data, j);
        const Eigen::Index nj = data.y[j].size();
        ll += -0.5 * (double(nj) * kLog2Pi + cs.logdet + cs.resid.dot(cs.u));
    }
    return ll;
}

double marginal_loglik(const ModelSpec& spec, const ThetaVector& theta, const LongDataset& data) {
    return marginal_loglik(spec, theta, ClusterData::split(data));
}

Eigen::MatrixXd cluster_scores(const ModelSpec& spec, const ThetaVector& theta,
                               const ClusterData& data) {
    const int q = spec.q();
    Eigen::MatrixXd scores(data.J(), q);
    for (int j = 0; j < data.J(); ++j) {
        const auto cs = detail::solve_cluster(spec, theta, data, j);
        scores.row(j).head(spec.p) = (data.X[j].transpose() * cs.u).transpose();
        const auto dv = detail::dv_matrices(spec, data.Z[j]);
        for (size_t k = 0; k < dv.size(); ++k) {
            const double tr = (cs.Vinv * dv[k]).trace();
            const double quad = cs.u.dot(dv[k] * cs.u);
            scores(j, spec.p + static_cast<int>(k)) = -0.5 * tr + 0.5 * quad;
        }
    }
    return scores;
}

Eigen::VectorXd score_total(const ModelSpec& spec, const ThetaVector& theta,
                            const ClusterData& data) {
    return cluster_scores(spec, theta, data).colwise().sum().transpose();
}

Eigen::MatrixXd expected_information(const ModelSpec& spec, const ThetaVector& theta,
                                     const ClusterData& data) {
    const int q = spec.q();
    const int nvc = spec.n_cov() + 1;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
    for (int j = 0; j < data.J(); ++j) {
        const auto cs = detail::solve_cluster(spec, theta, data, j);
        info.topLeftCorner(spec.p, spec.p) += data.X[j].transpose() * cs.Vinv * data.X[j];
        const auto dv = detail::dv_matrices(spec, data.Z[j]);
        std::vector<Eigen::MatrixXd> W(nvc);
        for (int k = 0; k < nvc; ++k) W[k] = cs.Vinv * dv[k];
        for (int k = 0; k < nvc; ++k) {
            for (int l = k; l < nvc; ++l) {
                const double v = 0.5 * (W[k] * W[l]).trace();
                info(spec.p + k, spec.p + l) += v;
            }
        }
    }
    // mirror the upper triangle of the vc block
    for (int k = 0; k < nvc; ++k)
        for (int l = k + 1; l < nvc; ++l) info(spec.p + l, spec.p + k) = info(spec.p + k, spec.p + l);
    // make the beta block exactly symmetric
    info.topLeftCorner(spec.p, spec.p) =
        ((info.topLeftCorner(spec.p, spec.p) + info.topLeftCorner(spec.p, spec.p).transpose()) / 2.0)
            .eval();
    return info;
}

Eigen::MatrixXd information_matrix(const FittedLmm& fitted, const LongDataset& data) {
    if (!fitted.converged)
        throw std::invalid_argument("information_matrix requires a converged fit");
    return expected_information(fitted.spec, fitted.theta_hat, ClusterData::split(data));
}

bool FittedLmm::is_boundary(int param) const {
    return std::find(boundary_params.begin(), boundary_params.end(), param) !=
           boundary_params.end();
}

} // namespace snlmm
