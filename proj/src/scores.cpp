#include "snlmm/scores.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "snlmm/detail/cluster.hpp"
#include "snlmm/errors.hpp"

namespace snlmm {

ScoreMatrix casewise_scores(const FittedLmm& fitted, const LongDataset& data) {
    if (!fitted.converged)
        throw std::invalid_argument("casewise_scores requires a converged fit");
    if (!fitted.boundary_params.empty()) {
        std::string msg = "casewise scores are undefined at a boundary optimum; "
                          "boundary parameters:";
        for (int k : fitted.boundary_params) msg += " " + fitted.spec.names[k];
        throw BoundaryParameterError(msg);
    }

    const ModelSpec& spec = fitted.spec;
    const ClusterData cd = ClusterData::split(data);
    const int q = spec.q();
    Eigen::MatrixXd S(cd.n, q);

    for (int j = 0; j < cd.J(); ++j) {
        const auto cs = detail::solve_cluster(spec, fitted.theta_hat, cd, j);
        const auto& X = cd.X[j];
        const Eigen::Index nj = X.rows();

        // fixed effects: row i gets x_ic * u_i
        Eigen::MatrixXd rows(nj, q);
        for (int c = 0; c < spec.p; ++c) rows.col(c) = X.col(c).cwiseProduct(cs.u);

        // variance components: row i gets -1/2 diag(Vinv A)_i + 1/2 u_i (A u)_i
        const auto dv = detail::dv_matrices(spec, cd.Z[j]);
        for (size_t k = 0; k < dv.size(); ++k) {
            const Eigen::VectorXd diag_vinv_a = (cs.Vinv.cwiseProduct(dv[k].transpose())).rowwise().sum();
            const Eigen::VectorXd au = dv[k] * cs.u;
            rows.col(spec.p + static_cast<int>(k)) =
                -0.5 * diag_vinv_a + 0.5 * cs.u.cwiseProduct(au);
        }
        for (Eigen::Index i = 0; i < nj; ++i) S.row(cd.rows[j][i]) = rows.row(i);
    }
    return order_by_auxiliary(S, data.auxiliary, spec.names);
}

ScoreMatrix order_by_auxiliary(const Eigen::MatrixXd& S, const Eigen::VectorXd& aux,
                               std::vector<std::string> names) {
    if (S.rows() != aux.size())
        throw std::invalid_argument("scores and auxiliary lengths disagree");
    for (Eigen::Index i = 0; i < aux.size(); ++i)
        if (!std::isfinite(aux(i)))
            throw std::invalid_argument("non-finite auxiliary value at row " + std::to_string(i));

    std::vector<int> order(S.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return aux(a) < aux(b); });

    ScoreMatrix out;
    out.S.resize(S.rows(), S.cols());
    out.aux_sorted.resize(aux.size());
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        out.S.row(i) = S.row(order[i]);
        out.aux_sorted(i) = aux(order[i]);
    }
    out.order = std::move(order);
    out.names = std::move(names);
    if (out.names.empty())
        for (Eigen::Index c = 0; c < S.cols(); ++c)
            out.names.push_back("s" + std::to_string(c));
    return out;
}

Eigen::VectorXd partial_cumsum(const ScoreMatrix& S, int a, int b) {
    const int n = static_cast<int>(S.n());
    if (a < 1 || a > n || b < 1 || b > n)
        throw std::invalid_argument("partial_cumsum indices out of range");
    const int lo = std::min(a, b), hi = std::max(a, b);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(S.q());
    for (int i = lo; i <= hi; ++i) sum += S.S.row(i - 1).transpose();
    return sum;
}

CumProcess cumulative_process(const ScoreMatrix& S, const Eigen::MatrixXd& info) {
    if (info.rows() != S.q() || info.cols() != S.q())
        throw std::invalid_argument("information matrix dimension disagrees with scores");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    if (es.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the information matrix failed");
    const double lo = es.eigenvalues().minCoeff();
    if (lo <= 0.0)
        throw NumericError("information matrix is not positive definite (smallest eigenvalue " +
                           std::to_string(lo) + ")");

    CumProcess out;
    out.info_root_inv = es.eigenvectors() *
                        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
    const double root_n = std::sqrt(double(S.n()));
    out.B.resize(S.n(), S.q());
    Eigen::VectorXd run = Eigen::VectorXd::Zero(S.q());
    for (Eigen::Index k = 0; k < S.n(); ++k) {
        run += S.S.row(k).transpose();
        out.B.row(k) = (out.info_root_inv * run).transpose() / root_n;
    }
    out.aux_sorted = S.aux_sorted;
    return out;
}

void write_scores_csv(const ScoreMatrix& S, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out.precision(17);
    for (Eigen::Index c = 0; c < S.q(); ++c) out << S.names[c] << ",";
    out << "aux\n";
    for (Eigen::Index i = 0; i < S.n(); ++i) {
        for (Eigen::Index c = 0; c < S.q(); ++c) out << S.S(i, c) << ",";
        out << S.aux_sorted(i) << "\n";
    }
}

ScoreMatrix read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");

    std::vector<std::string> header;
    {
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
    }
    if (header.size() < 2 || header.back() != "aux")
        throw std::invalid_argument("score CSV must end with an 'aux' column");
    const int q = static_cast<int>(header.size()) - 1;

    std::vector<double> buf;
    int nrows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream ss(line);
        std::string f;
        int c = 0;
        while (std::getline(ss, f, ',')) {
            buf.push_back(std::stod(f));
            ++c;
        }
        if (c != q + 1)
            throw std::invalid_argument("score CSV row has " + std::to_string(c) + " fields");
        ++nrows;
    }
    Eigen::MatrixXd raw(nrows, q);
    Eigen::VectorXd aux(nrows);
    for (int i = 0; i < nrows; ++i) {
        for (int c = 0; c < q; ++c) raw(i, c) = buf[size_t(i) * (q + 1) + c];
        aux(i) = buf[size_t(i) * (q + 1) + q];
    }
    header.pop_back();
    return order_by_auxiliary(raw, aux, header);
}

} // namespace snlmm
