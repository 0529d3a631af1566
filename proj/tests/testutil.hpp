// Independent oracles for the test suites: hand-rolled linear algebra,
// definition-level statistic implementations, finite differences, and a
// second Brownian-bridge simulator. Nothing here calls back into the
// library's computational paths beyond plain data types.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "snlmm/model.hpp"
#include "snlmm/scores.hpp"

namespace oracle {

// Gauss-Jordan inverse with partial pivoting.
inline Eigen::MatrixXd gj_inverse(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) throw std::runtime_error("gj_inverse: singular matrix");
        a.row(col).swap(a.row(piv));
        inv.row(col).swap(inv.row(piv));
        const double d = a(col, col);
        a.row(col) /= d;
        inv.row(col) /= d;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f != 0.0) {
                a.row(r) -= f * a.row(col);
                inv.row(r) -= f * inv.row(col);
            }
        }
    }
    return inv;
}

// log |A| by Gaussian elimination (A assumed positive definite).
inline double gj_logdet(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    double logdet = 0.0;
    double sign = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) throw std::runtime_error("gj_logdet: singular matrix");
        if (piv != col) {
            a.row(col).swap(a.row(piv));
            sign = -sign;
        }
        const double d = a(col, col);
        sign *= (d < 0 ? -1.0 : 1.0);
        logdet += std::log(std::abs(d));
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / d;
            if (f != 0.0) a.row(r) -= f * a.row(col);
        }
    }
    if (sign < 0) throw std::runtime_error("gj_logdet: negative determinant");
    return logdet;
}

// Brute-force marginal log-likelihood of one cluster via explicit dense
// inverse and determinant.
inline double cluster_loglik(const snlmm::ModelSpec& spec, const snlmm::ThetaVector& theta,
                             const snlmm::ClusterData& data, int j) {
    const auto& Z = data.Z[j];
    const Eigen::Index nj = Z.rows();
    Eigen::MatrixXd V = Z * theta.G(spec) * Z.transpose();
    V.diagonal().array() += theta.sigma_r2(spec);
    const Eigen::VectorXd r = data.y[j] - data.X[j] * theta.beta(spec);
    const Eigen::MatrixXd Vinv = gj_inverse(V);
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * (double(nj) * log2pi + gj_logdet(V) + r.dot(Vinv * r));
}

inline double brute_loglik(const snlmm::ModelSpec& spec, const snlmm::ThetaVector& theta,
                           const snlmm::ClusterData& data) {
    double ll = 0.0;
    for (int j = 0; j < data.J(); ++j) ll += cluster_loglik(spec, theta, data, j);
    return ll;
}

// Central finite-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_h = 1e-4) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = rel_h * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        g(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

// Central finite-difference Hessian.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double rel_h = 1e-3) {
    const Eigen::Index q = x.size();
    Eigen::MatrixXd H(q, q);
    const double f0 = f(x);
    std::vector<double> h(q);
    for (Eigen::Index k = 0; k < q; ++k) h[k] = rel_h * std::max(1.0, std::abs(x(k)));
    for (Eigen::Index k = 0; k < q; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h[k];
        xm(k) -= h[k];
        H(k, k) = (f(xp) - 2.0 * f0 + f(xm)) / (h[k] * h[k]);
        for (Eigen::Index l = k + 1; l < q; ++l) {
            Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
            xpp(k) += h[k]; xpp(l) += h[l];
            xpm(k) += h[k]; xpm(l) -= h[l];
            xmp(k) -= h[k]; xmp(l) += h[l];
            xmm(k) -= h[k]; xmm(l) -= h[l];
            H(k, l) = H(l, k) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[k] * h[l]);
        }
    }
    return H;
}

// E_{theta0}[loglik(theta)] for the marginal Gaussian model; its negative
// Hessian at theta = theta0 is the expected information, exactly.
inline double expected_loglik(const snlmm::ModelSpec& spec, const Eigen::VectorXd& theta_values,
                              const snlmm::ThetaVector& theta0, const snlmm::ClusterData& data) {
    snlmm::ThetaVector theta;
    theta.values = theta_values;
    constexpr double log2pi = 1.8378770664093454836;
    double total = 0.0;
    for (int j = 0; j < data.J(); ++j) {
        const auto& Z = data.Z[j];
        const Eigen::Index nj = Z.rows();
        Eigen::MatrixXd V = Z * theta.G(spec) * Z.transpose();
        V.diagonal().array() += theta.sigma_r2(spec);
        Eigen::MatrixXd V0 = Z * theta0.G(spec) * Z.transpose();
        V0.diagonal().array() += theta0.sigma_r2(spec);
        const Eigen::MatrixXd Vinv = gj_inverse(V);
        const Eigen::VectorXd dmu = data.X[j] * (theta0.beta(spec) - theta.beta(spec));
        total += -0.5 * (double(nj) * log2pi + gj_logdet(V) + (Vinv * V0).trace() +
                         dmu.dot(Vinv * dmu));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Definition-level statistics on an ordered score matrix (rows of S).
// ---------------------------------------------------------------------------

// B*_{a,b} as a total (works for both directions).
inline Eigen::VectorXd bstar(const Eigen::MatrixXd& S, int a, int b) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(S.cols());
    for (int i = std::min(a, b); i <= std::max(a, b); ++i) s += S.row(i - 1).transpose();
    return s;
}

// C_{a,b} built column by column from the definition.
inline Eigen::MatrixXd brute_c(const Eigen::MatrixXd& S, int a, int b) {
    const int m = std::abs(a - b) + 1;
    Eigen::MatrixXd C(S.cols(), m);
    for (int j = 1; j <= m; ++j) {
        const int end = (a <= b) ? a + j - 1 : a - j + 1;
        C.col(j - 1) = bstar(S, a, end) - (double(j) / m) * bstar(S, a, b);
    }
    return C;
}

inline Eigen::MatrixXd brute_v(const Eigen::MatrixXd& S, int k) {
    const int n = static_cast<int>(S.rows());
    const Eigen::MatrixXd Cf = brute_c(S, 1, k);
    const Eigen::MatrixXd Cb = brute_c(S, n, k + 1);
    return (Cf * Cf.transpose() + Cb * Cb.transpose()) / (double(n) * double(n));
}

struct BruteSn {
    double value = -1.0;
    int argmax_k = -1;
    std::vector<double> per_k; // indexed by k - k_lo
    int k_lo = 1, k_hi = 0;
};

// Literal sup_k T'V^{-1}T with dense Gauss-Jordan inversion; k range
// matching the library convention (full for one column, trimmed otherwise).
inline BruteSn brute_sn(const Eigen::MatrixXd& S) {
    const int n = static_cast<int>(S.rows());
    const int qp = static_cast<int>(S.cols());
    BruteSn out;
    out.k_lo = qp == 1 ? 1 : qp + 1;
    out.k_hi = qp == 1 ? n - 1 : n - qp - 1;
    for (int k = out.k_lo; k <= out.k_hi; ++k) {
        const Eigen::VectorXd T =
            (bstar(S, 1, k) - (double(k) / n) * bstar(S, 1, n)) / std::sqrt(double(n));
        const Eigen::MatrixXd V = brute_v(S, k);
        double val;
        try {
            val = T.dot(gj_inverse(V) * T);
        } catch (const std::runtime_error&) {
            out.per_k.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        out.per_k.push_back(val);
        if (val > out.value) {
            out.value = val;
            out.argmax_k = k;
        }
    }
    return out;
}

// CvM through the partial-cumulative-sum identity: n^{-2} sum_k B*' I^{-1} B*.
inline double brute_cvm_partial(const Eigen::MatrixXd& S, const Eigen::MatrixXd& info) {
    const int n = static_cast<int>(S.rows());
    const Eigen::MatrixXd info_inv = gj_inverse(info);
    double total = 0.0;
    for (int k = 1; k <= n; ++k) {
        const Eigen::VectorXd b = bstar(S, 1, k);
        total += b.dot(info_inv * b);
    }
    return total / (double(n) * double(n));
}

// ---------------------------------------------------------------------------
// Second, independently coded bridge simulator (Box-Muller).
// ---------------------------------------------------------------------------

inline std::vector<double> boxmuller_bridge(int n_g, std::mt19937& rng) {
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    std::vector<double> b(n_g);
    double run = 0.0;
    int i = 0;
    while (i < n_g) {
        const double u1 = unif(rng), u2 = unif(rng);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double z1 = rad * std::cos(2.0 * M_PI * u2);
        const double z2 = rad * std::sin(2.0 * M_PI * u2);
        for (double z : {z1, z2}) {
            if (i >= n_g) break;
            run += z / std::sqrt(double(n_g));
            b[i++] = run;
        }
    }
    const double total = run;
    for (int k = 0; k < n_g; ++k) b[k] -= (double(k + 1) / n_g) * total;
    return b;
}

// ---------------------------------------------------------------------------
// Small data helpers
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd random_scores(int n, int q, std::mt19937_64& rng, bool zero_sum = false) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd S(n, q);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < q; ++c) S(i, c) = normal(rng);
    if (zero_sum) S.rowwise() -= S.colwise().mean();
    return S;
}

inline snlmm::ScoreMatrix as_ordered_scores(const Eigen::MatrixXd& S) {
    Eigen::VectorXd aux(S.rows());
    for (Eigen::Index i = 0; i < S.rows(); ++i) aux(i) = double(i + 1);
    return snlmm::order_by_auxiliary(S, aux);
}

inline Eigen::MatrixXd random_spd(int q, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd A(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) A(i, j) = normal(rng);
    return A * A.transpose() + 0.5 * double(q) * Eigen::MatrixXd::Identity(q, q);
}

} // namespace oracle
