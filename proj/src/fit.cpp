#include "snlmm/fit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "snlmm/detail/cluster.hpp"
#include "snlmm/errors.hpp"

namespace snlmm {

namespace {

// Unconstrained search parameterization: eta = (vech of Lambda with log
// diagonal, log s2), where G = s2 * Lambda Lambda'. Beta is profiled out by
// GLS, so the search runs over nvc+1 coordinates only.
struct EtaParam {
    int r;
    int dim() const { return r * (r + 1) / 2 + 1; }

    Eigen::MatrixXd lambda(const Eigen::VectorXd& eta) const {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(r, r);
        int idx = 0;
        for (int b = 0; b < r; ++b)
            for (int a = b; a < r; ++a, ++idx) L(a, b) = (a == b) ? std::exp(eta(idx)) : eta(idx);
        return L;
    }
    double s2(const Eigen::VectorXd& eta) const { return std::exp(eta(dim() - 1)); }
};

// Profiled objective state: -loglik at beta = GLS(eta), plus its gradient
// with respect to eta. Uses the Woodbury identity per cluster; V_j is
// positive definite for every eta, so evaluation cannot fail.
struct ProfiledEval {
    double neg_loglik = 0.0;
    Eigen::VectorXd grad;  // d(-loglik)/d eta
    Eigen::VectorXd beta;
};

constexpr double kLog2Pi = 1.8378770664093454836;

ProfiledEval eval_profiled(const EtaParam& par, const Eigen::VectorXd& eta,
                           const ClusterData& data) {
    const int r = par.r;
    const int p = data.p;
    const Eigen::MatrixXd L = par.lambda(eta);
    const double s2 = par.s2(eta);
    const int J = data.J();

    struct ClusterWork {
        Eigen::MatrixXd B;      // Z Lambda
        Eigen::LLT<Eigen::MatrixXd> cholC; // I_r + B'B
        double logdetV = 0.0;
    };
    std::vector<ClusterWork> work(J);

    // V^{-1} x = s2^{-1} (x - B C^{-1} B' x), C = I + B'B
    auto vinv_apply = [&](const ClusterWork& w, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        return (x - w.B * w.cholC.solve(w.B.transpose() * x)) / s2;
    };

    Eigen::MatrixXd XtVX = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd XtVy = Eigen::VectorXd::Zero(p);
    double logdet_total = 0.0;
    for (int j = 0; j < J; ++j) {
        auto& w = work[j];
        w.B = data.Z[j] * L;
        Eigen::MatrixXd C = Eigen::MatrixXd::Identity(r, r) + w.B.transpose() * w.B;
        w.cholC.compute(C);
        w.logdetV = double(data.y[j].size()) * std::log(s2) +
                    2.0 * w.cholC.matrixLLT().diagonal().array().log().sum();
        logdet_total += w.logdetV;
        const Eigen::MatrixXd VinvX = vinv_apply(w, data.X[j]);
        XtVX.noalias() += data.X[j].transpose() * VinvX;
        XtVy.noalias() += VinvX.transpose() * data.y[j];
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(XtVX);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw RankDeficientError("fixed-effect design is rank deficient");
    ProfiledEval out;
    out.beta = ldlt.solve(XtVy);

    out.grad = Eigen::VectorXd::Zero(par.dim());
    double quad_total = 0.0;
    for (int j = 0; j < J; ++j) {
        const auto& w = work[j];
        const Eigen::VectorXd resid = data.y[j] - data.X[j] * out.beta;
        const Eigen::VectorXd u = vinv_apply(w, resid);
        quad_total += resid.dot(u);

        // score wrt omega_{a,b}: dV = s2 * deriv * (z_a w_b' + w_b z_a'),
        // w_b = column b of Z Lambda, deriv = L_aa on the log diagonal
        const Eigen::MatrixXd M = data.Z[j].transpose() * vinv_apply(w, w.B); // Z'Vinv(ZL), r x r
        const Eigen::VectorXd zu = data.Z[j].transpose() * u;                 // Z'u
        const Eigen::VectorXd wu = w.B.transpose() * u;                       // (ZL)'u
        int idx = 0;
        for (int b = 0; b < r; ++b) {
            for (int a = b; a < r; ++a, ++idx) {
                const double deriv = (a == b) ? L(a, a) : 1.0;
                const double score = deriv * s2 * (zu(a) * wu(b) - M(a, b));
                out.grad(idx) += -score;  // minimizing -loglik
            }
        }
        // score wrt log s2: dV = V  =>  -n_j/2 + u'resid/2
        out.grad(par.dim() - 1) += -(-0.5 * double(data.y[j].size()) + 0.5 * u.dot(resid));
    }
    out.neg_loglik = 0.5 * (double(data.n) * kLog2Pi + logdet_total + quad_total);
    return out;
}

// Plain BFGS with backtracking line search on the profiled objective.
struct BfgsResult {
    Eigen::VectorXd eta;
    Eigen::VectorXd beta;
    int iterations = 0;
    bool stalled = false;
};

BfgsResult minimize_profiled(const EtaParam& par, Eigen::VectorXd eta, const ClusterData& data,
                             int max_iter, bool verbose) {
    const int dim = par.dim();
    const double box = 25.0;
    auto clamp = [&](Eigen::VectorXd v) {
        return v.cwiseMax(-box).cwiseMin(box);
    };
    eta = clamp(eta);

    ProfiledEval cur = eval_profiled(par, eta, data);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
    BfgsResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        const double gnorm = cur.grad.cwiseAbs().maxCoeff();
        if (verbose)
            std::fprintf(stderr, "  bfgs it=%d f=%.10f |g|=%.3e\n", it, cur.neg_loglik, gnorm);
        if (gnorm < 1e-9 * std::max(1.0, std::abs(cur.neg_loglik))) break;

        Eigen::VectorXd dir = -(H * cur.grad);
        if (dir.dot(cur.grad) >= 0.0) {  // not a descent direction, reset
            H.setIdentity();
            dir = -cur.grad;
        }
        double step = 1.0;
        const double slope = dir.dot(cur.grad);
        ProfiledEval next;
        Eigen::VectorXd eta_next;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            eta_next = clamp(eta + step * dir);
            next = eval_profiled(par, eta_next, data);
            if (next.neg_loglik <= cur.neg_loglik + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.stalled = true;
            break;
        }
        const Eigen::VectorXd s = eta_next - eta;
        const Eigen::VectorXd yv = next.grad - cur.grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const Eigen::VectorXd Hy = H * yv;
            const double yHy = yv.dot(Hy);
            H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
                 (Hy * s.transpose() + s * Hy.transpose()) / sy;
        }
        eta = eta_next;
        cur = next;
        if (s.cwiseAbs().maxCoeff() < 1e-14) break;
    }
    res.eta = eta;
    res.beta = cur.beta;
    res.iterations = it;
    return res;
}

// Boundary detection on the reporting scale.
std::vector<int> detect_boundary(const ModelSpec& spec, const ThetaVector& theta) {
    const Eigen::MatrixXd G = theta.G(spec);
    const double s2 = theta.sigma_r2(spec);
    const double scale = G.trace() / spec.r + s2;
    std::vector<int> out;
    std::vector<bool> var_bdry(spec.r, false);
    for (int a = 0; a < spec.r; ++a) {
        if (G(a, a) < 1e-6 * scale) {
            var_bdry[a] = true;
            out.push_back(spec.cov_index(a, a));
        }
    }
    for (int b = 0; b < spec.r; ++b) {
        for (int a = b + 1; a < spec.r; ++a) {
            bool bdry = var_bdry[a] || var_bdry[b];
            if (!bdry) {
                const double rho = G(a, b) / std::sqrt(G(a, a) * G(b, b));
                bdry = std::abs(rho) > 1.0 - 1e-6;
            }
            if (bdry) out.push_back(spec.cov_index(a, b));
        }
    }
    if (s2 < 1e-8 * scale) out.push_back(spec.resid_index());
    std::sort(out.begin(), out.end());
    return out;
}

bool theta_valid(const ModelSpec& spec, const ThetaVector& theta) {
    if (!(theta.sigma_r2(spec) > 0.0)) return false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(theta.G(spec));
    if (ldlt.info() != Eigen::Success) return false;
    return ldlt.vectorD().minCoeff() >= -1e-12 * std::max(1.0, theta.G(spec).trace());
}

} // namespace

FittedLmm fit_ml(const ModelSpec& spec, const LongDataset& data, const FitOptions& opts) {
    return fit_ml(spec, ClusterData::split(data), opts);
}

FittedLmm fit_ml(const ModelSpec& spec, const ClusterData& data, const FitOptions& opts) {
    if (data.p != spec.p || data.r != spec.r)
        throw std::invalid_argument("data dimensions disagree with the model spec");
    if (data.n <= spec.q())
        throw std::invalid_argument("need n > q observations to fit");

    // OLS start; doubles as the rank check.
    Eigen::MatrixXd Xall(data.n, spec.p);
    Eigen::VectorXd yall(data.n);
    Eigen::Index pos = 0;
    for (int j = 0; j < data.J(); ++j) {
        const auto nj = data.y[j].size();
        Xall.middleRows(pos, nj) = data.X[j];
        yall.segment(pos, nj) = data.y[j];
        pos += nj;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xall);
    if (qr.rank() < spec.p) throw RankDeficientError("fixed-effect design is rank deficient");
    const Eigen::VectorXd beta_ols = qr.solve(yall);
    const double mse = (yall - Xall * beta_ols).squaredNorm() / double(data.n - spec.p);

    EtaParam par{spec.r};
    Eigen::VectorXd eta0 = Eigen::VectorXd::Zero(par.dim());
    {
        int idx = 0;
        for (int b = 0; b < spec.r; ++b)
            for (int a = b; a < spec.r; ++a, ++idx) eta0(idx) = (a == b) ? std::log(0.5) : 0.0;
        eta0(par.dim() - 1) = std::log(std::max(mse * 0.5, 1e-12));
    }

    const auto bfgs = minimize_profiled(par, eta0, data, opts.max_iter, opts.verbose);

    const Eigen::MatrixXd L = par.lambda(bfgs.eta);
    const double s2 = par.s2(bfgs.eta);
    ThetaVector theta =
        ThetaVector::from_parts(spec, bfgs.beta, s2 * (L * L.transpose()), s2);

    FittedLmm fit;
    fit.spec = spec;
    fit.iterations = bfgs.iterations;
    fit.boundary_params = detect_boundary(spec, theta);

    // Fisher-scoring polish on the reporting scale, restricted to interior
    // coordinates, to push the reported gradient below grad_tol.
    const int q = spec.q();
    std::vector<int> interior;
    for (int k = 0; k < q; ++k)
        if (!std::binary_search(fit.boundary_params.begin(), fit.boundary_params.end(), k))
            interior.push_back(k);

    double ll = marginal_loglik(spec, theta, data);
    Eigen::VectorXd g = score_total(spec, theta, data);
    const double polish_tol = opts.grad_tol * 1e-2;
    const int max_polish = 60;
    int polish_it = 0;
    for (; polish_it < max_polish; ++polish_it) {
        double gint = 0.0;
        for (int k : interior) gint = std::max(gint, std::abs(g(k)));
        if (gint <= polish_tol) break;

        const Eigen::MatrixXd info = expected_information(spec, theta, data);
        const int m = static_cast<int>(interior.size());
        Eigen::MatrixXd info_sub(m, m);
        Eigen::VectorXd g_sub(m);
        for (int a = 0; a < m; ++a) {
            g_sub(a) = g(interior[a]);
            for (int b = 0; b < m; ++b) info_sub(a, b) = info(interior[a], interior[b]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info_sub);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(g_sub);
        } else {
            info_sub.diagonal().array() += 1e-8 * info_sub.trace() / m + 1e-300;
            step = info_sub.ldlt().solve(g_sub);
        }

        bool improved = false;
        double alpha = 1.0;
        for (int h = 0; h < 30; ++h, alpha *= 0.5) {
            ThetaVector cand = theta;
            for (int a = 0; a < m; ++a) cand.values(interior[a]) += alpha * step(a);
            if (!theta_valid(spec, cand)) continue;
            double ll_c;
            try {
                ll_c = marginal_loglik(spec, cand, data);
            } catch (const SingularModelError&) {
                continue;
            }
            if (ll_c >= ll - 1e-10 * std::abs(ll)) {
                const Eigen::VectorXd g_c = score_total(spec, cand, data);
                double gint_c = 0.0;
                for (int k : interior) gint_c = std::max(gint_c, std::abs(g_c(k)));
                if (ll_c > ll || gint_c < gint) {
                    theta = cand;
                    ll = ll_c;
                    g = g_c;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) break;
    }
    fit.iterations += polish_it;

    // Re-detect: the polish can move parameters off or onto the boundary.
    fit.boundary_params = detect_boundary(spec, theta);
    fit.theta_hat = theta;
    fit.loglik = ll;
    fit.grad_norm = g.cwiseAbs().maxCoeff();
    fit.info = expected_information(spec, theta, data);

    bool ok = true;
    for (int k = 0; k < q; ++k) {
        const bool bdry = fit.is_boundary(k);
        if (!bdry && std::abs(g(k)) > opts.grad_tol) ok = false;
        // at a variance floor the score may point outward (negative);
        // only an inward pull above tolerance contradicts optimality
        if (bdry && k >= spec.p && g(k) > opts.grad_tol) ok = false;
    }
    fit.converged = ok;
    return fit;
}

} // namespace snlmm
