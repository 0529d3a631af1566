#include "snlmm/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "snlmm/errors.hpp"

namespace snlmm {

std::string to_string(StatKind kind) {
    switch (kind) {
        case StatKind::CvM: return "CvM";
        case StatKind::DM: return "DM";
        case StatKind::maxLM: return "maxLM";
        case StatKind::SN: return "SN";
        case StatKind::SN_w: return "SN_w";
        case StatKind::SN_ord: return "SN_ord";
    }
    return "?";
}

StatKind stat_kind_from_string(const std::string& s) {
    if (s == "CvM" || s == "cvm") return StatKind::CvM;
    if (s == "DM" || s == "dm") return StatKind::DM;
    if (s == "maxLM" || s == "maxlm") return StatKind::maxLM;
    if (s == "SN" || s == "sn") return StatKind::SN;
    if (s == "SN_w" || s == "sn_w") return StatKind::SN_w;
    if (s == "SN_ord" || s == "sn_ord") return StatKind::SN_ord;
    throw std::invalid_argument("unknown statistic '" + s + "'");
}

double SnTrace::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values) m = std::max(m, v);
    return m;
}

int VSweep::n_fallbacks() const {
    int c = 0;
    for (char f : fallback_direct) c += (f != 0);
    return c;
}

SnWeights SnWeights::custom(std::function<double(double)> f) {
    SnWeights w;
    w.kind = Kind::Custom;
    w.w = std::move(f);
    return w;
}

SnWeights SnWeights::ordinal(std::vector<int> cutpoints) {
    SnWeights w;
    w.kind = Kind::Ordinal;
    w.cutpoints = std::move(cutpoints);
    return w;
}

std::vector<int> ordinal_cutpoints(const Eigen::VectorXd& aux_sorted) {
    std::vector<int> cuts;
    for (Eigen::Index i = 0; i + 1 < aux_sorted.size(); ++i)
        if (aux_sorted(i) < aux_sorted(i + 1)) cuts.push_back(static_cast<int>(i) + 1);
    return cuts;
}

namespace {

void check_cols(const std::vector<int>& cols, Eigen::Index q) {
    if (cols.empty()) throw std::invalid_argument("empty column selection");
    for (int c : cols)
        if (c < 0 || c >= q)
            throw std::invalid_argument("column index " + std::to_string(c) + " out of range");
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& M, const std::vector<int>& cols) {
    Eigen::MatrixXd out(M.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = M.col(cols[i]);
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Traditional statistics on the decorrelated cumulative process
// ---------------------------------------------------------------------------

TestResult cvm_stat(const CumProcess& P, const std::vector<int>& cols) {
    const Eigen::Index n = P.B.rows();
    if (n == 0) throw std::invalid_argument("empty cumulative process");
    check_cols(cols, P.B.cols());
    const Eigen::MatrixXd B = select_cols(P.B, cols);

    TestResult res;
    res.kind = StatKind::CvM;
    res.cols = cols;
    res.trace.k_grid.resize(n);
    res.trace.values.resize(n);
    double sum = 0.0, best = -1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double v = B.row(k).squaredNorm();
        res.trace.k_grid[k] = static_cast<int>(k) + 1;
        res.trace.values[k] = v;
        sum += v;
        if (v > best) {
            best = v;
            res.trace.argmax_k = static_cast<int>(k) + 1;
        }
    }
    res.trace.argmax_aux = P.aux_sorted.size() ? P.aux_sorted(res.trace.argmax_k - 1) : 0.0;
    res.value = sum / double(n);
    return res;
}

TestResult dm_stat(const CumProcess& P, const std::vector<int>& cols) {
    const Eigen::Index n = P.B.rows();
    if (n == 0) throw std::invalid_argument("empty cumulative process");
    check_cols(cols, P.B.cols());
    const Eigen::MatrixXd B = select_cols(P.B, cols);

    TestResult res;
    res.kind = StatKind::DM;
    res.cols = cols;
    res.trace.k_grid.resize(n);
    res.trace.values.resize(n);
    double best = -1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double v = B.row(k).cwiseAbs().maxCoeff();
        res.trace.k_grid[k] = static_cast<int>(k) + 1;
        res.trace.values[k] = v;
        if (v > best) {
            best = v;
            res.trace.argmax_k = static_cast<int>(k) + 1;
        }
    }
    res.trace.argmax_aux = P.aux_sorted.size() ? P.aux_sorted(res.trace.argmax_k - 1) : 0.0;
    res.value = best;
    return res;
}

TestResult maxlm_stat(const CumProcess& P, const std::vector<int>& cols, double trim) {
    const Eigen::Index n = P.B.rows();
    if (n == 0) throw std::invalid_argument("empty cumulative process");
    if (!(trim > 0.0 && trim < 0.5)) throw std::invalid_argument("trim must be in (0, 1/2)");
    check_cols(cols, P.B.cols());
    const int lo = static_cast<int>(std::ceil(double(n) * trim));
    const int hi = static_cast<int>(std::floor(double(n) * (1.0 - trim)));
    if (lo > hi || lo < 1) throw std::invalid_argument("maxLM trim window is empty");
    const Eigen::MatrixXd B = select_cols(P.B, cols);

    TestResult res;
    res.kind = StatKind::maxLM;
    res.cols = cols;
    double best = -1.0;
    for (int k = lo; k <= hi; ++k) {
        const double t = double(k) / double(n);
        const double v = B.row(k - 1).squaredNorm() / (t * (1.0 - t));
        res.trace.k_grid.push_back(k);
        res.trace.values.push_back(v);
        if (v > best) {
            best = v;
            res.trace.argmax_k = k;
        }
    }
    res.trace.argmax_aux = P.aux_sorted.size() ? P.aux_sorted(res.trace.argmax_k - 1) : 0.0;
    res.value = best;
    return res;
}

// ---------------------------------------------------------------------------
// Self-normalization building blocks (direct, definition-level forms)
// ---------------------------------------------------------------------------

Eigen::VectorXd t_vec(const ScoreMatrix& S, int k, const std::vector<int>& cols) {
    const int n = static_cast<int>(S.n());
    if (k < 1 || k > n - 1) throw std::invalid_argument("t_vec requires 1 <= k <= n-1");
    check_cols(cols, S.q());
    const Eigen::VectorXd b1k = partial_cumsum(S, 1, k);
    const Eigen::VectorXd b1n = partial_cumsum(S, 1, n);
    Eigen::VectorXd full = (b1k - (double(k) / n) * b1n) / std::sqrt(double(n));
    Eigen::VectorXd out(cols.size());
    for (size_t i = 0; i < cols.size(); ++i) out(static_cast<Eigen::Index>(i)) = full(cols[i]);
    return out;
}

Eigen::MatrixXd c_matrix(const ScoreMatrix& S, int a, int b, const std::vector<int>& cols) {
    const int n = static_cast<int>(S.n());
    if (a < 1 || a > n || b < 1 || b > n) throw std::invalid_argument("c_matrix indices out of range");
    check_cols(cols, S.q());
    const Eigen::MatrixXd Sc = select_cols(S.S, cols);
    const Eigen::Index qp = Sc.cols();
    const int m = std::abs(b - a) + 1;
    const int dir = (a <= b) ? 1 : -1;

    Eigen::MatrixXd C(qp, m);
    Eigen::VectorXd run = Eigen::VectorXd::Zero(qp);
    for (int j = 1; j <= m; ++j) {
        run += Sc.row(a + dir * (j - 1) - 1).transpose();
        C.col(j - 1) = run;
    }
    const Eigen::VectorXd total = C.col(m - 1);
    for (int j = 1; j <= m; ++j) C.col(j - 1) -= (double(j) / m) * total;
    return C;
}

Eigen::MatrixXd v_matrix(const ScoreMatrix& S, int k, const std::vector<int>& cols) {
    const int n = static_cast<int>(S.n());
    if (k < 1 || k > n - 1) throw std::invalid_argument("v_matrix requires 1 <= k <= n-1");
    const Eigen::MatrixXd Cf = c_matrix(S, 1, k, cols);
    const Eigen::MatrixXd Cb = c_matrix(S, n, k + 1, cols);
    Eigen::MatrixXd V = (Cf * Cf.transpose() + Cb * Cb.transpose()) / (double(n) * double(n));
    return ((V + V.transpose()) / 2.0).eval();
}

// ---------------------------------------------------------------------------
// Recursive sweep
// ---------------------------------------------------------------------------

namespace {

// Shared running-sum state. With prefix sums P_j (forward) and Q_j
// (backward), the two deviation blocks of Eq.-style V_n(k) assemble in
// O(q'^2) per k:
//   F(k) = M2f - (Wf Pk' + Pk Wf')/k + c2(k)/k^2 Pk Pk'
//   G(k) = same in the backward quantities at m = n-k
// and the core-plus-correction split
//   n^2 V(k) = A(k) + U K U',  A = M2f + M2b,  U = [Wf, Pk, Wb, Qm]
// steps by exactly one rank-1 addition and one rank-1 removal in A, which
// feeds the Sherman-Morrison / Woodbury inverse propagation.
struct SweepArrays {
    int n = 0, qp = 0;
    Eigen::MatrixXd P, Q;                 // n x q' prefix sums
    std::vector<Eigen::MatrixXd> Gblk;    // backward deviation block, by m = n-k
    std::vector<Eigen::MatrixXd> M2b;     // backward cross-product sum, by m
    std::vector<Eigen::VectorXd> Wb;      // backward index-weighted sum, by m

    static double c2(int k) { return double(k) * (k + 1.0) * (2.0 * k + 1.0) / 6.0; }
};

SweepArrays build_arrays(const Eigen::MatrixXd& Sc) {
    SweepArrays ar;
    ar.n = static_cast<int>(Sc.rows());
    ar.qp = static_cast<int>(Sc.cols());
    ar.P.resize(ar.n, ar.qp);
    ar.Q.resize(ar.n, ar.qp);
    Eigen::VectorXd run = Eigen::VectorXd::Zero(ar.qp);
    for (int i = 0; i < ar.n; ++i) {
        run += Sc.row(i).transpose();
        ar.P.row(i) = run.transpose();
    }
    run.setZero();
    for (int i = 0; i < ar.n; ++i) {
        run += Sc.row(ar.n - 1 - i).transpose();
        ar.Q.row(i) = run.transpose();
    }

    ar.Gblk.resize(ar.n + 1);
    ar.M2b.resize(ar.n + 1);
    ar.Wb.resize(ar.n + 1);
    Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(ar.qp, ar.qp);
    Eigen::VectorXd W = Eigen::VectorXd::Zero(ar.qp);
    ar.Gblk[0] = M2;
    ar.M2b[0] = M2;
    ar.Wb[0] = W;
    for (int m = 1; m <= ar.n; ++m) {
        const Eigen::VectorXd Qm = ar.Q.row(m - 1).transpose();
        M2.noalias() += Qm * Qm.transpose();
        W += double(m) * Qm;
        ar.M2b[m] = M2;
        ar.Wb[m] = W;
        Eigen::MatrixXd G = M2 - (W * Qm.transpose() + Qm * W.transpose()) / double(m) +
                            (SweepArrays::c2(m) / (double(m) * double(m))) * (Qm * Qm.transpose());
        ar.Gblk[m] = ((G + G.transpose()) / 2.0).eval();
    }
    return ar;
}

// Admissible change points: the full 1..n-1 for a single column; trimmed
// to [q'+1, n-q'-1] for q' > 1, where the boundary normalizers are rank
// deficient.
void admissible_range(int n, int qp, int& k_lo, int& k_hi) {
    k_lo = qp == 1 ? 1 : qp + 1;
    k_hi = qp == 1 ? n - 1 : n - qp - 1;
}

// Scalar fast path: everything is a running double.
VSweep sweep_scalar(const Eigen::VectorXd& s) {
    const int n = static_cast<int>(s.size());
    const int k_lo = 1, k_hi = n - 1;
    VSweep out;

    std::vector<double> P(n), Q(n);
    double run = 0.0;
    for (int i = 0; i < n; ++i) P[i] = (run += s(i));
    run = 0.0;
    for (int i = 0; i < n; ++i) Q[i] = (run += s(n - 1 - i));

    std::vector<double> Gb(n + 1, 0.0);
    double M2 = 0.0, W = 0.0;
    for (int m = 1; m <= n; ++m) {
        const double q = Q[m - 1];
        M2 += q * q;
        W += m * q;
        Gb[m] = M2 - 2.0 * W * q / m + SweepArrays::c2(m) / (double(m) * double(m)) * q * q;
    }

    const double n2 = double(n) * double(n);
    double M2f = 0.0, Wf = 0.0;
    for (int k = 1; k <= k_hi; ++k) {
        const double p = P[k - 1];
        M2f += p * p;
        Wf += k * p;
        if (k < k_lo) continue;
        const double F = M2f - 2.0 * Wf * p / k + SweepArrays::c2(k) / (double(k) * double(k)) * p * p;
        const double v = (F + Gb[n - k]) / n2;
        out.ks.push_back(k);
        out.v.push_back(Eigen::MatrixXd::Constant(1, 1, v));
        out.min_eigval.push_back(v);
        const bool ok = v > 0.0 && std::isfinite(v);
        out.singular.push_back(ok ? 0 : 1);
        out.fallback_direct.push_back(0);
        out.v_inv.push_back(Eigen::MatrixXd::Constant(1, 1, ok ? 1.0 / v : 0.0));
    }
    return out;
}

} // namespace

VSweep v_matrix_sweep_recursive(const ScoreMatrix& S, const std::vector<int>& cols) {
    check_cols(cols, S.q());
    const int qp = static_cast<int>(cols.size());
    const int n = static_cast<int>(S.n());
    if (n < 2 * (qp + 1))
        throw std::invalid_argument("need n >= 2(q'+1) for the self-normalizer sweep");
    const Eigen::MatrixXd Sc = select_cols(S.S, cols);
    if (qp == 1) return sweep_scalar(Sc.col(0));

    const SweepArrays ar = build_arrays(Sc);
    int k_lo, k_hi;
    admissible_range(n, qp, k_lo, k_hi);
    const double n2 = double(n) * double(n);

    VSweep out;
    Eigen::MatrixXd M2f = Eigen::MatrixXd::Zero(qp, qp);
    Eigen::VectorXd Wf = Eigen::VectorXd::Zero(qp);
    for (int k = 1; k < k_lo; ++k) {
        const Eigen::VectorXd Pk = ar.P.row(k - 1).transpose();
        M2f.noalias() += Pk * Pk.transpose();
        Wf += double(k) * Pk;
    }

    // A(k) = M2f(k) + M2b(n-k) and its inverse, propagated by rank-1 updates.
    Eigen::MatrixXd Ainv;
    bool chain_ok = false;
    int since_refresh = 0;

    auto refresh_chain = [&](int k) {
        Eigen::MatrixXd Ak = M2f + ar.M2b[n - k];
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Ak);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            ldlt.vectorD().minCoeff() > 0.0) {
            Ainv = ldlt.solve(Eigen::MatrixXd::Identity(qp, qp));
            chain_ok = true;
        } else {
            chain_ok = false;
        }
        since_refresh = 0;
    };

    // Rank-1 update of Ainv for A <- A + sgn * vv'. Returns false on a
    // denominator breakdown.
    auto sm_update = [&](const Eigen::VectorXd& v, double sgn) -> bool {
        const Eigen::VectorXd w = Ainv * v;
        const double den = 1.0 + sgn * v.dot(w);
        if (!(std::abs(den) > 1e-12)) return false;
        Ainv.noalias() -= (sgn / den) * (w * w.transpose());
        return true;
    };

    for (int k = k_lo; k <= k_hi; ++k) {
        const Eigen::VectorXd Pk = ar.P.row(k - 1).transpose();
        M2f.noalias() += Pk * Pk.transpose();
        Wf += double(k) * Pk;

        const int m = n - k;
        const Eigen::VectorXd Qm = ar.Q.row(m - 1).transpose();

        // assembled V(k)
        Eigen::MatrixXd F = M2f - (Wf * Pk.transpose() + Pk * Wf.transpose()) / double(k) +
                            (SweepArrays::c2(k) / (double(k) * double(k))) * (Pk * Pk.transpose());
        Eigen::MatrixXd V = (F + ar.Gblk[m]) / n2;
        V = ((V + V.transpose()) / 2.0).eval();

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V, Eigen::EigenvaluesOnly);
        const double min_eig = es.eigenvalues().minCoeff();

        out.ks.push_back(k);
        out.v.push_back(V);
        out.min_eigval.push_back(min_eig);

        // inverse chain: on the first k (or after breakdown) seed directly
        if (k == k_lo || !chain_ok) {
            refresh_chain(k);
        } else {
            // A(k) = A(k-1) + Pk Pk' - Q_{m+1} Q_{m+1}'
            const Eigen::VectorXd Qdrop = ar.Q.row(m).transpose(); // Q_{m+1}
            if (!sm_update(Pk, +1.0) || !sm_update(Qdrop, -1.0)) refresh_chain(k);
            if (++since_refresh >= 128) refresh_chain(k);
        }

        bool ok = false;
        char fell_back = 0;
        Eigen::MatrixXd Vinv(qp, qp);
        if (chain_ok) {
            // Woodbury: n^2 V = A + U K U', K^{-1} known in closed form
            Eigen::MatrixXd U(qp, 4);
            U.col(0) = Wf;
            U.col(1) = Pk;
            U.col(2) = ar.Wb[m];
            U.col(3) = Qm;
            Eigen::Matrix4d Kinv = Eigen::Matrix4d::Zero();
            Kinv(0, 0) = -SweepArrays::c2(k);
            Kinv(0, 1) = Kinv(1, 0) = -double(k);
            Kinv(2, 2) = -SweepArrays::c2(m);
            Kinv(2, 3) = Kinv(3, 2) = -double(m);
            const Eigen::MatrixXd AiU = Ainv * U;
            const Eigen::Matrix4d mid = Kinv + U.transpose() * AiU;
            Eigen::FullPivLU<Eigen::Matrix4d> lu(mid);
            if (lu.isInvertible()) {
                Vinv = n2 * (Ainv - AiU * lu.solve(AiU.transpose()));
                ok = true;
            }
        }
        if (!ok) {
            // direct inversion fallback for this k
            Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                ldlt.vectorD().minCoeff() > 0.0) {
                Vinv = ldlt.solve(Eigen::MatrixXd::Identity(qp, qp));
                ok = true;
                fell_back = 1;
            }
        }

        out.fallback_direct.push_back(fell_back);
        out.singular.push_back(ok ? 0 : 1);
        out.v_inv.push_back(ok ? Eigen::MatrixXd(((Vinv + Vinv.transpose()) / 2.0).eval())
                               : Eigen::MatrixXd::Zero(qp, qp));
    }
    return out;
}

VSweep v_matrix_sweep_direct(const ScoreMatrix& S, const std::vector<int>& cols) {
    check_cols(cols, S.q());
    const int qp = static_cast<int>(cols.size());
    const int n = static_cast<int>(S.n());
    if (n < 2 * (qp + 1))
        throw std::invalid_argument("need n >= 2(q'+1) for the self-normalizer sweep");

    int k_lo, k_hi;
    admissible_range(n, qp, k_lo, k_hi);
    VSweep out;
    for (int k = k_lo; k <= k_hi; ++k) {
        Eigen::MatrixXd V = v_matrix(S, k, cols);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V, Eigen::EigenvaluesOnly);
        out.ks.push_back(k);
        out.min_eigval.push_back(es.eigenvalues().minCoeff());
        out.fallback_direct.push_back(0);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
        const bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                        ldlt.vectorD().minCoeff() > 0.0;
        out.singular.push_back(ok ? 0 : 1);
        out.v_inv.push_back(ok ? Eigen::MatrixXd(ldlt.solve(Eigen::MatrixXd::Identity(qp, qp)))
                               : Eigen::MatrixXd::Zero(qp, qp));
        out.v.push_back(std::move(V));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-normalized statistic
// ---------------------------------------------------------------------------

TestResult sn_stat(const ScoreMatrix& S, const std::vector<int>& cols, const SnWeights& weights) {
    check_cols(cols, S.q());
    const int qp = static_cast<int>(cols.size());
    const int n = static_cast<int>(S.n());
    if (n < 2 * (qp + 1))
        throw std::invalid_argument("self-normalized test needs n >= 2(q'+1), got n = " +
                                    std::to_string(n));

    const VSweep sweep = v_matrix_sweep_recursive(S, cols);

    std::vector<char> wanted;
    std::vector<int> unreachable;
    if (weights.kind == SnWeights::Kind::Ordinal) {
        wanted.assign(n + 1, 0);
        int k_lo, k_hi;
        admissible_range(n, qp, k_lo, k_hi);
        for (int k : weights.cutpoints) {
            if (k >= k_lo && k <= k_hi)
                wanted[k] = 1;
            else
                unreachable.push_back(k);
        }
    }

    // prefix sums for T_n(k), restricted columns
    const Eigen::MatrixXd Sc = select_cols(S.S, cols);
    Eigen::MatrixXd P(n, qp);
    Eigen::VectorXd run = Eigen::VectorXd::Zero(qp);
    for (int i = 0; i < n; ++i) {
        run += Sc.row(i).transpose();
        P.row(i) = run.transpose();
    }
    const Eigen::VectorXd total = P.row(n - 1).transpose();
    const double root_n = std::sqrt(double(n));

    TestResult res;
    res.kind = weights.kind == SnWeights::Kind::None
                   ? StatKind::SN
                   : (weights.kind == SnWeights::Kind::Custom ? StatKind::SN_w : StatKind::SN_ord);
    res.cols = cols;

    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < sweep.ks.size(); ++i) {
        const int k = sweep.ks[i];
        if (!wanted.empty() && !wanted[k]) continue;

        const double tr = sweep.v[i].trace();
        if (sweep.singular[i] || sweep.min_eigval[i] < 1e-10 * tr / qp) {
            res.trace.skipped.push_back(k);
            continue;
        }
        const double t = double(k) / n;
        double w = 1.0;
        if (weights.kind == SnWeights::Kind::Custom)
            w = weights.w(t);
        else if (weights.kind == SnWeights::Kind::Ordinal)
            w = 1.0 / (t * (1.0 - t));

        const Eigen::VectorXd T = (P.row(k - 1).transpose() - t * total) / root_n;
        const double val = w * T.dot(sweep.v_inv[i] * T);
        res.trace.k_grid.push_back(k);
        res.trace.values.push_back(val);
        if (val > best) {
            best = val;
            res.trace.argmax_k = k;
        }
    }
    for (int k : unreachable) res.trace.skipped.push_back(k);
    if (res.trace.k_grid.empty())
        throw NumericError("self-normalizer was singular at every admissible k");
    res.value = best;
    res.trace.argmax_aux = S.aux_sorted(res.trace.argmax_k - 1);
    return res;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void write_trace_csv(const TestResult& result, const Eigen::VectorXd& aux_sorted,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
    out.precision(17);
    const bool crit = result.has_critical_value();
    out << "k,aux,value" << (crit ? ",critical_value" : "") << "\n";
    for (size_t i = 0; i < result.trace.k_grid.size(); ++i) {
        const int k = result.trace.k_grid[i];
        out << k << "," << aux_sorted(k - 1) << "," << result.trace.values[i];
        if (crit) out << "," << result.critical_value;
        out << "\n";
    }
}

std::string test_result_json(const TestResult& result, const std::vector<std::string>& names) {
    nlohmann::json j;
    j["statistic"] = to_string(result.kind);
    j["value"] = result.value;
    if (result.has_critical_value()) {
        j["critical_value"] = result.critical_value;
        j["alpha"] = result.alpha;
        j["rejects"] = result.rejects();
    }
    if (result.has_p_value()) j["p_value"] = result.p_value;
    j["argmax_k"] = result.trace.argmax_k;
    j["argmax_aux"] = result.trace.argmax_aux;
    j["skipped_k"] = result.trace.skipped.size();
    std::vector<std::string> colnames;
    for (int c : result.cols)
        colnames.push_back(c < static_cast<int>(names.size()) ? names[c] : std::to_string(c));
    j["params"] = colnames;
    return j.dump(2);
}

} // namespace snlmm
