#include "cqrrpt/analysis.hh"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cqrrpt/linalg.hh"

namespace cqrrpt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRankDrop = 1e-12;

int64_t numerical_rank(const std::vector<double> &sigma) {
    if (sigma.empty() || sigma.front() == 0.0) return 0;
    int64_t r = 0;
    for (double s : sigma)
        if (s > kRankDrop * sigma.front()) ++r;
    return r;
}

// ||A^{-1} B||_2 for upper-triangular A; +inf when A is singular.
double inverse_block_norm(const DenseMatrix &a, const DenseMatrix &b) {
    if (b.cols() == 0) return 0.0;
    for (int64_t i = 0; i < a.rows(); ++i)
        if (a(i, i) == 0.0) return kInf;
    DenseMatrix x = b;
    for (int64_t j = 0; j < x.cols(); ++j) solve_upper(a, x.col(j));
    return spectral_norm(x);
}

// Residual (I - Q Q^T) X for a column-orthonormal Q (possibly with 0 columns).
DenseMatrix project_out(const DenseMatrix &q, const DenseMatrix &x) {
    if (q.cols() == 0) return x;
    DenseMatrix coeff = matmul_at_b(q, x);
    DenseMatrix proj = matmul(q, coeff);
    DenseMatrix out = x;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= proj.data()[i];
    return out;
}

int64_t argmax_column_norm(const DenseMatrix &x) {
    int64_t best = 0;
    double best_val = -1.0;
    for (int64_t j = 0; j < x.cols(); ++j) {
        double v = column_norm(x, j);
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }
    return best;
}

} // namespace

double gu_eisenstat_budget(int64_t ell, int64_t n) {
    return std::sqrt(1.0 + 4.0 * static_cast<double>(ell) * static_cast<double>(n - ell));
}

RrqrReport rrqr_report(const DenseMatrix &r, std::span<const double> sigma_m) {
    const int64_t k = r.rows();
    if (static_cast<int64_t>(sigma_m.size()) < k)
        throw std::invalid_argument("rrqr_report: need at least k reference singular values");
    RrqrReport rep;
    rep.f_lower.resize(static_cast<size_t>(k), 1.0);
    rep.f_upper.resize(static_cast<size_t>(k), 1.0);
    rep.g.resize(static_cast<size_t>(k), 0.0);
    for (int64_t ell = 1; ell <= k; ++ell) {
        TriangularPartition part(r, ell);
        DenseMatrix a = part.a();
        std::vector<double> sig_a = svd_values(a);
        double f_lo = 0.0;
        for (int64_t j = 0; j < ell; ++j) {
            double denom = sig_a[static_cast<size_t>(j)];
            f_lo = std::max(f_lo, denom > 0.0 ? sigma_m[static_cast<size_t>(j)] / denom : kInf);
        }
        rep.f_lower[static_cast<size_t>(ell - 1)] = (ell > 0) ? f_lo : 1.0;

        double f_hi = 1.0;
        if (ell < k) {
            std::vector<double> sig_c = svd_values(part.c());
            f_hi = 0.0;
            for (int64_t j = 0; j < k - ell; ++j) {
                double denom = sigma_m[static_cast<size_t>(ell + j)];
                f_hi = std::max(f_hi, denom > 0.0 ? sig_c[static_cast<size_t>(j)] / denom : kInf);
            }
        }
        rep.f_upper[static_cast<size_t>(ell - 1)] = f_hi;
        rep.g[static_cast<size_t>(ell - 1)] = inverse_block_norm(a, part.b());
    }
    return rep;
}

double InheritanceCheck::max_violation() const {
    double v = -kInf;
    for (double x : violation_a) v = std::max(v, x);
    for (double x : violation_b) v = std::max(v, x);
    for (double x : violation_c) v = std::max(v, x);
    return v;
}

InheritanceCheck inheritance_check(const DenseMatrix &m, const DenseMatrix &s_dense,
                                   std::span<const int64_t> pivots) {
    std::vector<double> sig_m_full = svd_values(m);
    DenseMatrix sm = matmul(s_dense, m);
    std::vector<double> sig_sm_full = svd_values(sm);
    int64_t k = numerical_rank(sig_m_full);
    if (numerical_rank(sig_sm_full) != k)
        throw std::invalid_argument("inheritance_check: rank(S M) != rank(M)");

    SubspaceDiagnostics diag = diagnostics(s_dense, m);
    double d = diag.effective_distortion;
    double grow = (1.0 + d) / (1.0 - d);

    DenseMatrix mj = m.select_columns(pivots);
    DenseMatrix smj = sm.select_columns(pivots);
    DenseMatrix r = householder_qr_r(mj).block(0, k, 0, m.cols());
    DenseMatrix r_sk = householder_qr_r(smj).block(0, k, 0, m.cols());

    InheritanceCheck out;
    out.delta_eff = d;
    for (int64_t ell = 1; ell <= k; ++ell) {
        TriangularPartition part(r, ell), part_sk(r_sk, ell);
        DenseMatrix a = part.a(), a_sk = part_sk.a();
        std::vector<double> sig_a = svd_values(a), sig_a_sk = svd_values(a_sk);
        double va = -kInf;
        for (int64_t j = 0; j < ell; ++j) {
            double lhs = sig_a[static_cast<size_t>(j)] / sig_m_full[static_cast<size_t>(j)];
            double rhs = (1.0 / grow) * sig_a_sk[static_cast<size_t>(j)] /
                         sig_sm_full[static_cast<size_t>(j)];
            va = std::max(va, rhs - lhs);
        }
        out.violation_a.push_back(va);

        double vb = -kInf;
        if (ell < k) {
            std::vector<double> sig_c = svd_values(part.c());
            std::vector<double> sig_c_sk = svd_values(part_sk.c());
            for (int64_t j = 0; j < k - ell; ++j) {
                double lhs = sig_c[static_cast<size_t>(j)] / sig_m_full[static_cast<size_t>(ell + j)];
                double rhs = grow * sig_c_sk[static_cast<size_t>(j)] /
                             sig_sm_full[static_cast<size_t>(ell + j)];
                vb = std::max(vb, lhs - rhs);
            }
        }
        out.violation_b.push_back(vb);

        double lhs_c = inverse_block_norm(a, part.b());
        double smin_a_sk = sig_a_sk.back();
        double rhs_c = inverse_block_norm(a_sk, part_sk.b()) +
                       (smin_a_sk > 0.0 ? grow * spectral_norm(part_sk.c()) / smin_a_sk : kInf);
        out.violation_c.push_back(lhs_c - rhs_c);
    }
    return out;
}

InheritanceCheck inheritance_check(const DenseMatrix &m, const SketchOperator &s,
                                   std::span<const int64_t> pivots) {
    return inheritance_check(m, densify(s), pivots);
}

SimilarityCheck maxnorm_similarity_check(const DenseMatrix &m, const DenseMatrix &s_dense,
                                         int64_t ell) {
    DenseMatrix u = numerical_range_basis(m);
    const int64_t k = u.cols();
    if (ell >= k)
        throw std::invalid_argument("maxnorm_similarity_check: requires ell < rank(M)");
    std::vector<double> sigma = svd_values(matmul(s_dense, u));
    DenseMatrix sm = matmul(s_dense, m);

    PivotedQR piv = qrcp_maxnorm(m);
    std::vector<int64_t> prefix(piv.pivots.begin(), piv.pivots.begin() + ell);
    DenseMatrix q_ell = householder_qr(m.select_columns(prefix)).q;
    DenseMatrix resid = project_out(q_ell, m);
    DenseMatrix q_sk_ell = householder_qr(sm.select_columns(prefix)).q;
    DenseMatrix resid_sk = project_out(q_sk_ell, sm);

    SimilarityCheck out;
    out.ell = ell;
    out.rank = k;
    out.pivot_reference = argmax_column_norm(resid);
    out.pivot_sketch = argmax_column_norm(resid_sk);
    out.phi_reference = column_norm(resid, out.pivot_reference);
    out.phi_sketch = column_norm(resid, out.pivot_sketch); // measured on M, not on S M

    int64_t idx = std::clamp<int64_t>(k - ell + 1, 1, k);
    out.sigma_ratio = sigma[static_cast<size_t>(idx - 1)] / sigma[0];

    // d_ell from T = (I - proj_{S M_ell}) S applied to an orthonormal basis
    // of the residual range.
    DenseMatrix u_n = numerical_range_basis(resid);
    DenseMatrix tu = project_out(q_sk_ell, matmul(s_dense, u_n));
    out.delta_ell = diagnostics_from_sketched_basis(tu).effective_distortion;
    return out;
}

SimilarityCheck maxnorm_similarity_check(const DenseMatrix &m, const SketchOperator &s,
                                         int64_t ell) {
    return maxnorm_similarity_check(m, densify(s), ell);
}

PivotQualityCurves pivot_quality(const DenseMatrix &m, const PivotedQR &ref,
                                 const PivotedQR &test) {
    std::vector<double> sigma = svd_values(m);
    return pivot_quality(m, ref, test, sigma);
}

namespace {

// ||C_k||_F for k = 0..rank, extended beyond the detected rank by the full
// reconstruction residual.
std::vector<double> trailing_masses(const DenseMatrix &m, const PivotedQR &dec, int64_t n) {
    const int64_t k_max = dec.rank;
    std::vector<double> row_mass(static_cast<size_t>(k_max), 0.0);
    for (int64_t i = 0; i < k_max; ++i) {
        double acc = 0.0;
        for (int64_t j = i; j < dec.r.cols(); ++j) acc += dec.r(i, j) * dec.r(i, j);
        row_mass[static_cast<size_t>(i)] = acc;
    }
    std::vector<double> mass(static_cast<size_t>(n + 1), 0.0);
    double tail = 0.0;
    for (int64_t k = k_max; k >= 0; --k) {
        if (k < k_max) tail += row_mass[static_cast<size_t>(k)];
        if (k <= n) mass[static_cast<size_t>(k)] = std::sqrt(tail);
    }
    if (k_max < n) {
        double recon = dec.q.empty() ? 0.0 : truncation_residual(m, dec, k_max);
        for (int64_t k = k_max; k <= n; ++k)
            mass[static_cast<size_t>(k)] = recon;
    }
    return mass;
}

} // namespace

PivotQualityCurves pivot_quality(const DenseMatrix &m, const PivotedQR &ref,
                                 const PivotedQR &test, std::span<const double> sigma_m) {
    const int64_t n = m.cols();
    PivotQualityCurves out;
    std::vector<double> mass_ref = trailing_masses(m, ref, n);
    std::vector<double> mass_test = trailing_masses(m, test, n);
    out.trailing_ratio.resize(static_cast<size_t>(n));
    for (int64_t k = 1; k <= n; ++k) {
        double a = mass_ref[static_cast<size_t>(k)], b = mass_test[static_cast<size_t>(k)];
        out.trailing_ratio[static_cast<size_t>(k - 1)] =
            (b > 0.0) ? a / b : (a > 0.0 ? kInf : 1.0);
    }
    auto diag_curve = [&](const PivotedQR &dec) {
        std::vector<double> curve;
        int64_t kk = std::min<int64_t>(dec.rank, static_cast<int64_t>(sigma_m.size()));
        for (int64_t k = 0; k < kk; ++k)
            curve.push_back(std::fabs(dec.r(k, k)) / sigma_m[static_cast<size_t>(k)]);
        return curve;
    };
    out.diag_ratio_ref = diag_curve(ref);
    out.diag_ratio_test = diag_curve(test);
    return out;
}

double truncation_residual(const DenseMatrix &m, const PivotedQR &dec, int64_t k) {
    DenseMatrix mj = m.select_columns(dec.pivots);
    DenseMatrix qk = dec.q.leading_columns(k);
    DenseMatrix rk = dec.r.block(0, k, 0, dec.r.cols());
    DenseMatrix qr = matmul(qk, rk);
    double acc = 0.0;
    for (size_t i = 0; i < mj.size(); ++i) {
        double d = mj.data()[i] - qr.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace cqrrpt
