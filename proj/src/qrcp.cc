#include "cqrrpt/qrcp.hh"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cqrrpt/linalg.hh"

namespace cqrrpt {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2;

double default_rank_tol(int64_t n) { return static_cast<double>(n) * kUnitRoundoff; }

void swap_columns(DenseMatrix &b, int64_t i, int64_t p) {
    if (i == p) return;
    auto ci = b.col(i), cp = b.col(p);
    for (int64_t r = 0; r < b.rows(); ++r) std::swap(ci[r], cp[r]);
}

// Lowest index attaining the maximum of w[i..n).
int64_t argmax_from(const std::vector<double> &w, int64_t i) {
    int64_t p = i;
    for (size_t j = static_cast<size_t>(i) + 1; j < w.size(); ++j)
        if (w[j] > w[static_cast<size_t>(p)]) p = static_cast<int64_t>(j);
    return p;
}

} // namespace

PivotedQR qrcp_maxnorm(const DenseMatrix &m, double rank_tol, bool want_q) {
    const int64_t rows = m.rows(), n = m.cols();
    if (rows < 1) throw std::invalid_argument("qrcp_maxnorm: need at least one row");
    if (rank_tol < 0.0) rank_tol = default_rank_tol(n);

    DenseMatrix b = m;
    std::vector<double> betas(static_cast<size_t>(n), 0.0);
    std::vector<int64_t> pivots(static_cast<size_t>(n));
    std::iota(pivots.begin(), pivots.end(), 0);

    // Squared trailing column norms, plus the value at the last recompute;
    // the ratio drives the cancellation safeguard.
    std::vector<double> w(static_cast<size_t>(n)), w_ref(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
        w[static_cast<size_t>(j)] = dot(m.col(j), m.col(j));
        w_ref[static_cast<size_t>(j)] = w[static_cast<size_t>(j)];
    }
    double max_norm0 = 0.0;
    for (double v : w) max_norm0 = std::max(max_norm0, v);
    max_norm0 = std::sqrt(max_norm0);
    const double stop = rank_tol * max_norm0;
    const double sqrt_u = std::sqrt(kUnitRoundoff);

    int64_t k = 0;
    const int64_t steps = std::min(rows, n);
    for (int64_t i = 0; i < steps; ++i) {
        int64_t p = argmax_from(w, i);
        if (std::sqrt(std::max(w[static_cast<size_t>(p)], 0.0)) <= stop) break;
        swap_columns(b, i, p);
        std::swap(pivots[static_cast<size_t>(i)], pivots[static_cast<size_t>(p)]);
        std::swap(w[static_cast<size_t>(i)], w[static_cast<size_t>(p)]);
        std::swap(w_ref[static_cast<size_t>(i)], w_ref[static_cast<size_t>(p)]);

        double beta = detail::make_reflector(b, i);
        betas[static_cast<size_t>(i)] = beta;
        if (beta != 0.0) {
#pragma omp parallel for schedule(static) if ((rows - i) * (n - i) > (1 << 16))
            for (int64_t c = i + 1; c < n; ++c) detail::apply_reflector(b, i, beta, i, b, c);
        }
        k = i + 1;

        for (int64_t j = i + 1; j < n; ++j) {
            double t = b(i, j);
            double updated = w[static_cast<size_t>(j)] - t * t;
            // Cancellation safeguard on the squared tracker: once the running
            // value falls below sqrt(u) times its value at the last recompute
            // it can no longer be trusted, so it is rebuilt from the column.
            if (updated <= sqrt_u * w_ref[static_cast<size_t>(j)]) {
                auto cj = b.col(j).subspan(i + 1, rows - i - 1);
                updated = dot(cj, cj);
                w_ref[static_cast<size_t>(j)] = updated;
            }
            w[static_cast<size_t>(j)] = updated;
        }
    }

    PivotedQR out;
    out.r = detail::extract_upper(b, k);
    if (want_q) out.q = detail::accumulate_q(b, betas, k);
    out.pivots = std::move(pivots);
    out.rank = k;
    return out;
}

PivotedQR qrcp_gram_schmidt(const DenseMatrix &m, double rank_tol) {
    const int64_t rows = m.rows(), n = m.cols();
    if (rows < 1) throw std::invalid_argument("qrcp_gram_schmidt: need at least one row");
    if (rank_tol < 0.0) rank_tol = default_rank_tol(n);

    DenseMatrix b = m;
    std::vector<int64_t> pivots(static_cast<size_t>(n));
    std::iota(pivots.begin(), pivots.end(), 0);

    double max_norm0 = 0.0;
    for (int64_t j = 0; j < n; ++j) max_norm0 = std::max(max_norm0, column_norm(b, j));
    const double stop = rank_tol * max_norm0;

    int64_t k = 0;
    const int64_t steps = std::min(rows, n);
    for (int64_t i = 0; i < steps; ++i) {
        // Oracle variant: norms recomputed fresh at every step.
        std::vector<double> w(static_cast<size_t>(n), 0.0);
        for (int64_t j = i; j < n; ++j) w[static_cast<size_t>(j)] = dot(b.col(j), b.col(j));
        int64_t p = argmax_from(w, i);
        double norm_p = std::sqrt(std::max(w[static_cast<size_t>(p)], 0.0));
        if (norm_p <= stop) break;

        swap_columns(b, i, p);
        std::swap(pivots[static_cast<size_t>(i)], pivots[static_cast<size_t>(p)]);

        auto q = b.col(i);
        double nq = std::sqrt(dot(q, q));
        for (int64_t r = 0; r < rows; ++r) q[r] /= nq;
        for (int64_t j = i + 1; j < n; ++j) {
            auto cj = b.col(j);
            double proj = dot(q, cj);
            for (int64_t r = 0; r < rows; ++r) cj[r] -= proj * q[r];
        }
        k = i + 1;
    }

    PivotedQR out;
    out.q = b.leading_columns(k);
    DenseMatrix mj = m.select_columns(pivots);
    DenseMatrix r_full = matmul_at_b(out.q, mj);
    // Entries below the diagonal are projection roundoff; R is triangular by
    // construction of the process.
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = j + 1; i < k; ++i) r_full(i, j) = 0.0;
    out.r = std::move(r_full);
    out.pivots = std::move(pivots);
    out.rank = k;
    return out;
}

ValidationReport validate(const PivotedQR &dec, const DenseMatrix &m, double tol) {
    ValidationReport rep;
    const int64_t n = m.cols(), k = dec.rank;

    std::vector<char> seen(static_cast<size_t>(n), 0);
    rep.pivots_valid = static_cast<int64_t>(dec.pivots.size()) == n;
    if (rep.pivots_valid) {
        for (int64_t j : dec.pivots) {
            if (j < 0 || j >= n || seen[static_cast<size_t>(j)]) {
                rep.pivots_valid = false;
                break;
            }
            seen[static_cast<size_t>(j)] = 1;
        }
    }

    if (!dec.q.empty()) {
        DenseMatrix qtq = matmul_at_b(dec.q, dec.q);
        for (int64_t i = 0; i < k; ++i) qtq(i, i) -= 1.0;
        rep.orth_loss = spectral_norm(qtq);
    }

    double m_norm = frobenius_norm(m);
    if (rep.pivots_valid) {
        DenseMatrix mj = m.select_columns(dec.pivots);
        DenseMatrix qr = matmul(dec.q, dec.r);
        double diff = 0.0;
        for (size_t i = 0; i < mj.size(); ++i) {
            double d = mj.data()[i] - qr.data()[i];
            diff += d * d;
        }
        diff = std::sqrt(diff);
        rep.recon_rel = (m_norm > 0.0) ? diff / m_norm : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }

    for (int64_t j = 0; j < dec.r.cols(); ++j)
        for (int64_t i = j + 1; i < dec.r.rows(); ++i)
            rep.max_below_diag = std::max(rep.max_below_diag, std::fabs(dec.r(i, j)));

    rep.diag_nonincreasing = true;
    for (int64_t i = 1; i < std::min(k, dec.r.cols()); ++i)
        if (std::fabs(dec.r(i, i)) > std::fabs(dec.r(i - 1, i - 1))) rep.diag_nonincreasing = false;

    rep.pass = rep.pivots_valid && rep.max_below_diag == 0.0 && rep.orth_loss <= tol &&
               rep.recon_rel <= tol;
    return rep;
}

DenseMatrix numerical_range_basis(const DenseMatrix &m, double rel_drop) {
    PivotedQR dec = qrcp_maxnorm(m);
    double sigma1 = spectral_norm(m);
    int64_t r = 0;
    while (r < dec.rank && std::fabs(dec.r(r, r)) > rel_drop * sigma1) ++r;
    return dec.q.leading_columns(r);
}

} // namespace cqrrpt
