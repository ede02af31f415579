#include "cqrrpt/linalg.hh"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cqrrpt/rng.hh"

namespace cqrrpt {

namespace {

constexpr int kPowerIterationCap = 200;
constexpr double kPowerIterationTol = 1e-10;
constexpr int kJacobiSweepCap = 60;

// Heuristic cutoff below which parallel regions are not worth spawning.
constexpr int64_t kParallelFlopCutoff = 1 << 16;

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
    for (double &v : x) v *= alpha;
}

} // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    // Fixed 4-way reassociation: the same order on every call, at any thread
    // count, so callers can rely on bitwise-stable results.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t n = a.size(), i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

DenseMatrix matmul(const DenseMatrix &a, const DenseMatrix &b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree");
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    DenseMatrix c(m, n);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelFlopCutoff)
    for (int64_t j = 0; j < n; ++j) {
        auto cj = c.col(j);
        for (int64_t t = 0; t < k; ++t) {
            double btj = b(t, j);
            if (btj != 0.0) axpy(btj, a.col(t), cj);
        }
    }
    return c;
}

DenseMatrix matmul_at_b(const DenseMatrix &a, const DenseMatrix &b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_at_b: row counts disagree");
    const int64_t m = a.cols(), n = b.cols();
    DenseMatrix c(m, n);
#pragma omp parallel for schedule(static) if (m * n * a.rows() > kParallelFlopCutoff)
    for (int64_t j = 0; j < n; ++j) {
        for (int64_t i = 0; i < m; ++i) c(i, j) = dot(a.col(i), b.col(j));
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix &a) {
    DenseMatrix t(a.cols(), a.rows());
    for (int64_t j = 0; j < a.cols(); ++j)
        for (int64_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
    return t;
}

double frobenius_norm(const DenseMatrix &a) {
    std::span<const double> d{a.data(), a.size()};
    return std::sqrt(dot(d, d));
}

double max_abs(const DenseMatrix &a) {
    double m = 0.0;
    const double *d = a.data();
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(d[i]));
    return m;
}

double column_norm(const DenseMatrix &a, int64_t j) {
    auto c = a.col(j);
    return std::sqrt(dot(c, c));
}

// ---------------------------------------------------------------------------
// Householder QR
// ---------------------------------------------------------------------------

namespace detail {

double make_reflector(DenseMatrix &b, int64_t j) {
    const int64_t m = b.rows();
    auto colj = b.col(j);
    double x0 = colj[j];
    double tail_sq = dot(colj.subspan(j + 1), colj.subspan(j + 1));
    double norm_x = std::sqrt(x0 * x0 + tail_sq);
    if (norm_x == 0.0) return 0.0;
    double sign = (x0 >= 0.0) ? 1.0 : -1.0;
    double alpha = -sign * norm_x;
    double v0 = x0 - alpha; // = x0 + sign*norm_x, no cancellation
    for (int64_t i = j + 1; i < m; ++i) colj[i] /= v0;
    colj[j] = alpha;
    // beta for the scaled vector w with w0 = 1
    return (norm_x + std::fabs(x0)) / norm_x;
}

void apply_reflector(const DenseMatrix &house, int64_t jv, double beta, int64_t j,
                     DenseMatrix &target, int64_t c) {
    const int64_t m = target.rows();
    auto w = house.col(jv);
    auto t = target.col(c);
    double tau = t[j];
    tau += dot(w.subspan(j + 1, m - j - 1), t.subspan(j + 1, m - j - 1));
    tau *= beta;
    t[j] -= tau;
    axpy(-tau, w.subspan(j + 1, m - j - 1), t.subspan(j + 1, m - j - 1));
}

// Factorization loop shared by the Q/R and R-only entry points.
void householder_reduce(DenseMatrix &b, std::vector<double> &betas) {
    const int64_t m = b.rows(), n = b.cols();
    betas.assign(static_cast<size_t>(n), 0.0);
    for (int64_t j = 0; j < n; ++j) {
        double beta = make_reflector(b, j);
        betas[static_cast<size_t>(j)] = beta;
        if (beta == 0.0) continue;
#pragma omp parallel for schedule(static) if ((m - j) * (n - j) > kParallelFlopCutoff)
        for (int64_t c = j + 1; c < n; ++c) apply_reflector(b, j, beta, j, b, c);
    }
}

void apply_q_left(const DenseMatrix &b, const std::vector<double> &betas, DenseMatrix &target) {
    if (target.rows() != b.rows())
        throw std::invalid_argument("apply_q_left: row counts disagree");
    const int64_t m = b.rows(), nt = target.cols();
    for (int64_t j = b.cols() - 1; j >= 0; --j) {
        double beta = betas[static_cast<size_t>(j)];
        if (beta == 0.0) continue;
#pragma omp parallel for schedule(static) if ((m - j) * nt > kParallelFlopCutoff)
        for (int64_t c = 0; c < nt; ++c) apply_reflector(b, j, beta, j, target, c);
    }
}

} // namespace detail

namespace {

using detail::accumulate_q;
using detail::apply_reflector;
using detail::extract_upper;
using detail::householder_reduce;
using detail::make_reflector;

} // namespace

namespace detail {

DenseMatrix extract_upper(const DenseMatrix &b, int64_t k) {
    const int64_t n = b.cols();
    DenseMatrix r(k, n);
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i <= std::min(j, k - 1); ++i) r(i, j) = b(i, j);
    return r;
}

// Thin Q (m x k) by back accumulation of the first k reflectors.
DenseMatrix accumulate_q(const DenseMatrix &b, const std::vector<double> &betas, int64_t k) {
    const int64_t m = b.rows();
    DenseMatrix q(m, k);
    for (int64_t j = 0; j < k; ++j) q(j, j) = 1.0;
    for (int64_t j = k - 1; j >= 0; --j) {
        double beta = betas[static_cast<size_t>(j)];
        if (beta == 0.0) continue;
#pragma omp parallel for schedule(static) if ((m - j) * (k - j) > kParallelFlopCutoff)
        for (int64_t c = j; c < k; ++c) apply_reflector(b, j, beta, j, q, c);
    }
    return q;
}

} // namespace detail

QrFactors householder_qr(const DenseMatrix &m) {
    if (m.rows() < m.cols())
        throw std::invalid_argument("householder_qr: requires rows >= cols");
    DenseMatrix b = m;
    std::vector<double> betas;
    householder_reduce(b, betas);
    return {accumulate_q(b, betas, m.cols()), extract_upper(b, m.cols())};
}

DenseMatrix householder_qr_r(const DenseMatrix &m) {
    if (m.rows() < m.cols())
        throw std::invalid_argument("householder_qr_r: requires rows >= cols");
    DenseMatrix b = m;
    std::vector<double> betas;
    householder_reduce(b, betas);
    return extract_upper(b, m.cols());
}

// ---------------------------------------------------------------------------
// Cholesky, triangular solves, Gram
// ---------------------------------------------------------------------------

CholeskyResult cholesky(const DenseMatrix &g) {
    if (g.rows() != g.cols())
        throw std::invalid_argument("cholesky: matrix must be square");
    const int64_t n = g.rows();
    DenseMatrix r(n, n);
    for (int64_t j = 0; j < n; ++j) {
        auto rj = r.col(j);
        for (int64_t i = 0; i < j; ++i) {
            double s = g(i, j) - dot(r.col(i).subspan(0, i), rj.subspan(0, i));
            rj[i] = s / r(i, i);
        }
        double d = g(j, j) - dot(rj.subspan(0, j), rj.subspan(0, j));
        if (d <= 0.0 || !std::isfinite(d)) {
            // Leading j x j block of r is a valid factor of G[0:j, 0:j].
            return {r.leading_block(j), j + 1};
        }
        rj[j] = std::sqrt(d);
    }
    return {std::move(r), 0};
}

DenseMatrix trsm_right(const DenseMatrix &m, const DenseMatrix &r) {
    if (r.rows() != r.cols())
        throw std::invalid_argument("trsm_right: R must be square");
    if (m.cols() != r.rows())
        throw std::invalid_argument("trsm_right: dimension mismatch");
    const int64_t k = r.rows(), rows = m.rows();
    for (int64_t j = 0; j < k; ++j)
        if (r(j, j) == 0.0)
            throw std::domain_error("trsm_right: singular preconditioner (zero diagonal)");
    DenseMatrix x = m;
    // Column sweep with row-block parallelism: each row range is an
    // independent sequence of identical per-element operations.
#pragma omp parallel if (rows * k * k > kParallelFlopCutoff)
    {
        int64_t nth = 1, tid = 0;
#ifdef _OPENMP
        nth = omp_get_num_threads();
        tid = omp_get_thread_num();
#endif
        int64_t chunk = (rows + nth - 1) / nth;
        int64_t i0 = std::min(tid * chunk, rows), i1 = std::min(i0 + chunk, rows);
        if (i1 > i0) {
            for (int64_t j = 0; j < k; ++j) {
                auto xj = x.col(j).subspan(i0, i1 - i0);
                for (int64_t t = 0; t < j; ++t) {
                    double rtj = r(t, j);
                    if (rtj != 0.0) axpy(-rtj, x.col(t).subspan(i0, i1 - i0), xj);
                }
                scale(1.0 / r(j, j), xj);
            }
        }
    }
    return x;
}

void solve_upper(const DenseMatrix &r, std::span<double> x) {
    const int64_t n = r.rows();
    for (int64_t i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int64_t j = i + 1; j < n; ++j) s -= r(i, j) * x[j];
        x[i] = s / r(i, i);
    }
}

void solve_upper_transposed(const DenseMatrix &r, std::span<double> x) {
    const int64_t n = r.rows();
    for (int64_t i = 0; i < n; ++i) {
        double s = x[i];
        auto ri = r.col(i);
        for (int64_t j = 0; j < i; ++j) s -= ri[j] * x[j];
        x[i] = s / ri[i];
    }
}

DenseMatrix gram(const DenseMatrix &m) {
    const int64_t n = m.cols();
    DenseMatrix g(n, n);
#pragma omp parallel for schedule(dynamic, 4) if (m.rows() * n * n > kParallelFlopCutoff)
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i <= j; ++i) g(i, j) = dot(m.col(i), m.col(j));
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < j; ++i) g(j, i) = g(i, j);
    return g;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD
// ---------------------------------------------------------------------------

namespace {

// One-sided Jacobi on the columns of a (square) work matrix; optionally
// accumulates the right rotations into v.
void jacobi_sweeps(DenseMatrix &a, DenseMatrix *v) {
    const int64_t n = a.cols();
    // Rotation threshold sits well above the roundoff of the dot products
    // themselves, or pairs of nearly-dependent columns never settle.
    const double tol = 1e-14;
    // Columns driven below the roundoff floor of the whole matrix belong to
    // the numerical null space; they are zeroed instead of being rotated
    // toward ever-smaller noise.
    double scale = 0.0;
    for (int64_t j = 0; j < n; ++j) scale = std::max(scale, column_norm(a, j));
    const double u = std::numeric_limits<double>::epsilon() / 2;
    const double null_floor = 4.0 * std::sqrt(static_cast<double>(n)) * u * scale;
    const double null_floor_sq = null_floor * null_floor;
    for (int sweep = 0; sweep < kJacobiSweepCap; ++sweep) {
        bool rotated = false;
        for (int64_t p = 0; p < n - 1; ++p) {
            for (int64_t q = p + 1; q < n; ++q) {
                auto ap = a.col(p), aq = a.col(q);
                double app = dot(ap, ap), aqq = dot(aq, aq), apq = dot(ap, aq);
                if (app <= null_floor_sq && app > 0.0) {
                    for (int64_t i = 0; i < a.rows(); ++i) ap[i] = 0.0;
                    app = 0.0;
                }
                if (aqq <= null_floor_sq && aqq > 0.0) {
                    for (int64_t i = 0; i < a.rows(); ++i) aq[i] = 0.0;
                    aqq = 0.0;
                }
                if (app == 0.0 || aqq == 0.0) continue;
                if (apq == 0.0 || std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                double zeta = (aqq - app) / (2.0 * apq);
                double t = ((zeta >= 0.0) ? 1.0 : -1.0) /
                           (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int64_t i = 0; i < a.rows(); ++i) {
                    double x = ap[i], y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                if (v) {
                    auto vp = v->col(p), vq = v->col(q);
                    for (int64_t i = 0; i < n; ++i) {
                        double x = vp[i], y = vq[i];
                        vp[i] = c * x - s * y;
                        vq[i] = s * x + c * y;
                    }
                }
            }
        }
        if (!rotated) return;
    }
    throw std::runtime_error("svd: one-sided Jacobi failed to converge within sweep cap");
}

std::vector<int64_t> descending_order(const std::vector<double> &vals) {
    std::vector<int64_t> idx(vals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int64_t a, int64_t b) { return vals[a] > vals[b]; });
    return idx;
}

} // namespace

std::vector<double> svd_values(const DenseMatrix &m) {
    if (m.empty()) return std::vector<double>(std::min(m.rows(), m.cols()), 0.0);
    DenseMatrix a = (m.rows() >= m.cols()) ? m : transpose(m);
    // QR reduction keeps the Jacobi iteration at the small dimension.
    if (a.rows() > a.cols()) a = householder_qr_r(a);
    jacobi_sweeps(a, nullptr);
    std::vector<double> sigma(static_cast<size_t>(a.cols()));
    for (int64_t j = 0; j < a.cols(); ++j) sigma[static_cast<size_t>(j)] = column_norm(a, j);
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    return sigma;
}

SvdFactors svd_factors(const DenseMatrix &m) {
    if (m.rows() < m.cols())
        throw std::invalid_argument("svd_factors: requires rows >= cols");
    const int64_t n = m.cols();
    QrFactors qr = householder_qr(m);
    DenseMatrix a = std::move(qr.r);
    DenseMatrix v = DenseMatrix::identity(n);
    jacobi_sweeps(a, &v);

    std::vector<double> norms(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) norms[static_cast<size_t>(j)] = column_norm(a, j);
    std::vector<int64_t> order = descending_order(norms);

    SvdFactors out;
    out.sigma.resize(static_cast<size_t>(n));
    DenseMatrix u_small(n, n);
    DenseMatrix v_sorted(n, n);
    for (int64_t j = 0; j < n; ++j) {
        int64_t src = order[static_cast<size_t>(j)];
        double s = norms[static_cast<size_t>(src)];
        out.sigma[static_cast<size_t>(j)] = s;
        auto ac = a.col(src);
        auto uc = u_small.col(j);
        if (s > 0.0)
            for (int64_t i = 0; i < n; ++i) uc[i] = ac[i] / s;
        auto vs = v.col(src);
        auto vd = v_sorted.col(j);
        for (int64_t i = 0; i < n; ++i) vd[i] = vs[i];
    }
    out.u = matmul(qr.q, u_small);
    out.v = std::move(v_sorted);
    return out;
}

// ---------------------------------------------------------------------------
// Power-iteration norm and condition estimates
// ---------------------------------------------------------------------------

namespace {

std::vector<double> deterministic_unit_vector(int64_t n) {
    CounterRng rng(0x5eedcafe01234567ULL);
    std::vector<double> v(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = rng.normal(static_cast<uint64_t>(i));
    double nrm = std::sqrt(dot(v, v));
    if (nrm == 0.0) { v[0] = 1.0; return v; }
    for (double &x : v) x /= nrm;
    return v;
}

// Generic power iteration on A^T A where the caller provides y = A x and
// z = A^T y. Returns an estimate of sigma_max(A), converging from below.
template <typename Fwd, typename Adj>
NormEstimate power_iterate(int64_t n, Fwd &&forward, Adj &&adjoint) {
    std::vector<double> v = deterministic_unit_vector(n);
    std::vector<double> w, z;
    double est = 0.0, prev = -1.0;
    for (int it = 0; it < kPowerIterationCap; ++it) {
        forward(v, w);
        double nw = std::sqrt(dot(w, w));
        if (nw == 0.0) return {0.0, true};
        est = std::max(est, nw); // ties resolved toward the larger iterate
        if (prev >= 0.0 && std::fabs(est - prev) <= kPowerIterationTol * est)
            return {est, true};
        prev = est;
        adjoint(w, z);
        double nz = std::sqrt(dot(z, z));
        if (nz == 0.0) return {est, true};
        for (size_t i = 0; i < z.size(); ++i) v[i] = z[i] / nz;
    }
    return {est, false};
}

} // namespace

NormEstimate spectral_norm_estimate(const DenseMatrix &m) {
    if (m.empty()) return {0.0, true};
    return power_iterate(
        m.cols(),
        [&](const std::vector<double> &x, std::vector<double> &y) {
            y.assign(static_cast<size_t>(m.rows()), 0.0);
            for (int64_t j = 0; j < m.cols(); ++j) axpy(x[static_cast<size_t>(j)], m.col(j), y);
        },
        [&](const std::vector<double> &y, std::vector<double> &z) {
            z.resize(static_cast<size_t>(m.cols()));
            for (int64_t j = 0; j < m.cols(); ++j) z[static_cast<size_t>(j)] = dot(m.col(j), y);
        });
}

double spectral_norm(const DenseMatrix &m) { return spectral_norm_estimate(m).value; }

NormEstimate inverse_norm_estimate(const DenseMatrix &r) {
    if (r.rows() != r.cols())
        throw std::invalid_argument("inverse_norm_estimate: R must be square");
    if (r.empty()) return {0.0, true};
    for (int64_t j = 0; j < r.rows(); ++j)
        if (r(j, j) == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return power_iterate(
        r.rows(),
        [&](const std::vector<double> &x, std::vector<double> &y) {
            y = x;
            solve_upper(r, y);
        },
        [&](const std::vector<double> &y, std::vector<double> &z) {
            z = y;
            solve_upper_transposed(r, z);
        });
}

double cond_2(const DenseMatrix &m) {
    if (m.empty()) return 1.0;
    bool triangular = m.rows() == m.cols();
    if (triangular)
        for (int64_t j = 0; j < m.cols() && triangular; ++j)
            for (int64_t i = j + 1; i < m.rows(); ++i)
                if (m(i, j) != 0.0) { triangular = false; break; }
    DenseMatrix r = triangular ? m : householder_qr_r(m);
    double hi = spectral_norm_estimate(r).value;
    double inv = inverse_norm_estimate(r).value;
    return std::max(1.0, hi * inv);
}

} // namespace cqrrpt
