#ifndef cqrrpt_linalg_hh
#define cqrrpt_linalg_hh

#include <cstdint>
#include <span>
#include <vector>

#include "cqrrpt/dense_matrix.hh"

namespace cqrrpt {

// ---------------------------------------------------------------------------
// Dense products and norms. All kernels use fixed accumulation orders, so
// results are bitwise deterministic for fixed inputs at any thread count.
// ---------------------------------------------------------------------------

DenseMatrix matmul(const DenseMatrix &a, const DenseMatrix &b);        // a * b
DenseMatrix matmul_at_b(const DenseMatrix &a, const DenseMatrix &b);   // a^T * b
DenseMatrix transpose(const DenseMatrix &a);

double frobenius_norm(const DenseMatrix &a);
double max_abs(const DenseMatrix &a);
double column_norm(const DenseMatrix &a, int64_t j);

// Fixed-order dot product (4-way unrolled; part of the determinism contract).
double dot(std::span<const double> a, std::span<const double> b);

// =============================================================================
/// Unpivoted Householder QR. Returns thin factors: Q is rows x cols with
/// orthonormal columns, R is cols x cols upper-triangular, M = Q R.
/// Rank deficiency shows up as zero or tiny diagonal entries of R, never as
/// a failure.
///
struct QrFactors {
    DenseMatrix q;
    DenseMatrix r;
};
QrFactors householder_qr(const DenseMatrix &m);

// R-factor only (skips the explicit Q accumulation).
DenseMatrix householder_qr_r(const DenseMatrix &m);

// =============================================================================
/// Upper Cholesky factorization G = R^T R of a symmetric matrix.
///
/// On success failure_index == 0 and `factor` is the full upper-triangular R.
/// If the j-th leading minor (1-based) is the first one that is not positive
/// definite, failure_index == j and the leading (j-1) x (j-1) block of
/// `factor` is still the valid Cholesky factor of the corresponding leading
/// block of G. This mirrors the error-code semantics of the standard
/// factorization routines, which the rank-selection fallback consumes.
///
struct CholeskyResult {
    DenseMatrix factor;
    int64_t failure_index;
    bool ok() const { return failure_index == 0; }
};
CholeskyResult cholesky(const DenseMatrix &g);

// =============================================================================
/// Solve X R = M for X, with R square upper-triangular (the right-sided
/// triangular solve used to apply preconditioners). Throws
/// std::domain_error on a zero diagonal entry of R.
///
DenseMatrix trsm_right(const DenseMatrix &m, const DenseMatrix &r);

// In-place triangular solves with an upper-triangular R.
void solve_upper(const DenseMatrix &r, std::span<double> x);             // R x = b
void solve_upper_transposed(const DenseMatrix &r, std::span<double> x);  // R^T x = b

// =============================================================================
/// Gram matrix M^T M, symmetrized exactly (upper triangle computed once and
/// mirrored).
///
DenseMatrix gram(const DenseMatrix &m);

// =============================================================================
/// Singular values by one-sided Jacobi iteration, descending. Tall inputs are
/// QR-reduced first; wide inputs are transposed. Intended as a desk-scale
/// verification oracle, not a performance kernel. Throws std::runtime_error
/// if the sweep cap is exceeded.
///
std::vector<double> svd_values(const DenseMatrix &m);

/// Full factors M = U diag(sigma) V^T for rows >= cols. Columns of U beyond
/// the numerical rank are zero vectors and should be dropped by the caller.
struct SvdFactors {
    DenseMatrix u;
    std::vector<double> sigma;
    DenseMatrix v;
};
SvdFactors svd_factors(const DenseMatrix &m);

// =============================================================================
/// Power-iteration spectral-norm estimate (cap 200 iterations, relative
/// tolerance 1e-10, deterministic start vector). The returned value is a
/// lower estimate converging to sigma_1 from below; `converged` is false when
/// the cap was hit first.
///
struct NormEstimate {
    double value;
    bool converged;
};
NormEstimate spectral_norm_estimate(const DenseMatrix &m);
double spectral_norm(const DenseMatrix &m);

/// ||R^{-1}||_2 for upper-triangular R via power iteration with triangular
/// solves. Returns {inf, true} when R has a zero diagonal entry.
NormEstimate inverse_norm_estimate(const DenseMatrix &r);

/// 2-norm condition number. Requires full column rank; triangular inputs are
/// used directly, anything else is QR-reduced first.
double cond_2(const DenseMatrix &m);

namespace detail {

// Householder primitives shared by the unpivoted and pivoted QR drivers.
// make_reflector overwrites b(j,j) with the new diagonal entry, stores the
// scaled vector (implicit leading 1) below it, and returns beta; beta == 0
// encodes a zero column. apply_reflector applies I - beta w w^T (w read from
// column jv of `house`, rows j+1..m) to column c of `target`, rows j..m.
double make_reflector(DenseMatrix &b, int64_t j);
void apply_reflector(const DenseMatrix &house, int64_t jv, double beta, int64_t j,
                     DenseMatrix &target, int64_t c);
DenseMatrix extract_upper(const DenseMatrix &b, int64_t k);
DenseMatrix accumulate_q(const DenseMatrix &b, const std::vector<double> &betas, int64_t k);

// In-place reduction: b's upper triangle becomes R, reflectors stored below.
void householder_reduce(DenseMatrix &b, std::vector<double> &betas);
// target <- Q * target for the Q encoded by (b, betas); target has b.rows() rows.
void apply_q_left(const DenseMatrix &b, const std::vector<double> &betas, DenseMatrix &target);

} // namespace detail

} // namespace cqrrpt

#endif
