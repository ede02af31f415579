#ifndef cqrrpt_cqrrpt_hh
#define cqrrpt_cqrrpt_hh

#include <cstdint>
#include <optional>

#include "cqrrpt/dense_matrix.hh"
#include "cqrrpt/qrcp.hh"
#include "cqrrpt/sketch.hh"

namespace cqrrpt {

/// Unit roundoff of the working precision (double).
inline constexpr double unit_roundoff = 1.1102230246251565e-16; // 2^-53

// =============================================================================
/// CholeskyQR: G = M^T M, G = R^T R, Q = M R^{-1}. Fails (with the Cholesky
/// failure index) when the Gram matrix is not numerically positive definite;
/// orthogonality loss grows like u * cond(M)^2, which is the failure mode the
/// sketch-based preconditioning exists to remove.
///
struct CholeskyQrResult {
    DenseMatrix q;
    DenseMatrix r;
    int64_t failure_index = 0; // 0 on success; 1-based first non-PD minor otherwise
    bool ok() const { return failure_index == 0; }
};
CholeskyQrResult cholesky_qr(const DenseMatrix &m);

/// CholeskyQR run twice with the triangular factors combined; restores
/// orthogonality to O(u) provided cond(M) stays below u^{-1/2}.
CholeskyQrResult cholesky_qr2(const DenseMatrix &m);

// =============================================================================
/// Stage-1 rank overestimate from an upper-trapezoidal R: the smallest ell
/// with ||C_ell||_F <= u * max|R|, found by accumulating trailing Frobenius
/// mass from the bottom. Returns 0 for the zero matrix and rows(R) when no
/// smaller index qualifies.
///
int64_t rank_stage1(const DenseMatrix &r_sk, double u = unit_roundoff);

// =============================================================================
/// Condition-number estimators for square upper-triangular inputs.
///
///   diag_ratio         max|diag| / min|diag|; a lower bound
///   krylov_bounds      power-iteration bounds on ||X||_2 and ||X^{-1}||_2,
///                      inflated by 1e-6 relative to keep the upper-bound
///                      direction after a capped iteration
///   identity_deviation tau = ||I - X||_2 (same inflation) turned into
///                      cond <= (1+tau)/(1-tau); +inf when tau >= 1
///
enum class CondMethod { diag_ratio, krylov_bounds, identity_deviation };

struct CondBound {
    double value = 1.0;
    bool is_upper_bound = false;
    bool converged = true;
};
CondBound cond_estimate(const DenseMatrix &x, CondMethod method);

// =============================================================================
/// Stage-2 rank selection. Preconditions M_k0 by the leading block of the
/// sketch R-factor, runs CholeskyQR, and on a Cholesky failure at index j
/// shrinks k0 to j-1 and retries (capped); the surviving triangular factor's
/// leading blocks then undergo a binary search for the largest ell whose
/// estimated condition number stays below sqrt(eps_tol / u). Monotonicity of
/// the search predicate is enforced by a running max over evaluated prefixes.
///
struct Stage2Result {
    int64_t rank = 0;       // final k
    DenseMatrix r_pre;      // k x k leading block of the CholeskyQR factor
    DenseMatrix m_pre;      // preconditioned columns (k0_final of them)
    int64_t k0_final = 0;   // k0 after any Cholesky-failure shrinks
    int retries = 0;
    double cond_at_rank = 1.0;
    double seconds_precondition = 0.0;
    double seconds_cholesky = 0.0;
};
Stage2Result rank_stage2(const DenseMatrix &m_k0, const DenseMatrix &a_sk, double eps_tol,
                         double u = unit_roundoff,
                         CondMethod method = CondMethod::identity_deviation);

// =============================================================================
/// Tuning knobs. eps_tol is the orthogonality-loss budget: stage-2 keeps the
/// largest leading block whose estimated condition number stays below
/// sqrt(eps_tol / u), and CholeskyQR loss grows like u * cond^2, so admitted
/// blocks stay within ~eps_tol. The default 1e-4 makes the check a
/// numerical-full-rank guard (threshold ~7e5) that leaves aggressive but
/// honest sketches alone; tighten it to trade detected rank for sharper
/// orthogonality.
///
struct CqrrptConfig {
    double gamma = 1.25;                  // sketch rows d = ceil(gamma * n)
    SketchFamily family = SketchFamily::saso;
    int64_t nnz_per_col = 4;              // SASO sparsity
    double eps_tol = 1e-4;
    CondMethod cond_method = CondMethod::identity_deviation;
    bool stage1_enabled = true;
    uint64_t seed = 0;
    bool measure_distortion = false;      // adds a desk-scale SVD of the sketched basis
    bool validate_output = true;          // run the validate() contract on the result
};

struct PhaseTimings {
    double sketch = 0.0;
    double qrcp = 0.0;
    double rank_select = 0.0;
    double precondition = 0.0;
    double cholesky_qr = 0.0;
    double undo = 0.0;
    double total = 0.0;
};

struct CqrrptDiagnostics {
    std::optional<double> distortion;           // measured delta, if requested
    std::optional<double> effective_distortion;
    double cond_m_pre = 1.0;                    // estimate at the final rank
    double truncation_ratio = 0.0;              // ||C_k||_F / ||R_sk||_2
    double flop_estimate = 0.0;
    PhaseTimings timings;
    std::optional<ValidationReport> validation;
};

struct CqrrptOutput {
    PivotedQR factorization;
    int64_t k0 = 0; // stage-1 rank
    int64_t k = 0;  // final rank
    CqrrptDiagnostics diagnostics;
};

// =============================================================================
/// The deterministic core: sketch, QRCP of the sketch, two-stage rank
/// selection, preconditioned CholeskyQR, and the triangular product that
/// undoes the preconditioning. Pure function of (M, S, cfg).
///
CqrrptOutput cqrrpt_core(const DenseMatrix &m, const SketchOperator &s, const CqrrptConfig &cfg);

/// Driver: fills defaults, sets d = ceil(gamma * n), samples the operator
/// from (family, seed), and delegates to cqrrpt_core.
CqrrptOutput cqrrpt(const DenseMatrix &m, const CqrrptConfig &cfg = {});

int64_t sketch_rows_for(double gamma, int64_t n);

// =============================================================================
/// Arithmetic-cost model: 2mk^2 + mk(k+1) + 4dnk - 2k^2(d+n) + 5k^3/3
/// + k^2/2 + k/6 + C_sk. The polynomial part is evaluated in exact integer
/// arithmetic over a common denominator, so equal inputs give bitwise-equal
/// results no matter how callers regroup the per-step counts.
///
double flop_model(int64_t m, int64_t n, int64_t k, int64_t d, double c_sk);

} // namespace cqrrpt

#endif
