#ifndef cqrrpt_analysis_hh
#define cqrrpt_analysis_hh

#include <cstdint>
#include <span>
#include <vector>

#include "cqrrpt/dense_matrix.hh"
#include "cqrrpt/qrcp.hh"
#include "cqrrpt/sketch.hh"

namespace cqrrpt {

// =============================================================================
/// Measured rank-revealing factors of a k x n upper-trapezoidal R against a
/// reference spectrum, one entry per split index ell = 1..k:
///
///   f_lower(ell) = max_{j <= ell}   sigma_j(M) / sigma_j(A_ell)
///   f_upper(ell) = max_{j <= k-ell} sigma_j(C_ell) / sigma_{ell+j}(M)
///   g(ell)       = ||A_ell^{-1} B_ell||_2
///
/// Singular A_ell records g = +inf rather than raising. Empty maxima are 1.
///
struct RrqrReport {
    std::vector<double> f_lower;
    std::vector<double> f_upper;
    std::vector<double> g;
};
RrqrReport rrqr_report(const DenseMatrix &r, std::span<const double> sigma_m);

/// Budget line f(ell, n) = sqrt(1 + 4 ell (n - ell)) of the strong
/// rank-revealing algorithm with tuning parameter two; plotted as an overlay
/// against measured factors.
double gu_eisenstat_budget(int64_t ell, int64_t n);

// =============================================================================
/// Sketched rank-revealing inheritance: with R and R_sk the unpivoted
/// R-factors of M[:,J] and (S M)[:,J] truncated to k = rank(M) rows, and
/// delta the effective distortion of S on range(M), checks for every ell
///
///   (a)  sigma_j(A_ell)/sigma_j(M)    >= (1-d)/(1+d) * sigma_j(A_ell^sk)/sigma_j(SM)
///   (b)  sigma_j(C_ell)/sigma_{ell+j}(M) <= (1+d)/(1-d) * sigma_j(C_ell^sk)/sigma_{ell+j}(SM)
///   (c)  ||A_ell^{-1} B_ell|| <= ||(A_ell^sk)^{-1} B_ell^sk||
///                                + (1+d)/(1-d) * ||C_ell^sk|| / sigma_min(A_ell^sk)
///
/// Violations are signed (amount by which the inequality fails; negative
/// means it holds with margin), so each check passes iff violation <= slack.
/// Throws when rank(S M) != rank(M).
///
struct InheritanceCheck {
    double delta_eff = 0.0;
    std::vector<double> violation_a; // per ell = 1..k
    std::vector<double> violation_b;
    std::vector<double> violation_c;
    double max_violation() const;
    bool all_hold(double slack) const { return max_violation() <= slack; }
};
InheritanceCheck inheritance_check(const DenseMatrix &m, const DenseMatrix &s_dense,
                                   std::span<const int64_t> pivots);
InheritanceCheck inheritance_check(const DenseMatrix &m, const SketchOperator &s,
                                   std::span<const int64_t> pivots);

// =============================================================================
/// Local similarity of max-norm pivot decisions under sketching. Fixes the
/// first ell max-norm pivots of M, then compares the next pivot chosen from M
/// itself (p) against the one chosen from S M with the same prefix (p_sk),
/// where Phi(j) = ||(I - proj onto the pivoted prefix) M[:,j]||_2:
///
///   Phi(p_sk) >= (sigma_[k-ell+1] / sigma_1) * Phi(p)       (restricted values of S on range(M))
///   Phi(p_sk) >= (1 - d_ell)/(1 + d_ell) * Phi(p)           (sharper local form)
///
/// d_ell is the effective distortion of (I - proj_{S M_ell}) S on the range
/// of (I - proj_{M_ell}) M. The bracket index is clamped to [1, k], which at
/// ell = 0 reproduces the smallest restricted singular value.
///
struct SimilarityCheck {
    int64_t ell = 0;
    int64_t rank = 0;
    int64_t pivot_reference = 0; // p
    int64_t pivot_sketch = 0;    // p_sk
    double phi_reference = 0.0;  // Phi(p)
    double phi_sketch = 0.0;     // Phi(p_sk)
    double sigma_ratio = 0.0;    // sigma_[idx] / sigma_1
    double delta_ell = 0.0;
    double violation_sigma() const { return sigma_ratio * phi_reference - phi_sketch; }
    double violation_effdist() const {
        return (1.0 - delta_ell) / (1.0 + delta_ell) * phi_reference - phi_sketch;
    }
};
SimilarityCheck maxnorm_similarity_check(const DenseMatrix &m, const SketchOperator &s, int64_t ell);
SimilarityCheck maxnorm_similarity_check(const DenseMatrix &m, const DenseMatrix &s_dense, int64_t ell);

// =============================================================================
/// Pivot-quality curves of a test factorization against a reference one on
/// the same matrix:
///
///   trailing_ratio(k) = ||C_k^{ref}||_F / ||C_k^{test}||_F,  k = 1..n
///   diag_ratio(k)     = |R(k,k)| / sigma_k(M) per method,    k = 1..rank
///
/// Beyond a factorization's detected rank its trailing mass is taken as the
/// full reconstruction residual; 0/0 ratios report 1, x/0 report +inf.
///
struct PivotQualityCurves {
    std::vector<double> trailing_ratio;
    std::vector<double> diag_ratio_ref;
    std::vector<double> diag_ratio_test;
};
PivotQualityCurves pivot_quality(const DenseMatrix &m, const PivotedQR &ref,
                                 const PivotedQR &test);
PivotQualityCurves pivot_quality(const DenseMatrix &m, const PivotedQR &ref,
                                 const PivotedQR &test, std::span<const double> sigma_m);

/// ||M[:,J] - Q_k R_k||_F of the rank-k truncation of a decomposition; equals
/// ||C_k||_F up to roundoff, which is what makes the trailing curves cheap.
double truncation_residual(const DenseMatrix &m, const PivotedQR &dec, int64_t k);

} // namespace cqrrpt

#endif
