#ifndef cqrrpt_qrcp_hh
#define cqrrpt_qrcp_hh

#include <cstdint>
#include <vector>

#include "cqrrpt/dense_matrix.hh"

namespace cqrrpt {

// =============================================================================
/// A column-pivoted QR decomposition M[:, pivots] = Q R.
///
///   q       -- m x k, orthonormal columns (may be empty if not requested)
///   r       -- k x n upper-trapezoidal, |r(0,0)| >= |r(1,1)| >= ...
///   pivots  -- 0-based permutation of {0, ..., n-1}
///   rank    -- k, the number of elimination steps taken
///
struct PivotedQR {
    DenseMatrix q;
    DenseMatrix r;
    std::vector<int64_t> pivots;
    int64_t rank = 0;
};

// =============================================================================
/// Householder QRCP with max-norm column pivoting.
///
/// At each step the pivot maximizes the updated trailing column norm, ties
/// broken by lowest column index. Column norms are tracked by downdating and
/// recomputed from scratch whenever a downdate cancels below sqrt(u) times
/// the norm at the last recompute, which keeps the pivot sequence
/// reproducible. The process stops once the trailing max column norm drops
/// to rank_tol times the initial max column norm.
///
/// rank_tol < 0 selects the default n*u.
///
PivotedQR qrcp_maxnorm(const DenseMatrix &m, double rank_tol = -1.0, bool want_q = true);

// =============================================================================
/// Modified Gram-Schmidt QRCP with explicit projection updates
/// B[:, i:n] <- (I - q q^T) B[:, i:n] and the same pivot-rule contract as
/// qrcp_maxnorm. Exists as an independent oracle for pivot-equivalence
/// testing; O(mn) extra work per step, no downdating shortcuts.
///
PivotedQR qrcp_gram_schmidt(const DenseMatrix &m, double rank_tol = -1.0);

// =============================================================================
/// Measured validity of a pivoted QR decomposition against its source matrix.
/// `pass` requires orth_loss <= tol, recon_rel <= tol, an exactly
/// upper-trapezoidal R, and pivots forming a permutation.
///
struct ValidationReport {
    double orth_loss = 0.0;      // ||Q^T Q - I||_2
    double recon_rel = 0.0;      // ||M[:,J] - Q R||_F / ||M||_F
    double max_below_diag = 0.0; // largest |R(i,j)| with i > j
    bool pivots_valid = false;
    bool diag_nonincreasing = false; // |diag(R)| non-increasing (informational)
    bool pass = false;
};
ValidationReport validate(const PivotedQR &dec, const DenseMatrix &m, double tol);

// =============================================================================
/// Orthonormal basis of the numerical range of M: Q-columns of a max-norm
/// QRCP whose diagonal exceeds rel_drop times the spectral norm of M
/// (drop tolerance 1e-12 by default).
///
DenseMatrix numerical_range_basis(const DenseMatrix &m, double rel_drop = 1e-12);

} // namespace cqrrpt

#endif
