#ifndef cqrrpt_sketch_hh
#define cqrrpt_sketch_hh

#include <cstdint>
#include <vector>

#include "cqrrpt/dense_matrix.hh"

namespace cqrrpt {

// =============================================================================
/// Distribution families for sketching operators S in F_{d,m}. All families
/// satisfy E[S^T S] = I_m.
///
///   gaussian -- iid entries, mean 0, variance 1/d
///   saso     -- short-axis-sparse: independent columns, exactly nnz_per_col
///               nonzeros per column, values +-1/sqrt(d)
///   srft     -- subsampled randomized fast trigonometric transform,
///               S = sqrt(mhat/d) * C * F * D with F the orthonormal
///               Walsh-Hadamard transform on mhat = next power of two >= m,
///               D a Rademacher sign diagonal, and C a selection of d rows;
///               input rows beyond m are treated as zero
///
enum class SketchFamily { gaussian, saso, srft };

const char *family_name(SketchFamily f);

// =============================================================================
/// A sampled member of F_{d,m}. Same (family, d, m, nnz, seed) always yields a
/// bitwise-identical operator; the materialization is immutable after
/// sampling, so concurrent applies are safe.
///
struct SketchOperator {
    SketchFamily family = SketchFamily::gaussian;
    int64_t d = 0;
    int64_t m = 0;
    int64_t nnz_per_col = 0; // SASO only
    uint64_t seed = 0;

    // Materialization (exactly one of these is populated).
    DenseMatrix dense;               // gaussian: d x m
    std::vector<int64_t> saso_rows;  // nnz_per_col entries per column, column-major
    std::vector<double> saso_vals;
    std::vector<double> srft_signs;  // length m
    std::vector<int64_t> srft_rows;  // d selected coordinates in [0, srft_padded)
    int64_t srft_padded = 0;
    double srft_scale = 0.0;         // sqrt(srft_padded / d)
};

SketchOperator sample_sketch(SketchFamily family, int64_t d, int64_t m,
                             int64_t nnz_per_col, uint64_t seed);

/// Sketch product S * M. M must have exactly `m` rows. The SASO path streams
/// each entry of M nnz_per_col times; the SRFT path runs an O(mhat log mhat)
/// fast Walsh-Hadamard transform per column.
DenseMatrix apply(const SketchOperator &s, const DenseMatrix &m);

/// Explicit d x m matrix of the operator (test oracle; small sizes only).
DenseMatrix densify(const SketchOperator &s);

/// Self-describing binary blob (family tag, dims, seed); the materialization
/// is regenerated on load.
std::vector<unsigned char> serialize(const SketchOperator &s);
SketchOperator deserialize(const std::vector<unsigned char> &blob);

/// Nominal flop count of apply(s, .) on an m x n input, for the C_sk term of
/// the arithmetic-cost model.
double sketch_flops(const SketchOperator &s, int64_t n_cols);

// =============================================================================
/// Leverage scores of range(M): squared row norms of an orthonormal basis U
/// of the numerical range (basis drop tolerance 1e-12 * sigma_1). They sum to
/// rank(M). Throws on a zero matrix.
///
std::vector<double> leverage_scores(const DenseMatrix &m);

/// Coherence mu(M) = m * max_i leverage_score_i, in [rank, m].
double coherence(const DenseMatrix &m);

// =============================================================================
/// Measured interaction of a sketching operator with range(M), via the
/// restricted singular values sigma(S U):
///
///   distortion            delta = max(sigma_max - 1, 1 - sigma_min), in [0,1]
///   effective_distortion  the minimum distortion over positive rescalings
///                         t*S, equal to (kappa-1)/(kappa+1); exactly 1 iff
///                         rank(S M) < rank(M)
///   restricted_cond       kappa = (1 + delta_eff) / (1 - delta_eff)
///
struct SubspaceDiagnostics {
    double distortion = 0.0;
    double effective_distortion = 0.0;
    std::vector<double> restricted_singular_values;
    double restricted_cond = 1.0;
};

SubspaceDiagnostics diagnostics(const SketchOperator &s, const DenseMatrix &m);
SubspaceDiagnostics diagnostics(const DenseMatrix &s_dense, const DenseMatrix &m);

/// Core computation from an already-sketched orthonormal basis S*U.
SubspaceDiagnostics diagnostics_from_sketched_basis(const DenseMatrix &su);

} // namespace cqrrpt

#endif
