#ifndef cqrrpt_testmat_hh
#define cqrrpt_testmat_hh

#include <cstdint>
#include <vector>

#include "cqrrpt/dense_matrix.hh"

namespace cqrrpt {

// =============================================================================
/// Prescribed singular-value profiles for synthetic test matrices.
///
///   polynomial_decay -- the first ceil(n/10) values are 1, the rest decay as
///                       (i - t)^{-p} with p solved so sigma_n = 1/cond
///   staircase        -- plateaus (1, 8e-10, 4e-10, 1e-10) on quarters
///                       (ceil boundaries when 4 does not divide n)
///   explicit_list    -- caller-supplied values
///
struct SpectrumSpec {
    enum class Kind { polynomial_decay, staircase, explicit_list };
    Kind kind = Kind::polynomial_decay;
    double cond = 1e10;          // polynomial_decay target
    std::vector<double> values;  // explicit_list

    static SpectrumSpec polynomial_decay(double cond_target) {
        return {Kind::polynomial_decay, cond_target, {}};
    }
    static SpectrumSpec staircase() { return {Kind::staircase, 0.0, {}}; }
    static SpectrumSpec explicit_list(std::vector<double> v) {
        return {Kind::explicit_list, 0.0, std::move(v)};
    }
};

/// The n singular values a SpectrumSpec prescribes (positive, non-increasing).
std::vector<double> spectrum_values(const SpectrumSpec &spec, int64_t n);

/// M = U diag(sigma) V^T with U, V drawn by orthogonalizing seeded Gaussian
/// matrices; generating the left factor this way keeps coherence low.
DenseMatrix gen_spectral(int64_t m, int64_t n, const SpectrumSpec &spec, uint64_t seed);

/// Stacked-identity construction: floor(m/n) copies of I_n plus the first
/// m - c*n rows of I_n, with n randomly chosen rows multiplied by `scale`
/// (1e10 in the reference setup) and an optional random right rotation.
/// Left singular vectors are never randomized, which keeps coherence high.
DenseMatrix gen_high_coherence(int64_t m, int64_t n, double scale, uint64_t seed,
                               bool rotate = true);

/// Kahan matrix K_n(theta) = diag(1, s, ..., s^{n-1}) * (unit upper-triangular
/// with -cos(theta) off-diagonal), s = sin(theta). Max-norm pivoting leaves
/// its columns in place, which is what makes it the classic worst case for
/// rank-revealing factors.
DenseMatrix gen_kahan(int64_t n, double theta);

/// Seeded iid standard normal entries.
DenseMatrix gen_gaussian(int64_t m, int64_t n, uint64_t seed);

/// A * B with A (m x r), B (r x n) Gaussian: exact rank r (up to roundoff).
DenseMatrix gen_exact_rank(int64_t m, int64_t n, int64_t r, uint64_t seed);

} // namespace cqrrpt

#endif
