#include "cqrrpt/sketch.hh"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cqrrpt/linalg.hh"
#include "cqrrpt/qrcp.hh"
#include "cqrrpt/rng.hh"

namespace cqrrpt {

namespace {

constexpr uint64_t kGaussianSalt = 0x6761757373ULL;
constexpr uint64_t kSasoColumnSalt = 0x7361736fULL;
constexpr uint64_t kSrftSignSalt = 0x7369676eULL;
constexpr uint64_t kSrftSelectSalt = 0x73656c65ULL;

int64_t next_pow2(int64_t m) {
    int64_t p = 1;
    while (p < m) p <<= 1;
    return p;
}

// Unnormalized in-place Walsh-Hadamard butterflies; length must be a power
// of two. Orthonormal transform = this times 1/sqrt(length).
void fwht(double *x, int64_t len) {
    for (int64_t half = 1; half < len; half <<= 1)
        for (int64_t base = 0; base < len; base += 2 * half)
            for (int64_t j = base; j < base + half; ++j) {
                double a = x[j], b = x[j + half];
                x[j] = a + b;
                x[j + half] = a - b;
            }
}

} // namespace

const char *family_name(SketchFamily f) {
    switch (f) {
        case SketchFamily::gaussian: return "gaussian";
        case SketchFamily::saso: return "saso";
        case SketchFamily::srft: return "srft";
    }
    return "?";
}

SketchOperator sample_sketch(SketchFamily family, int64_t d, int64_t m,
                             int64_t nnz_per_col, uint64_t seed) {
    if (d < 1 || m < 1) throw std::invalid_argument("sample_sketch: need d >= 1 and m >= 1");
    SketchOperator s;
    s.family = family;
    s.d = d;
    s.m = m;
    s.seed = seed;

    switch (family) {
        case SketchFamily::gaussian: {
            CounterRng rng(mix_seed(seed, kGaussianSalt));
            s.dense = DenseMatrix(d, m);
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            for (int64_t j = 0; j < m; ++j) {
                auto cj = s.dense.col(j);
                for (int64_t i = 0; i < d; ++i)
                    cj[i] = rng.normal(static_cast<uint64_t>(j * d + i)) * scale;
            }
            break;
        }
        case SketchFamily::saso: {
            if (nnz_per_col < 1 || nnz_per_col > d)
                throw std::invalid_argument("sample_sketch: SASO needs 1 <= nnz_per_col <= d");
            s.nnz_per_col = nnz_per_col;
            s.saso_rows.resize(static_cast<size_t>(nnz_per_col * m));
            s.saso_vals.resize(static_cast<size_t>(nnz_per_col * m));
            const double val = 1.0 / std::sqrt(static_cast<double>(d));
            for (int64_t c = 0; c < m; ++c) {
                CounterRng col_rng(mix_seed(seed, kSasoColumnSalt + static_cast<uint64_t>(c)));
                uint64_t ctr = 0;
                int64_t *rows = s.saso_rows.data() + c * nnz_per_col;
                double *vals = s.saso_vals.data() + c * nnz_per_col;
                for (int64_t t = 0; t < nnz_per_col; ++t) {
                    int64_t r;
                    bool fresh;
                    do {
                        r = static_cast<int64_t>(col_rng.below(ctr++, static_cast<uint64_t>(d)));
                        fresh = true;
                        for (int64_t u = 0; u < t; ++u)
                            if (rows[u] == r) { fresh = false; break; }
                    } while (!fresh);
                    rows[t] = r;
                    vals[t] = (col_rng.bits(ctr++) & 1) ? val : -val;
                }
            }
            break;
        }
        case SketchFamily::srft: {
            if (d > m) throw std::invalid_argument("sample_sketch: SRFT needs d <= m");
            s.srft_padded = next_pow2(m);
            s.srft_scale = std::sqrt(static_cast<double>(s.srft_padded) / static_cast<double>(d));
            CounterRng sign_rng(mix_seed(seed, kSrftSignSalt));
            s.srft_signs.resize(static_cast<size_t>(m));
            for (int64_t i = 0; i < m; ++i)
                s.srft_signs[static_cast<size_t>(i)] = (sign_rng.bits(static_cast<uint64_t>(i)) & 1) ? 1.0 : -1.0;
            // First d entries of a seeded permutation of [0, padded).
            std::vector<int64_t> perm(static_cast<size_t>(s.srft_padded));
            std::iota(perm.begin(), perm.end(), 0);
            CounterRng sel_rng(mix_seed(seed, kSrftSelectSalt));
            for (int64_t i = 0; i < d; ++i) {
                int64_t j = i + static_cast<int64_t>(sel_rng.below(
                                    static_cast<uint64_t>(i), static_cast<uint64_t>(s.srft_padded - i)));
                std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
            }
            s.srft_rows.assign(perm.begin(), perm.begin() + d);
            break;
        }
    }
    return s;
}

DenseMatrix apply(const SketchOperator &s, const DenseMatrix &m) {
    if (m.rows() != s.m)
        throw std::invalid_argument("apply: operator domain does not match matrix rows");
    const int64_t n = m.cols();
    switch (s.family) {
        case SketchFamily::gaussian:
            return matmul(s.dense, m);
        case SketchFamily::saso: {
            DenseMatrix out(s.d, n);
#pragma omp parallel for schedule(static) if (s.m * n * s.nnz_per_col > (1 << 16))
            for (int64_t j = 0; j < n; ++j) {
                auto mj = m.col(j);
                auto oj = out.col(j);
                for (int64_t c = 0; c < s.m; ++c) {
                    double x = mj[c];
                    if (x == 0.0) continue;
                    const int64_t *rows = s.saso_rows.data() + c * s.nnz_per_col;
                    const double *vals = s.saso_vals.data() + c * s.nnz_per_col;
                    for (int64_t t = 0; t < s.nnz_per_col; ++t) oj[rows[t]] += vals[t] * x;
                }
            }
            return out;
        }
        case SketchFamily::srft: {
            DenseMatrix out(s.d, n);
            const double factor = s.srft_scale / std::sqrt(static_cast<double>(s.srft_padded));
#pragma omp parallel if (n > 1)
            {
                std::vector<double> buf(static_cast<size_t>(s.srft_padded));
#pragma omp for schedule(static)
                for (int64_t j = 0; j < n; ++j) {
                    auto mj = m.col(j);
                    std::fill(buf.begin(), buf.end(), 0.0);
                    for (int64_t i = 0; i < s.m; ++i)
                        buf[static_cast<size_t>(i)] = s.srft_signs[static_cast<size_t>(i)] * mj[i];
                    fwht(buf.data(), s.srft_padded);
                    auto oj = out.col(j);
                    for (int64_t r = 0; r < s.d; ++r)
                        oj[r] = factor * buf[static_cast<size_t>(s.srft_rows[static_cast<size_t>(r)])];
                }
            }
            return out;
        }
    }
    throw std::logic_error("apply: unknown family");
}

DenseMatrix densify(const SketchOperator &s) {
    if (s.family == SketchFamily::gaussian) return s.dense;
    return apply(s, DenseMatrix::identity(s.m));
}

std::vector<unsigned char> serialize(const SketchOperator &s) {
    std::vector<unsigned char> blob;
    auto put_u64 = [&blob](uint64_t v) {
        for (int i = 0; i < 8; ++i) blob.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    };
    blob.push_back('C');
    blob.push_back('Q');
    blob.push_back('S');
    blob.push_back('K');
    blob.push_back(1); // version
    blob.push_back(static_cast<unsigned char>(s.family));
    put_u64(static_cast<uint64_t>(s.d));
    put_u64(static_cast<uint64_t>(s.m));
    put_u64(static_cast<uint64_t>(s.nnz_per_col));
    put_u64(s.seed);
    return blob;
}

SketchOperator deserialize(const std::vector<unsigned char> &blob) {
    if (blob.size() != 38 || blob[0] != 'C' || blob[1] != 'Q' || blob[2] != 'S' || blob[3] != 'K')
        throw std::invalid_argument("deserialize: not a sketch-operator blob");
    if (blob[4] != 1) throw std::invalid_argument("deserialize: unsupported version");
    auto get_u64 = [&blob](size_t off) {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(blob[off + i]) << (8 * i);
        return v;
    };
    auto family = static_cast<SketchFamily>(blob[5]);
    int64_t d = static_cast<int64_t>(get_u64(6));
    int64_t m = static_cast<int64_t>(get_u64(14));
    int64_t nnz = static_cast<int64_t>(get_u64(22));
    uint64_t seed = get_u64(30);
    return sample_sketch(family, d, m, nnz, seed);
}

double sketch_flops(const SketchOperator &s, int64_t n_cols) {
    double n = static_cast<double>(n_cols);
    switch (s.family) {
        case SketchFamily::gaussian:
            return 2.0 * static_cast<double>(s.d) * static_cast<double>(s.m) * n;
        case SketchFamily::saso:
            return 2.0 * static_cast<double>(s.nnz_per_col) * static_cast<double>(s.m) * n;
        case SketchFamily::srft: {
            double p = static_cast<double>(s.srft_padded);
            return n * (static_cast<double>(s.m) + p * std::log2(p) + static_cast<double>(s.d));
        }
    }
    return 0.0;
}

std::vector<double> leverage_scores(const DenseMatrix &m) {
    if (max_abs(m) == 0.0)
        throw std::invalid_argument("leverage_scores: zero matrix has no range");
    DenseMatrix u = numerical_range_basis(m);
    std::vector<double> scores(static_cast<size_t>(m.rows()), 0.0);
    for (int64_t j = 0; j < u.cols(); ++j) {
        auto cj = u.col(j);
        for (int64_t i = 0; i < u.rows(); ++i)
            scores[static_cast<size_t>(i)] += cj[i] * cj[i];
    }
    return scores;
}

double coherence(const DenseMatrix &m) {
    std::vector<double> scores = leverage_scores(m);
    double mx = 0.0;
    for (double s : scores) mx = std::max(mx, s);
    return static_cast<double>(m.rows()) * mx;
}

SubspaceDiagnostics diagnostics_from_sketched_basis(const DenseMatrix &su) {
    SubspaceDiagnostics out;
    if (su.cols() == 0) return out; // trivial subspace: perfect embedding
    out.restricted_singular_values = svd_values(su);
    double smax = out.restricted_singular_values.front();
    double smin = out.restricted_singular_values.back();
    out.distortion = std::clamp(std::max(smax - 1.0, 1.0 - smin), 0.0, 1.0);
    if (smax == 0.0 || smin <= 1e-12 * smax) {
        // delta = 1 iff the sketch loses rank
        out.effective_distortion = 1.0;
        out.restricted_cond = std::numeric_limits<double>::infinity();
        return out;
    }
    out.restricted_cond = smax / smin;
    out.effective_distortion = (out.restricted_cond - 1.0) / (out.restricted_cond + 1.0);
    if (out.effective_distortion > out.distortion) {
        // The minimum over rescalings cannot exceed the t = 1 distortion.
        out.effective_distortion = out.distortion;
        out.restricted_cond = (1.0 + out.effective_distortion) / (1.0 - out.effective_distortion);
    }
    return out;
}

SubspaceDiagnostics diagnostics(const SketchOperator &s, const DenseMatrix &m) {
    return diagnostics_from_sketched_basis(apply(s, numerical_range_basis(m)));
}

SubspaceDiagnostics diagnostics(const DenseMatrix &s_dense, const DenseMatrix &m) {
    return diagnostics_from_sketched_basis(matmul(s_dense, numerical_range_basis(m)));
}

} // namespace cqrrpt
