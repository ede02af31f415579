#include "cqrrpt/testmat.hh"

#include <cmath>
#include <stdexcept>

#include "cqrrpt/linalg.hh"
#include "cqrrpt/rng.hh"

namespace cqrrpt {

namespace {

constexpr uint64_t kLeftFactorSalt = 0x6c656674ULL;
constexpr uint64_t kRightFactorSalt = 0x72696768ULL;
constexpr uint64_t kRowPickSalt = 0x726f7773ULL;

DenseMatrix gaussian_block(int64_t m, int64_t n, uint64_t stream_seed) {
    DenseMatrix g(m, n);
    CounterRng rng(stream_seed);
    for (int64_t j = 0; j < n; ++j) {
        auto cj = g.col(j);
        for (int64_t i = 0; i < m; ++i) cj[i] = rng.normal(static_cast<uint64_t>(j * m + i));
    }
    return g;
}

} // namespace

std::vector<double> spectrum_values(const SpectrumSpec &spec, int64_t n) {
    if (n < 1) throw std::invalid_argument("spectrum_values: need n >= 1");
    std::vector<double> sigma(static_cast<size_t>(n));
    switch (spec.kind) {
        case SpectrumSpec::Kind::polynomial_decay: {
            if (spec.cond < 1.0)
                throw std::invalid_argument("spectrum_values: cond target must be >= 1");
            int64_t t = (n + 9) / 10; // ceil(n/10) leading ones
            for (int64_t i = 0; i < t; ++i) sigma[static_cast<size_t>(i)] = 1.0;
            if (t < n) {
                // sigma_i = (i - t)^{-p} for i > t (1-based), p from sigma_n = 1/cond
                double span = static_cast<double>(n - t);
                double p = (span > 1.0) ? std::log(spec.cond) / std::log(span) : 1.0;
                for (int64_t i = t; i < n; ++i) {
                    double step = static_cast<double>(i - t + 1);
                    sigma[static_cast<size_t>(i)] = std::pow(step, -p);
                }
                sigma[static_cast<size_t>(n - 1)] = 1.0 / spec.cond;
            }
            break;
        }
        case SpectrumSpec::Kind::staircase: {
            const double levels[4] = {1.0, 8e-10, 4e-10, 1e-10};
            for (int64_t i = 0; i < n; ++i) {
                int64_t pos = i + 1;
                int level = 3;
                if (pos <= (n + 3) / 4)
                    level = 0;
                else if (pos <= (n + 1) / 2)
                    level = 1;
                else if (pos <= (3 * n + 3) / 4)
                    level = 2;
                sigma[static_cast<size_t>(i)] = levels[level];
            }
            break;
        }
        case SpectrumSpec::Kind::explicit_list: {
            if (static_cast<int64_t>(spec.values.size()) != n)
                throw std::invalid_argument("spectrum_values: explicit list length != n");
            sigma = spec.values;
            break;
        }
    }
    for (size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i] <= 0.0 || (i > 0 && sigma[i] > sigma[i - 1]))
            throw std::invalid_argument("spectrum_values: values must be positive non-increasing");
    }
    return sigma;
}

DenseMatrix gen_spectral(int64_t m, int64_t n, const SpectrumSpec &spec, uint64_t seed) {
    if (m < n) throw std::invalid_argument("gen_spectral: requires m >= n");
    std::vector<double> sigma = spectrum_values(spec, n);
    DenseMatrix left = gaussian_block(m, n, mix_seed(seed, kLeftFactorSalt));
    std::vector<double> betas;
    detail::householder_reduce(left, betas);
    DenseMatrix v = householder_qr(gaussian_block(n, n, mix_seed(seed, kRightFactorSalt))).q;
    // M = Q_left * [sigma V^T; 0], applying the reflectors directly instead
    // of forming the orthogonal factor.
    DenseMatrix target(m, n);
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < n; ++i) target(i, j) = sigma[static_cast<size_t>(i)] * v(j, i);
    detail::apply_q_left(left, betas, target);
    return target;
}

DenseMatrix gen_high_coherence(int64_t m, int64_t n, double scale, uint64_t seed, bool rotate) {
    if (m < n) throw std::invalid_argument("gen_high_coherence: requires m >= n");
    DenseMatrix stacked(m, n);
    for (int64_t i = 0; i < m; ++i) stacked(i, i % n) = 1.0;

    // n distinct rows picked by a seeded partial Fisher-Yates.
    std::vector<int64_t> rows(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) rows[static_cast<size_t>(i)] = i;
    CounterRng rng(mix_seed(seed, kRowPickSalt));
    for (int64_t i = 0; i < n; ++i) {
        int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(i),
                                                       static_cast<uint64_t>(m - i)));
        std::swap(rows[static_cast<size_t>(i)], rows[static_cast<size_t>(j)]);
    }
    for (int64_t t = 0; t < n; ++t) {
        int64_t r = rows[static_cast<size_t>(t)];
        stacked(r, r % n) *= scale;
    }

    if (!rotate) return stacked;
    // Row i of the product is rowscale_i times row (i mod n) of the rotation,
    // so it is assembled directly.
    DenseMatrix v = householder_qr(gaussian_block(n, n, mix_seed(seed, kRightFactorSalt))).q;
    DenseMatrix out(m, n);
    for (int64_t j = 0; j < n; ++j) {
        auto oj = out.col(j);
        for (int64_t i = 0; i < m; ++i) oj[i] = stacked(i, i % n) * v(i % n, j);
    }
    return out;
}

DenseMatrix gen_kahan(int64_t n, double theta) {
    if (n < 1) throw std::invalid_argument("gen_kahan: need n >= 1");
    if (!(theta > 0.0) || !(theta < 1.5707963267948966))
        throw std::invalid_argument("gen_kahan: theta must lie in (0, pi/2)");
    double s = std::sin(theta), c = std::cos(theta);
    DenseMatrix k(n, n);
    double row_scale = 1.0;
    for (int64_t i = 0; i < n; ++i) {
        k(i, i) = row_scale;
        for (int64_t j = i + 1; j < n; ++j) k(i, j) = -c * row_scale;
        row_scale *= s;
    }
    return k;
}

DenseMatrix gen_gaussian(int64_t m, int64_t n, uint64_t seed) {
    return gaussian_block(m, n, mix_seed(seed, 0x676175ULL));
}

DenseMatrix gen_exact_rank(int64_t m, int64_t n, int64_t r, uint64_t seed) {
    if (r < 1 || r > std::min(m, n))
        throw std::invalid_argument("gen_exact_rank: need 1 <= r <= min(m, n)");
    DenseMatrix a = gaussian_block(m, r, mix_seed(seed, 0xaaaaULL));
    DenseMatrix b = gaussian_block(r, n, mix_seed(seed, 0xbbbbULL));
    return matmul(a, b);
}

} // namespace cqrrpt
