#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cqrrpt/analysis.hh"
#include "cqrrpt/cqrrpt.hh"
#include "cqrrpt/linalg.hh"
#include "cqrrpt/rng.hh"
#include "cqrrpt/testmat.hh"

namespace cq = cqrrpt;
using cq::DenseMatrix;

namespace {

std::vector<int64_t> random_permutation(int64_t n, uint64_t seed) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    cq::CounterRng rng(seed);
    for (int64_t i = 0; i < n - 1; ++i) {
        int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(i),
                                                       static_cast<uint64_t>(n - i)));
        std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
}

DenseMatrix orthogonal(int64_t n, uint64_t seed) {
    return cq::householder_qr(cq::gen_gaussian(n, n, seed)).q;
}

} // namespace

TEST_CASE("rrqr factors are unity and g vanishes for a diagonal R") {
    DenseMatrix r(3, 3);
    r(0, 0) = 3.0;
    r(1, 1) = 2.0;
    r(2, 2) = 1.0;
    std::vector<double> sigma = {3.0, 2.0, 1.0};
    cq::RrqrReport rep = cq::rrqr_report(r, sigma);
    for (int ell = 0; ell < 3; ++ell) {
        CHECK(std::fabs(rep.f_lower[ell] - 1.0) <= 1e-10);
        CHECK(std::fabs(rep.f_upper[ell] - 1.0) <= 1e-10);
        CHECK(rep.g[ell] == 0.0);
    }
}

TEST_CASE("rrqr factors are unity for the truncation-optimal diagonal factor") {
    std::vector<double> sigma = {9.0, 4.0, 1.5, 0.3, 1e-3, 1e-7};
    DenseMatrix r(6, 6);
    for (int i = 0; i < 6; ++i) r(i, i) = sigma[static_cast<size_t>(i)];
    cq::RrqrReport rep = cq::rrqr_report(r, sigma);
    for (int ell = 0; ell < 6; ++ell) {
        CHECK(std::fabs(rep.f_lower[ell] - 1.0) <= 1e-10);
        CHECK(std::fabs(rep.f_upper[ell] - 1.0) <= 1e-10);
    }
}

TEST_CASE("gu_eisenstat_budget evaluates sqrt(1 + 4 ell (n - ell))") {
    CHECK(cq::gu_eisenstat_budget(0, 16) == 1.0);
    CHECK(cq::gu_eisenstat_budget(1, 5) == doctest::Approx(std::sqrt(17.0)));
    CHECK(cq::gu_eisenstat_budget(8, 16) == doctest::Approx(std::sqrt(1.0 + 4.0 * 8 * 8)));
}

TEST_CASE("rrqr report on pivoted output is finite, with a singular block recorded as inf") {
    DenseMatrix m = cq::gen_gaussian(50, 10, 40);
    cq::PivotedQR dec = cq::qrcp_maxnorm(m);
    auto sigma = cq::svd_values(m);
    cq::RrqrReport rep = cq::rrqr_report(dec.r, sigma);
    for (int ell = 0; ell < 10; ++ell) {
        CHECK(std::isfinite(rep.f_lower[ell]));
        CHECK(std::isfinite(rep.g[ell]));
        CHECK(rep.f_lower[ell] >= 1.0 - 1e-10);
    }
    DenseMatrix broken = dec.r;
    broken(4, 4) = 0.0;
    cq::RrqrReport rep2 = cq::rrqr_report(broken, sigma);
    CHECK(std::isinf(rep2.g[5]));
}

TEST_CASE("inheritance check with an orthogonal operator holds with near-zero slack") {
    DenseMatrix m = cq::gen_exact_rank(12, 8, 5, 41);
    DenseMatrix s = orthogonal(12, 42);
    auto pivots = random_permutation(8, 43);
    cq::InheritanceCheck chk = cq::inheritance_check(m, s, pivots);
    CHECK(chk.delta_eff <= 1e-10);
    CHECK(chk.max_violation() <= 1e-10);
}

TEST_CASE("inheritance check on seeded rank-deficient instances") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        DenseMatrix m = cq::gen_exact_rank(12, 8, 5, 100 + seed);
        cq::SketchOperator s = cq::sample_sketch(cq::SketchFamily::gaussian, 8, 12, 0, 200 + seed);
        auto pivots = random_permutation(8, 300 + seed);
        cq::InheritanceCheck chk = cq::inheritance_check(m, s, pivots);
        CHECK(chk.delta_eff < 1.0);
        CHECK(chk.all_hold(1e-9));
    }
}

TEST_CASE("inheritance bounds stay valid but loose near singular sketches") {
    DenseMatrix m = cq::gen_exact_rank(12, 8, 5, 50);
    // operator that nearly annihilates one direction of range(M):
    // S = I - (1 - 1e-6) u0 u0^T with u0 in the range
    DenseMatrix u = cq::numerical_range_basis(m);
    DenseMatrix s = DenseMatrix::identity(12);
    for (int64_t i = 0; i < 12; ++i)
        for (int64_t j = 0; j < 12; ++j) s(i, j) -= (1.0 - 1e-6) * u(i, 0) * u(j, 0);
    auto pivots = random_permutation(8, 53);
    cq::InheritanceCheck chk = cq::inheritance_check(m, s, pivots);
    CHECK(chk.delta_eff > 0.99);
    CHECK(chk.all_hold(1e-9));
    MESSAGE("delta_eff=", chk.delta_eff, " max_violation=", chk.max_violation());
}

TEST_CASE("inheritance check rejects rank-losing sketches") {
    DenseMatrix m = DenseMatrix::identity(4);
    DenseMatrix s(4, 4);
    s(0, 0) = s(1, 1) = s(2, 2) = 1.0; // kills e4
    auto pivots = random_permutation(4, 54);
    CHECK_THROWS(cq::inheritance_check(m, s, pivots));
}

TEST_CASE("similarity check with an orthogonal operator reproduces the pivot") {
    DenseMatrix m = cq::gen_gaussian(20, 9, 60);
    DenseMatrix s = orthogonal(20, 61);
    for (int64_t ell : {0, 2, 4}) {
        cq::SimilarityCheck chk = cq::maxnorm_similarity_check(m, s, ell);
        CHECK(chk.pivot_sketch == chk.pivot_reference);
        CHECK(chk.violation_sigma() <= 1e-12);
        CHECK(chk.violation_effdist() <= 1e-12);
    }
}

TEST_CASE("similarity bounds hold on seeded instances at every prefix") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        DenseMatrix m = cq::gen_gaussian(50, 20, 70 + seed);
        cq::SketchOperator s = cq::sample_sketch(cq::SketchFamily::gaussian, 22, 50, 0, 80 + seed);
        DenseMatrix sd = cq::densify(s);
        double prev_ratio = 0.0;
        for (int64_t ell = 0; ell <= 10; ++ell) {
            cq::SimilarityCheck chk = cq::maxnorm_similarity_check(m, sd, ell);
            CHECK(chk.violation_sigma() <= 1e-12);
            CHECK(chk.violation_effdist() <= 1e-12);
            CHECK(chk.sigma_ratio >= prev_ratio); // bracket index tightens with ell
            prev_ratio = chk.sigma_ratio;
        }
    }
}

TEST_CASE("pivot quality of a factorization against itself is flat") {
    DenseMatrix m = cq::gen_gaussian(60, 12, 90);
    cq::PivotedQR dec = cq::qrcp_maxnorm(m);
    cq::PivotQualityCurves pq = cq::pivot_quality(m, dec, dec);
    REQUIRE(pq.trailing_ratio.size() == 12);
    for (double r : pq.trailing_ratio) CHECK(r == 1.0);
    REQUIRE(pq.diag_ratio_ref.size() == pq.diag_ratio_test.size());
    for (size_t i = 0; i < pq.diag_ratio_ref.size(); ++i)
        CHECK(pq.diag_ratio_ref[i] == pq.diag_ratio_test[i]);
}

TEST_CASE("truncation residual equals the trailing block norm") {
    DenseMatrix m = cq::gen_spectral(100, 16, cq::SpectrumSpec::polynomial_decay(1e8), 91);
    cq::PivotedQR dec = cq::qrcp_maxnorm(m);
    for (int64_t k : {4, 8, 12}) {
        cq::TriangularPartition part(dec.r, k);
        double c_norm = cq::frobenius_norm(part.c());
        double resid = cq::truncation_residual(m, dec, k);
        CHECK(resid == doctest::Approx(c_norm).epsilon(1e-12));
    }
}

TEST_CASE("low-coherence pivot quality stays near one under aggressive sketching") {
    DenseMatrix m = cq::gen_spectral(2048, 96, cq::SpectrumSpec::polynomial_decay(1e10), 92);
    cq::PivotedQR ref = cq::qrcp_maxnorm(m, -1.0, false);
    cq::CqrrptConfig cfg;
    cfg.gamma = 1.0;
    cfg.nnz_per_col = 1;
    cfg.seed = 93;
    cfg.validate_output = false;
    cq::CqrrptOutput out = cq::cqrrpt(m, cfg);
    std::vector<double> sigma = cq::spectrum_values(cq::SpectrumSpec::polynomial_decay(1e10), 96);
    cq::PivotQualityCurves pq = cq::pivot_quality(m, ref, out.factorization, sigma);
    // deviations concentrate near spectrum transitions; the curve stays sane
    for (size_t k = 0; k + 1 < pq.trailing_ratio.size(); ++k) {
        CHECK(pq.trailing_ratio[k] >= 0.25);
        CHECK(pq.trailing_ratio[k] <= 4.0);
    }
    // diagonal tracking stays within the pointwise window of the reference
    REQUIRE(pq.diag_ratio_ref.size() == pq.diag_ratio_test.size());
    for (size_t i = 0; i < pq.diag_ratio_ref.size(); ++i) {
        double q = pq.diag_ratio_ref[i] / pq.diag_ratio_test[i];
        CHECK(std::max(q, 1.0 / q) <= 4.0);
    }
    // max-norm pivoting confines |R(k,k)| / sigma_k to the classical window
    double n = 96.0;
    double lower = 1.0 / std::sqrt(n * (n + 1.0) / 2.0);
    for (double v : pq.diag_ratio_ref) {
        CHECK(v >= lower * (1.0 - 1e-10));
        CHECK(v <= std::pow(2.0, n - 1.0));
    }
}
