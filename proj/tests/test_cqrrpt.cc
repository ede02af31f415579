#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cqrrpt/cqrrpt.hh"
#include "cqrrpt/linalg.hh"
#include "cqrrpt/testmat.hh"

namespace cq = cqrrpt;
using cq::CqrrptConfig;
using cq::CqrrptOutput;
using cq::DenseMatrix;

namespace {

constexpr double kU = cq::unit_roundoff;

double orth_loss(const DenseMatrix &q) {
    DenseMatrix g = cq::matmul_at_b(q, q);
    for (int64_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return cq::spectral_norm(g);
}

DenseMatrix with_condition(int64_t m, int64_t n, double cond, uint64_t seed) {
    // geometric spectrum from 1 down to 1/cond
    std::vector<double> sigma(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        sigma[static_cast<size_t>(i)] =
            std::pow(cond, -static_cast<double>(i) / static_cast<double>(n - 1));
    return cq::gen_spectral(m, n, cq::SpectrumSpec::explicit_list(sigma), seed);
}

} // namespace

TEST_CASE("cholesky_qr on an orthonormal input is a near no-op") {
    DenseMatrix q0 = cq::householder_qr(cq::gen_gaussian(60, 8, 1)).q;
    cq::CholeskyQrResult res = cq::cholesky_qr(q0);
    REQUIRE(res.ok());
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 8; ++j)
            CHECK(std::fabs(res.r(i, j) - (i == j ? 1.0 : 0.0)) < 1e-13);
    double dev = 0.0;
    for (size_t i = 0; i < q0.size(); ++i)
        dev = std::max(dev, std::fabs(res.q.data()[i] - q0.data()[i]));
    CHECK(dev < 1e-13);
}

TEST_CASE("cholesky_qr degrades as u cond^2 across the conditioning range") {
    DenseMatrix good = with_condition(300, 24, 1e3, 2);
    cq::CholeskyQrResult res_good = cq::cholesky_qr(good);
    REQUIRE(res_good.ok());
    CHECK(orth_loss(res_good.q) <= 1e-9);

    DenseMatrix bad = with_condition(300, 24, 1e9, 3);
    cq::CholeskyQrResult res_bad = cq::cholesky_qr(bad);
    if (res_bad.ok()) CHECK(orth_loss(res_bad.q) >= 1e-3);
}

TEST_CASE("cholesky_qr2 restores orthogonality inside its viability range") {
    DenseMatrix q0 = cq::householder_qr(cq::gen_gaussian(50, 6, 4)).q;
    cq::CholeskyQrResult res0 = cq::cholesky_qr2(q0);
    REQUIRE(res0.ok());
    CHECK(orth_loss(res0.q) <= 1e-14);

    DenseMatrix mid = with_condition(300, 24, 1e6, 5);
    cq::CholeskyQrResult res1 = cq::cholesky_qr2(mid);
    REQUIRE(res1.ok());
    CHECK(orth_loss(res1.q) <= 1e-12);
    // combined R still reconstructs the input
    DenseMatrix qr = cq::matmul(res1.q, res1.r);
    double diff = 0.0;
    for (size_t i = 0; i < qr.size(); ++i) {
        double d = qr.data()[i] - mid.data()[i];
        diff += d * d;
    }
    CHECK(std::sqrt(diff) <= 1e-12 * cq::frobenius_norm(mid));

    DenseMatrix hard = with_condition(300, 24, 1e10, 6);
    cq::CholeskyQrResult res2 = cq::cholesky_qr2(hard);
    if (res2.ok()) CHECK(orth_loss(res2.q) >= 1e-6);
}

TEST_CASE("rank_stage1 trivial cases") {
    DenseMatrix r(2, 2);
    r(0, 0) = 1.0;
    r(1, 1) = 1e-20;
    CHECK(cq::rank_stage1(r) == 1);
    CHECK(cq::rank_stage1(DenseMatrix(3, 5)) == 0);
}

TEST_CASE("rank_stage1 matches a direct evaluation of the min-set") {
    // diagonal R with trailing Frobenius masses (1, 1e-8, 1e-18, 1e-19)
    double t[5] = {1.0, 1e-8, 1e-18, 1e-19, 0.0};
    DenseMatrix r(4, 4);
    for (int i = 0; i < 4; ++i) r(i, i) = std::sqrt(t[i] * t[i] - t[i + 1] * t[i + 1]);
    double s = cq::max_abs(r);
    // oracle: first ell with ||C_ell||_F <= u * s, trailing masses summed directly
    int64_t oracle = 4;
    for (int64_t ell = 0; ell <= 4; ++ell) {
        double mass = 0.0;
        for (int64_t i = ell; i < 4; ++i) mass += r(i, i) * r(i, i);
        if (std::sqrt(mass) <= kU * s) {
            oracle = ell;
            break;
        }
    }
    CHECK(oracle == 2);
    CHECK(cq::rank_stage1(r) == oracle);
}

TEST_CASE("rank_stage1 trailing masses are monotone") {
    DenseMatrix r = cq::qrcp_maxnorm(cq::gen_gaussian(40, 12, 7), -1.0, false).r;
    double prev = 1e300;
    for (int64_t ell = 0; ell <= r.rows(); ++ell) {
        double mass = 0.0;
        for (int64_t i = ell; i < r.rows(); ++i)
            for (int64_t j = i; j < r.cols(); ++j) mass += r(i, j) * r(i, j);
        CHECK(mass <= prev);
        prev = mass;
    }
}

TEST_CASE("cond_estimate on the identity and diagonal matrices") {
    DenseMatrix eye = DenseMatrix::identity(5);
    for (auto method : {cq::CondMethod::diag_ratio, cq::CondMethod::krylov_bounds,
                        cq::CondMethod::identity_deviation}) {
        cq::CondBound b = cq::cond_estimate(eye, method);
        CHECK(b.value >= 1.0);
        CHECK(b.value <= 1.0 + 3e-6);
    }
    DenseMatrix d(2, 2);
    d(0, 0) = 10.0;
    d(1, 1) = 1.0;
    CHECK(cq::cond_estimate(d, cq::CondMethod::diag_ratio).value == 10.0);
    CHECK(!cq::cond_estimate(d, cq::CondMethod::diag_ratio).is_upper_bound);
}

TEST_CASE("cond_estimate sandwich on a seeded triangular matrix") {
    DenseMatrix r = cq::householder_qr(cq::gen_gaussian(80, 64, 8)).r;
    auto sv = cq::svd_values(r);
    double truth = sv.front() / sv.back();
    cq::CondBound lo = cq::cond_estimate(r, cq::CondMethod::diag_ratio);
    cq::CondBound hi = cq::cond_estimate(r, cq::CondMethod::krylov_bounds);
    CHECK(lo.value <= truth * (1.0 + 1e-10));
    CHECK(hi.value >= truth * (1.0 - 1e-10));
    CHECK(hi.is_upper_bound);
}

TEST_CASE("identity_deviation falls back to +inf when tau >= 1") {
    DenseMatrix x(2, 2);
    x(0, 0) = 5.0;
    x(1, 1) = 0.1;
    cq::CondBound b = cq::cond_estimate(x, cq::CondMethod::identity_deviation);
    CHECK(std::isinf(b.value));
}

TEST_CASE("rank_stage2 keeps the full block on well-conditioned input") {
    DenseMatrix m = cq::gen_gaussian(200, 30, 9);
    cq::SketchOperator s = cq::sample_sketch(cq::SketchFamily::gaussian, 60, 200, 0, 10);
    cq::PivotedQR sk = cq::qrcp_maxnorm(cq::apply(s, m), -1.0, false);
    REQUIRE(sk.rank == 30);
    DenseMatrix m_k = m.select_columns(sk.pivots);
    cq::Stage2Result res = cq::rank_stage2(m_k, sk.r.leading_block(30), 1e-4);
    CHECK(res.rank == 30);
    CHECK(res.retries == 0);
    CHECK(res.cond_at_rank < 50.0);
}

TEST_CASE("rank_stage2 falls back on a Cholesky failure index") {
    // Exact rank-8 block padded with a zero column and bitwise copies: the
    // zero column makes the Gram minor at index 9 exactly singular.
    DenseMatrix base = cq::gen_gaussian(40, 8, 11);
    DenseMatrix m_k(40, 12);
    for (int64_t j = 0; j < 8; ++j)
        for (int64_t i = 0; i < 40; ++i) m_k(i, j) = base(i, j);
    // column 8 stays zero; columns 9..11 duplicate the first three
    for (int64_t j = 9; j < 12; ++j)
        for (int64_t i = 0; i < 40; ++i) m_k(i, j) = base(i, j - 9);
    cq::Stage2Result res = cq::rank_stage2(m_k, DenseMatrix::identity(12), 1e-4);
    CHECK(res.retries >= 1);
    CHECK(res.k0_final == 8);
    CHECK(res.rank <= 8);
}

TEST_CASE("rank_stage2 cuts numerically dependent columns either way") {
    // duplicates without a zero column: either the Cholesky fails or the
    // condition check rejects the u-level diagonal
    DenseMatrix base = cq::gen_gaussian(50, 6, 12);
    DenseMatrix m_k(50, 9);
    for (int64_t j = 0; j < 6; ++j)
        for (int64_t i = 0; i < 50; ++i) m_k(i, j) = base(i, j);
    for (int64_t j = 6; j < 9; ++j)
        for (int64_t i = 0; i < 50; ++i) m_k(i, j) = base(i, j - 6);
    cq::Stage2Result res = cq::rank_stage2(m_k, DenseMatrix::identity(9), 1e-4);
    CHECK(res.rank <= 6);
}

TEST_CASE("rank_stage2 on a single nonzero column") {
    DenseMatrix m_k(20, 1);
    for (int64_t i = 0; i < 20; ++i) m_k(i, 0) = 1.0 + static_cast<double>(i);
    DenseMatrix a(1, 1);
    a(0, 0) = cq::column_norm(m_k, 0);
    cq::Stage2Result res = cq::rank_stage2(m_k, a, 1e-4);
    CHECK(res.rank == 1);
}

TEST_CASE("cqrrpt_core on a full-rank tall matrix with a Gaussian sketch") {
    DenseMatrix m = cq::gen_gaussian(1000, 100, 21);
    cq::SketchOperator s = cq::sample_sketch(cq::SketchFamily::gaussian, 125, 1000, 0, 22);
    CqrrptConfig cfg;
    CqrrptOutput out = cq::cqrrpt_core(m, s, cfg);
    CHECK(out.k0 == 100);
    CHECK(out.k == 100);
    REQUIRE(out.diagnostics.validation.has_value());
    CHECK(out.diagnostics.validation->pass);
    cq::ValidationReport rep = cq::validate(out.factorization, m, 1e-13);
    CHECK(rep.recon_rel <= 1e-13);
    CHECK(rep.orth_loss <= 1e-13);
    CHECK(rep.orth_loss <= 180.0 * 1000 * 100 * kU); // generous envelope
}

TEST_CASE("cqrrpt on scaled coordinate columns returns a scaled identity R") {
    const double c = 3.5;
    DenseMatrix m(40, 8);
    for (int64_t j = 0; j < 8; ++j) m(j, j) = c;
    CqrrptConfig cfg;
    cfg.family = cq::SketchFamily::gaussian;
    cfg.gamma = 2.0;
    cfg.seed = 23;
    cfg.measure_distortion = true;
    CqrrptOutput out = cq::cqrrpt(m, cfg);
    REQUIRE(out.diagnostics.distortion.has_value());
    REQUIRE(*out.diagnostics.distortion < 1.0);
    CHECK(out.k == 8);
    for (int64_t i = 0; i < 8; ++i)
        CHECK(std::fabs(std::fabs(out.factorization.r(i, i)) - c) <= c * 1e-12);
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = i + 1; j < 8; ++j)
            CHECK(std::fabs(out.factorization.r(i, j)) <= c * 1e-12);
}

TEST_CASE("cqrrpt detects an embedded exact rank") {
    DenseMatrix m = cq::gen_exact_rank(200, 40, 10, 24);
    CqrrptConfig cfg;
    cfg.seed = 25;
    CqrrptOutput out = cq::cqrrpt(m, cfg);
    CHECK(out.k == 10);
    cq::ValidationReport rep = cq::validate(out.factorization, m, 1.0);
    CHECK(rep.recon_rel <= 1e-12);
}

TEST_CASE("cqrrpt fills the documented defaults") {
    CHECK(cq::sketch_rows_for(1.25, 50) == 63);
    CHECK(cq::sketch_rows_for(3.0, 500) == 1500);
    CqrrptConfig cfg;
    CHECK(cfg.gamma == 1.25);
    CHECK(cfg.family == cq::SketchFamily::saso);
    CHECK(cfg.nnz_per_col == 4);
}

TEST_CASE("cqrrpt on the zero matrix reports rank zero") {
    CqrrptOutput out = cq::cqrrpt(DenseMatrix(30, 5));
    CHECK(out.k == 0);
    CHECK(out.k0 == 0);
    CHECK(out.factorization.q.cols() == 0);
    CHECK(out.factorization.r.rows() == 0);
}

TEST_CASE("cqrrpt output is bitwise deterministic") {
    DenseMatrix m = cq::gen_gaussian(150, 20, 26);
    CqrrptConfig cfg;
    cfg.seed = 27;
    CqrrptOutput a = cq::cqrrpt(m, cfg);
    CqrrptOutput b = cq::cqrrpt(m, cfg);
    CHECK(a.factorization.q == b.factorization.q);
    CHECK(a.factorization.r == b.factorization.r);
    CHECK(a.factorization.pivots == b.factorization.pivots);
    CHECK(a.k == b.k);
    cfg.seed = 28;
    CqrrptOutput c = cq::cqrrpt(m, cfg);
    CHECK(!(a.factorization.r == c.factorization.r));
}

TEST_CASE("valid output whenever the sketch keeps the rank") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        int64_t n = 6 + 2 * static_cast<int64_t>(seed);
        DenseMatrix m = cq::gen_gaussian(40 * (1 + static_cast<int64_t>(seed % 3)), n, 400 + seed);
        cq::SketchOperator s =
            cq::sample_sketch(cq::SketchFamily::gaussian, 2 * n, m.rows(), 0, 500 + seed);
        cq::SubspaceDiagnostics d = cq::diagnostics(s, m);
        REQUIRE(d.effective_distortion < 1.0);
        CqrrptConfig cfg;
        CqrrptOutput out = cq::cqrrpt_core(m, s, cfg);
        CHECK(out.k == n);
        cq::ValidationReport rep =
            cq::validate(out.factorization, m, 100.0 * static_cast<double>(n) * kU);
        CHECK(rep.pass);
    }
}

TEST_CASE("rank_stage2 retries are capped and shrink monotonically") {
    // A single retry suffices: the leading block of a failed factor is valid.
    DenseMatrix base = cq::gen_gaussian(30, 5, 13);
    DenseMatrix m_k(30, 7);
    for (int64_t j = 0; j < 5; ++j)
        for (int64_t i = 0; i < 30; ++i) m_k(i, j) = base(i, j);
    for (int64_t j = 5; j < 7; ++j)
        for (int64_t i = 0; i < 30; ++i) m_k(i, j) = base(i, j - 5);
    cq::Stage2Result res = cq::rank_stage2(m_k, DenseMatrix::identity(7), 1e-4);
    CHECK(res.retries <= 3);
    CHECK(res.k0_final <= 7);
}

TEST_CASE("flop model matches the hand-evaluated polynomial") {
    double v = cq::flop_model(1000, 100, 100, 125, 0.0);
    CHECK(v == doctest::Approx(3.227e7).epsilon(1e-3));
    CHECK(cq::flop_model(500, 64, 0, 80, 77.0) == 77.0);
}

TEST_CASE("flop model equals an independent per-step re-summation exactly") {
    struct Tuple { int64_t m, n, k, d; };
    Tuple cases[] = {{1000, 100, 100, 125}, {4096, 256, 256, 320}, {512, 64, 17, 80},
                     {100000, 1000, 1000, 1250}, {77, 13, 9, 20}};
    for (auto t : cases) {
        using I = __int128;
        I m = t.m, n = t.n, k = t.k, d = t.d;
        I qrcp6 = 24 * d * n * k - 12 * k * k * (d + n) + 8 * k * k * k;
        I trsm6 = 6 * m * k * k;
        I cholqr6 = 6 * m * k * (k + 1) + 2 * k * k * k + 3 * k * k + k + 6 * m * k * k;
        double oracle = static_cast<double>(qrcp6 + trsm6 + cholqr6) / 6.0 + 5.0;
        CHECK(cq::flop_model(t.m, t.n, t.k, t.d, 5.0) == oracle); // bitwise equal
    }
}

TEST_CASE("flop model approaches the 3 m n^2 leading term") {
    double r5 = cq::flop_model(100000, 1000, 1000, 1250, 0.0) / (1e5 * 1e6);
    double r6 = cq::flop_model(1000000, 1000, 1000, 1250, 0.0) / (1e6 * 1e6);
    CHECK(std::fabs(r6 - 3.0) < std::fabs(r5 - 3.0));
    CHECK(std::fabs(r6 - 3.0) <= 0.01 * 3.0);
}

TEST_CASE("flop model rejects k beyond min(d, n)") {
    CHECK_THROWS(cq::flop_model(100, 10, 11, 20, 0.0));
    CHECK_THROWS(cq::flop_model(100, 20, 11, 10, 0.0));
}

TEST_CASE("config invariants are enforced") {
    DenseMatrix m = cq::gen_gaussian(20, 4, 29);
    CqrrptConfig bad_gamma;
    bad_gamma.gamma = 0.5;
    CHECK_THROWS(cq::cqrrpt(m, bad_gamma));
    CqrrptConfig bad_tol;
    bad_tol.eps_tol = kU / 2;
    CHECK_THROWS(cq::cqrrpt(m, bad_tol));
}

TEST_CASE("phase timings cover the run") {
    DenseMatrix m = cq::gen_gaussian(400, 64, 30);
    CqrrptConfig cfg;
    cfg.seed = 31;
    cfg.validate_output = false;
    CqrrptOutput out = cq::cqrrpt(m, cfg);
    const auto &t = out.diagnostics.timings;
    double phases = t.sketch + t.qrcp + t.rank_select + t.precondition + t.cholesky_qr + t.undo;
    CHECK(phases <= t.total);
    CHECK(phases >= 0.95 * t.total);
    CHECK(out.k <= out.k0);
    CHECK(out.k0 <= m.cols());
    CHECK(out.diagnostics.flop_estimate > 0.0);
    CHECK(out.diagnostics.truncation_ratio >= 0.0);
}
