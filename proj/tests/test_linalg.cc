#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cqrrpt/dense_matrix.hh"
#include "cqrrpt/linalg.hh"
#include "cqrrpt/rng.hh"

namespace cq = cqrrpt;
using cq::DenseMatrix;

namespace {

constexpr double kU = 1.1102230246251565e-16;

DenseMatrix random_matrix(int64_t m, int64_t n, uint64_t seed) {
    DenseMatrix a(m, n);
    cq::CounterRng rng(seed);
    for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < m; ++i) a(i, j) = rng.normal(static_cast<uint64_t>(j * m + i));
    return a;
}

DenseMatrix random_orthonormal(int64_t m, int64_t n, uint64_t seed) {
    return cq::householder_qr(random_matrix(m, n, seed)).q;
}

double rel_residual(const DenseMatrix &m, const DenseMatrix &q, const DenseMatrix &r) {
    DenseMatrix qr = cq::matmul(q, r);
    double num = 0.0;
    for (size_t i = 0; i < m.size(); ++i) {
        double d = m.data()[i] - qr.data()[i];
        num += d * d;
    }
    return std::sqrt(num) / cq::frobenius_norm(m);
}

double orth_loss(const DenseMatrix &q) {
    DenseMatrix g = cq::matmul_at_b(q, q);
    for (int64_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return cq::spectral_norm(g);
}

} // namespace

TEST_CASE("householder_qr on the identity") {
    DenseMatrix m = DenseMatrix::identity(3);
    auto [q, r] = cq::householder_qr(m);
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 3; ++j) {
            CHECK(std::fabs(std::fabs(q(i, j)) - (i == j ? 1.0 : 0.0)) < 1e-15);
            CHECK(std::fabs(std::fabs(r(i, j)) - (i == j ? 1.0 : 0.0)) < 1e-15);
        }
}

TEST_CASE("householder_qr with orthogonal scaled columns") {
    DenseMatrix m(3, 2);
    m(0, 0) = 2.0; // 2 e1
    m(1, 1) = 3.0; // 3 e2
    auto [q, r] = cq::householder_qr(m);
    CHECK(std::fabs(r(0, 0)) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::fabs(r(1, 1)) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(std::fabs(r(0, 1)) < 1e-15);
}

TEST_CASE("householder_qr residual on a seeded 50x10 matrix") {
    DenseMatrix m = random_matrix(50, 10, 7);
    auto [q, r] = cq::householder_qr(m);
    CHECK(rel_residual(m, q, r) <= 1e-14);
    CHECK(orth_loss(q) <= 1e-14);
}

TEST_CASE("householder_qr reconstruction bound over shapes and seeds") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        int64_t m = 20 + 17 * static_cast<int64_t>(seed);
        int64_t n = 4 + 3 * static_cast<int64_t>(seed);
        DenseMatrix a = random_matrix(m, n, 100 + seed);
        auto [q, r] = cq::householder_qr(a);
        CHECK(rel_residual(a, q, r) <= 10.0 * static_cast<double>(n) * kU);
    }
}

TEST_CASE("cholesky on the identity") {
    cq::CholeskyResult ch = cq::cholesky(DenseMatrix::identity(4));
    REQUIRE(ch.ok());
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) CHECK(ch.factor(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("cholesky failure index on an indefinite minor") {
    DenseMatrix g(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = -1.0;
    cq::CholeskyResult ch = cq::cholesky(g);
    CHECK(ch.failure_index == 2);
    CHECK(ch.factor.rows() == 1); // leading block is still a valid factor
    CHECK(ch.factor(0, 0) == 1.0);
}

TEST_CASE("cholesky residual on a well-conditioned Gram matrix") {
    DenseMatrix m = random_matrix(100, 5, 3);
    DenseMatrix g = cq::gram(m);
    cq::CholeskyResult ch = cq::cholesky(g);
    REQUIRE(ch.ok());
    DenseMatrix rtr = cq::matmul_at_b(ch.factor, ch.factor);
    double diff = 0.0;
    for (size_t i = 0; i < g.size(); ++i) {
        double d = rtr.data()[i] - g.data()[i];
        diff += d * d;
    }
    CHECK(std::sqrt(diff) <= 1e-14 * cq::frobenius_norm(g));
}

TEST_CASE("cholesky round-trips seeded triangular factors") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        int64_t n = 8 + 5 * static_cast<int64_t>(seed);
        // R-factor of a tall Gaussian matrix, rows flipped so the diagonal is
        // positive: a well-conditioned Cholesky factor of R^T R.
        DenseMatrix r = cq::householder_qr(random_matrix(4 * n, n, 55 + seed)).r;
        for (int64_t i = 0; i < n; ++i)
            if (r(i, i) < 0.0)
                for (int64_t j = i; j < n; ++j) r(i, j) = -r(i, j);
        cq::CholeskyResult ch = cq::cholesky(cq::matmul_at_b(r, r));
        REQUIRE(ch.ok());
        double scale = cq::max_abs(r);
        for (int64_t j = 0; j < n; ++j)
            for (int64_t i = 0; i <= j; ++i)
                CHECK(std::fabs(ch.factor(i, j) - r(i, j)) <= 1e-13 * scale);
    }
}

TEST_CASE("trsm_right with identity preconditioner") {
    DenseMatrix m = random_matrix(7, 4, 11);
    DenseMatrix x = cq::trsm_right(m, DenseMatrix::identity(4));
    CHECK(x == m);
}

TEST_CASE("trsm_right of a triangular matrix by itself") {
    DenseMatrix m = random_matrix(30, 6, 13);
    DenseMatrix r = cq::householder_qr(m).r;
    DenseMatrix x = cq::trsm_right(r, r);
    for (int64_t i = 0; i < 6; ++i)
        for (int64_t j = 0; j < 6; ++j)
            CHECK(std::fabs(x(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("trsm_right orthonormalizes against the QR factor") {
    DenseMatrix m = random_matrix(200, 20, 17);
    DenseMatrix r = cq::householder_qr(m).r;
    DenseMatrix x = cq::trsm_right(m, r);
    CHECK(std::fabs(cq::cond_2(x) - 1.0) <= 1e-10);
}

TEST_CASE("trsm_right rejects a singular preconditioner") {
    DenseMatrix r = DenseMatrix::identity(3);
    r(1, 1) = 0.0;
    DenseMatrix m = random_matrix(5, 3, 19);
    CHECK_THROWS_AS(cq::trsm_right(m, r), std::domain_error);
}

TEST_CASE("trsm_right recovers Q from Q*R when R is well-conditioned") {
    DenseMatrix q = random_orthonormal(60, 12, 23);
    DenseMatrix r = cq::householder_qr(random_matrix(40, 12, 29)).r;
    DenseMatrix x = cq::trsm_right(cq::matmul(q, r), r);
    REQUIRE(cq::cond_2(r) <= 1e6);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(std::fabs(x.data()[i] - q.data()[i]) < 1e-12);
}

TEST_CASE("gram basics") {
    CHECK(cq::gram(DenseMatrix::identity(3)) == DenseMatrix::identity(3));
    DenseMatrix ones(3, 1);
    ones(0, 0) = ones(1, 0) = ones(2, 0) = 1.0;
    CHECK(cq::gram(ones)(0, 0) == 3.0);
}

TEST_CASE("gram matches a naive dot-product oracle and is exactly symmetric") {
    DenseMatrix m = random_matrix(40, 9, 31);
    DenseMatrix g = cq::gram(m);
    for (int64_t i = 0; i < 9; ++i)
        for (int64_t j = 0; j < 9; ++j) {
            double naive = 0.0;
            for (int64_t t = 0; t < 40; ++t) naive += m(t, i) * m(t, j);
            CHECK(g(i, j) == doctest::Approx(naive).epsilon(1e-15));
            CHECK(g(i, j) == g(j, i)); // bitwise symmetry
        }
}

TEST_CASE("svd_values on a diagonal matrix and on zero") {
    DenseMatrix d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 1.0;
    auto sv = cq::svd_values(d);
    CHECK(sv[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(sv[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(sv[2] == doctest::Approx(1.0).epsilon(1e-15));
    auto zeros = cq::svd_values(DenseMatrix(4, 2));
    CHECK(zeros == std::vector<double>{0.0, 0.0});
}

TEST_CASE("svd_values recovers a constructed spectrum") {
    DenseMatrix u = random_orthonormal(50, 3, 41);
    DenseMatrix v = random_orthonormal(3, 3, 43);
    double sigma[3] = {10.0, 1.0, 0.1};
    DenseMatrix svt(3, 3);
    for (int64_t j = 0; j < 3; ++j)
        for (int64_t i = 0; i < 3; ++i) svt(i, j) = sigma[i] * v(j, i);
    auto sv = cq::svd_values(cq::matmul(u, svt));
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(sv[i] - sigma[i]) <= 1e-12 * sigma[0]);
}

TEST_CASE("svd_values is invariant under column permutation and sign flips") {
    DenseMatrix m = random_matrix(25, 6, 47);
    DenseMatrix shuffled(25, 6);
    int64_t perm[6] = {3, 0, 5, 1, 4, 2};
    double signs[6] = {1, -1, -1, 1, -1, 1};
    for (int64_t j = 0; j < 6; ++j)
        for (int64_t i = 0; i < 25; ++i) shuffled(i, j) = signs[j] * m(i, perm[j]);
    auto a = cq::svd_values(m);
    auto b = cq::svd_values(shuffled);
    for (int i = 0; i < 6; ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-12 * a[0]);
}

TEST_CASE("svd_factors reconstructs the input") {
    DenseMatrix m = random_matrix(30, 8, 53);
    cq::SvdFactors f = cq::svd_factors(m);
    DenseMatrix svt(8, 8);
    for (int64_t j = 0; j < 8; ++j)
        for (int64_t i = 0; i < 8; ++i) svt(i, j) = f.sigma[i] * f.v(j, i);
    CHECK(rel_residual(m, f.u, svt) <= 1e-13);
    CHECK(orth_loss(f.u) <= 1e-13);
}

TEST_CASE("spectral_norm and cond_2 on simple cases") {
    DenseMatrix d(2, 2);
    d(0, 0) = 5.0;
    d(1, 1) = 1.0;
    CHECK(cq::spectral_norm(d) == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(cq::cond_2(d) == doctest::Approx(5.0).epsilon(1e-8));

    DenseMatrix q = random_orthonormal(40, 10, 59);
    double c = cq::cond_2(q);
    CHECK(c >= 1.0);
    CHECK(c <= 1.0 + 1e-8);
}

TEST_CASE("cond_2 of a seeded triangular matrix matches the SVD oracle") {
    DenseMatrix r = cq::householder_qr(random_matrix(80, 64, 61)).r;
    auto sv = cq::svd_values(r);
    double truth = sv.front() / sv.back();
    CHECK(cq::cond_2(r) == doctest::Approx(truth).epsilon(1e-6));
}

TEST_CASE("spectral_norm stays within the one-sided bracket of sigma_1") {
    for (uint64_t seed = 0; seed < 4; ++seed) {
        DenseMatrix m = random_matrix(35, 12, 70 + seed);
        double est = cq::spectral_norm(m);
        double truth = cq::svd_values(m).front();
        CHECK(est <= truth * (1.0 + 1e-12));
        CHECK(est >= truth * (1.0 - 1e-8));
    }
}

TEST_CASE("TriangularPartition blocks tile the source") {
    DenseMatrix r = cq::householder_qr(random_matrix(9, 6, 83)).r.block(0, 4, 0, 6); // 4 x 6
    cq::TriangularPartition part(r, 2);
    DenseMatrix a = part.a(), b = part.b(), c = part.c();
    REQUIRE(a.rows() == 2);
    REQUIRE(b.cols() == 4);
    REQUIRE(c.rows() == 2);
    for (int64_t j = 0; j < 6; ++j)
        for (int64_t i = 0; i < 4; ++i) {
            double v = r(i, j);
            if (i < 2 && j < 2) CHECK(a(i, j) == v);
            if (i < 2 && j >= 2) CHECK(b(i, j - 2) == v);
            if (i >= 2 && j >= 2) CHECK(c(i - 2, j - 2) == v);
            if (i >= 2 && j < 2) CHECK(v == 0.0);
        }
    for (int64_t i = 1; i < 2; ++i)
        for (int64_t j = 0; j < i; ++j) CHECK(a(i, j) == 0.0);
}
