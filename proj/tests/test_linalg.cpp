#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mnl/linalg.hpp"
#include "test_util.hpp"

using mnl::Matrix;
using mnl::Vec;
using testutil::random_matrix;
using testutil::random_orthogonal;

TEST(Kronecker, ScalarOneActsAsIdentity) {
    auto gen = testutil::rng(1);
    Matrix one(1, 1, {1.0});
    Matrix m = random_matrix(3, 4, gen);
    Matrix k = mnl::kronecker(one, m);
    EXPECT_EQ(k, m);
}

TEST(Kronecker, IdentityTimesIdentity) {
    Matrix k = mnl::kronecker(Matrix::identity(2), Matrix::identity(3));
    EXPECT_EQ(k, Matrix::identity(6));
}

TEST(Kronecker, MatchesIndexFormula) {
    Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    Matrix b = Matrix::from_rows({{0, 1}, {1, 0}});
    Matrix k = mnl::kronecker(a, b);
    ASSERT_EQ(k.rows, 4u);
    ASSERT_EQ(k.cols, 4u);
    // Oracle: evaluate the entry-index formula for all 16 entries.
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t p = 0; p < 2; ++p)
                for (std::size_t q = 0; q < 2; ++q)
                    EXPECT_DOUBLE_EQ(k(i * 2 + p, j * 2 + q), a(i, j) * b(p, q));
}

TEST(Kronecker, MixedProductProperty) {
    auto gen = testutil::rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix a = random_matrix(2, 3, gen);
        Matrix c = random_matrix(3, 2, gen);
        Matrix b = random_matrix(3, 2, gen);
        Matrix d = random_matrix(2, 4, gen);
        Matrix lhs = mnl::matmul(mnl::kronecker(a, b), mnl::kronecker(c, d));
        Matrix rhs = mnl::kronecker(mnl::matmul(a, c), mnl::matmul(b, d));
        double scale = std::max(1.0, mnl::frobenius_norm(rhs));
        EXPECT_LT(mnl::frobenius_norm(mnl::mat_sub(lhs, rhs)) / scale, 1e-10);
    }
}

TEST(Svd, Identity3) {
    auto r = mnl::svd(Matrix::identity(3));
    for (double s : r.singular_values) EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Svd, PermutedDiagonal) {
    // diag(3,2,1) with rows permuted; singular values are orthogonally invariant.
    Matrix m = Matrix::from_rows({{0, 2, 0}, {3, 0, 0}, {0, 0, 1}});
    auto r = mnl::svd(m);
    EXPECT_NEAR(r.singular_values[0], 3.0, 1e-13);
    EXPECT_NEAR(r.singular_values[1], 2.0, 1e-13);
    EXPECT_NEAR(r.singular_values[2], 1.0, 1e-13);
}

namespace {

// Oracle: eigenvalues of the symmetric PSD matrix M^T M via power iteration
// with deflation. Independent of the Jacobi SVD path.
Vec symmetric_psd_eigenvalues(Matrix a) {
    const std::size_t n = a.rows;
    Vec eigen;
    std::mt19937_64 gen(99);
    std::normal_distribution<double> dist;
    for (std::size_t k = 0; k < n; ++k) {
        Vec v(n);
        for (double& x : v) x = dist(gen);
        double lambda = 0.0;
        for (int it = 0; it < 20000; ++it) {
            Vec w = mnl::matvec(a, v);
            double nw = mnl::norm2(w);
            if (nw < 1e-300) { lambda = 0.0; break; }
            for (double& x : w) x /= nw;
            lambda = mnl::dot(w, mnl::matvec(a, w));
            v = w;
        }
        eigen.push_back(std::max(lambda, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) -= lambda * v[i] * v[j];
    }
    std::sort(eigen.begin(), eigen.end(), std::greater<double>());
    return eigen;
}

}  // namespace

TEST(Svd, SingularValuesSquaredAreGramEigenvalues) {
    auto gen = testutil::rng(3);
    Matrix m = random_matrix(5, 3, gen);
    auto r = mnl::svd(m);
    Vec lambda = symmetric_psd_eigenvalues(mnl::matmul(mnl::transpose(m), m));
    ASSERT_EQ(lambda.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_NEAR(r.singular_values[i] * r.singular_values[i], lambda[i], 1e-8 * std::max(1.0, lambda[0]));
}

TEST(Svd, ReconstructionAndOrthonormality) {
    auto gen = testutil::rng(4);
    std::uniform_int_distribution<std::size_t> dim(1, 12);
    for (int trial = 0; trial < 1000; ++trial) {
        Matrix m = random_matrix(dim(gen), dim(gen), gen);
        auto r = mnl::svd(m);
        const std::size_t k = r.singular_values.size();
        ASSERT_EQ(k, std::min(m.rows, m.cols));
        // non-increasing, non-negative
        for (std::size_t i = 0; i + 1 < k; ++i) EXPECT_GE(r.singular_values[i], r.singular_values[i + 1]);
        EXPECT_GE(r.singular_values.back(), 0.0);
        // U diag(s) V^T reconstructs m
        Matrix us(m.rows, k);
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < k; ++j) us(i, j) = r.left_vectors(i, j) * r.singular_values[j];
        Matrix rec = mnl::matmul(us, mnl::transpose(r.right_vectors));
        double s1 = r.singular_values.front();
        EXPECT_LE(mnl::frobenius_norm(mnl::mat_sub(rec, m)), 1e-10 * std::max(s1, 1e-30));
        // orthonormal columns
        for (const Matrix* q : {&r.left_vectors, &r.right_vectors}) {
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = a; b < k; ++b) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < q->rows; ++i) acc += (*q)(i, a) * (*q)(i, b);
                    EXPECT_NEAR(acc, a == b ? 1.0 : 0.0, 1e-10);
                }
        }
    }
}

TEST(Svd, HandlesGradedSpectra) {
    // spectra spanning twelve decades through random rotations
    auto gen = testutil::rng(12345);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + trial % 8;
        Matrix qa = random_orthogonal(n, gen);
        Matrix qb = random_orthogonal(n, gen);
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    acc += qa(i, k) * std::pow(10.0, -12.0 * static_cast<double>(k) / n) * qb(j, k);
                m(i, j) = acc;
            }
        auto r = mnl::svd(m);
        Matrix us(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) us(i, j) = r.left_vectors(i, j) * r.singular_values[j];
        Matrix rec = mnl::matmul(us, mnl::transpose(r.right_vectors));
        EXPECT_LE(mnl::frobenius_norm(mnl::mat_sub(rec, m)), 1e-12 * r.singular_values[0]);
    }
}

TEST(Svd, WideMatrixHandledByTranspose) {
    auto gen = testutil::rng(5);
    Matrix m = random_matrix(3, 7, gen);
    auto r = mnl::svd(m);
    EXPECT_EQ(r.singular_values.size(), 3u);
    EXPECT_EQ(r.left_vectors.rows, 3u);
    EXPECT_EQ(r.right_vectors.rows, 7u);
}

TEST(Svd, ZeroMatrixGetsCompletedBasis) {
    Matrix z(4, 2);
    auto r = mnl::svd(z);
    EXPECT_DOUBLE_EQ(r.singular_values[0], 0.0);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = a; b < 2; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) acc += r.left_vectors(i, a) * r.left_vectors(i, b);
            EXPECT_NEAR(acc, a == b ? 1.0 : 0.0, 1e-12);
        }
}

namespace {

// Oracle: rank by Gaussian elimination with partial pivoting.
std::size_t elimination_rank(Matrix m, double tol) {
    std::size_t rank = 0;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m.cols && row < m.rows; ++col) {
        std::size_t piv = row;
        for (std::size_t i = row + 1; i < m.rows; ++i)
            if (std::fabs(m(i, col)) > std::fabs(m(piv, col))) piv = i;
        if (std::fabs(m(piv, col)) <= tol) continue;
        for (std::size_t j = 0; j < m.cols; ++j) std::swap(m(row, j), m(piv, j));
        for (std::size_t i = row + 1; i < m.rows; ++i) {
            double f = m(i, col) / m(row, col);
            for (std::size_t j = col; j < m.cols; ++j) m(i, j) -= f * m(row, j);
        }
        ++rank;
        ++row;
    }
    return rank;
}

}  // namespace

TEST(NumericalRank, Identity) { EXPECT_EQ(mnl::numerical_rank(Matrix::identity(3)), 3u); }

TEST(NumericalRank, ProportionalRows) {
    EXPECT_EQ(mnl::numerical_rank(Matrix::from_rows({{1, 2}, {2, 4}})), 1u);
}

TEST(NumericalRank, ZeroMatrixHasRankZero) { EXPECT_EQ(mnl::numerical_rank(Matrix(3, 5)), 0u); }

TEST(NumericalRank, RandomWideMatrixFullRank) {
    auto gen = testutil::rng(6);
    Matrix m = random_matrix(4, 7, gen);
    EXPECT_EQ(mnl::numerical_rank(m), 4u);
    EXPECT_EQ(elimination_rank(m, 1e-10), 4u);
}

TEST(NumericalRank, InvariantUnderPermutationAndOrthogonal) {
    auto gen = testutil::rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m = random_matrix(5, 4, gen);
        // plant a rank deficiency in half the trials
        if (trial % 2 == 0)
            for (std::size_t j = 0; j < m.cols; ++j) m(4, j) = m(0, j) + m(1, j);
        std::size_t r0 = mnl::numerical_rank(m);
        // row permutation
        Matrix mp = m;
        for (std::size_t j = 0; j < m.cols; ++j) std::swap(mp(0, j), mp(3, j));
        EXPECT_EQ(mnl::numerical_rank(mp), r0);
        // column permutation
        Matrix mc = m;
        for (std::size_t i = 0; i < m.rows; ++i) std::swap(mc(i, 1), mc(i, 2));
        EXPECT_EQ(mnl::numerical_rank(mc), r0);
        // orthogonal multiplication
        Matrix q = random_orthogonal(5, gen);
        EXPECT_EQ(mnl::numerical_rank(mnl::matmul(q, m)), r0);
    }
}

TEST(Norms, SpectralNormOfIdentity) {
    EXPECT_NEAR(mnl::spectral_norm(Matrix::identity(5)), 1.0, 1e-14);
}

TEST(Norms, SpectralNormOfRankOne) {
    // u v^T with |u| = 2, |v| = 3 has a single singular value 6.
    Vec u = {2.0, 0.0, 0.0};
    Vec v = {0.0, 3.0};
    Matrix m(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) m(i, j) = u[i] * v[j];
    EXPECT_NEAR(mnl::spectral_norm(m), 6.0, 1e-12);
}

TEST(Norms, CollectionNorm) {
    std::vector<Matrix> ws = {Matrix::identity(2), Matrix::identity(2)};
    EXPECT_DOUBLE_EQ(mnl::frobenius_norm_collection(ws), 2.0);
}

TEST(Cholesky, SolvesSpdSystem) {
    auto gen = testutil::rng(8);
    Matrix a = random_matrix(6, 6, gen);
    Matrix spd = mnl::matmul(mnl::transpose(a), a);
    for (std::size_t i = 0; i < 6; ++i) spd(i, i) += 1.0;
    Vec x_true = testutil::random_vec(6, gen);
    Vec b = mnl::matvec(spd, x_true);
    Vec x = mnl::cholesky_solve(spd, b);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(x[i], x_true[i], 1e-10);
}

TEST(Cholesky, RejectsIndefinite) {
    Matrix m = Matrix::from_rows({{1, 0}, {0, -1}});
    EXPECT_THROW(mnl::cholesky_solve(m, {1.0, 1.0}), mnl::error);
}

TEST(Svd, RejectsNonFinite) {
    Matrix m(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(mnl::svd(m), mnl::error);
}
