#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "ilcset/matrix.hpp"

using namespace ilcset;

namespace {

Mat random_mat(std::mt19937_64& gen, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = d(gen);
    return m;
}

Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

double eigen_radius(const Mat& m) { return to_eigen(m).eigenvalues().cwiseAbs().maxCoeff(); }

}  // namespace

TEST(InfNorm, Examples) {
    EXPECT_EQ(inf_norm(Mat(2, 2)), 0.0);
    EXPECT_EQ(inf_norm(Mat::identity(3)), 1.0);
    EXPECT_EQ(inf_norm(Mat{{1, -2}, {3, 0.5}}), 3.5);
}

TEST(SpectralRadius, Examples) {
    EXPECT_NEAR(spectral_radius(Mat::identity(2)), 1.0, 1e-14);
    EXPECT_NEAR(spectral_radius(Mat{{0, 1}, {0, 0}}), 0.0, 1e-14);
    // λ² − 0.8λ + 0.13 = 0
    EXPECT_NEAR(spectral_radius(Mat{{0.5, 0.2}, {0.1, 0.3}}), 0.4 + std::sqrt(0.03), 1e-12);
}

TEST(SpectralRadius, ComplexPair) {
    // rotation scaled by 0.9 has eigenvalues 0.9 e^{±iθ}
    const double c = 0.9 * std::cos(0.7), s = 0.9 * std::sin(0.7);
    EXPECT_NEAR(spectral_radius(Mat{{c, -s}, {s, c}}), 0.9, 1e-12);
}

TEST(SpectralRadius, NonSquareThrows) { EXPECT_THROW(spectral_radius(Mat(2, 3)), NonSquare); }

TEST(SpectralRadius, EmptyIsZero) { EXPECT_EQ(spectral_radius(Mat(0, 0)), 0.0); }

TEST(SpectralRadius, AgreesWithEigenOnRandom4x4) {
    std::mt19937_64 gen(1234);
    for (int t = 0; t < 100; ++t) {
        const Mat m = random_mat(gen, 4, 4);
        EXPECT_NEAR(spectral_radius(m), eigen_radius(m), 1e-8) << "trial " << t;
    }
}

TEST(SpectralRadius, AgreesWithEigenUpTo8x8) {
    std::mt19937_64 gen(99);
    for (std::size_t n = 1; n <= 8; ++n) {
        for (int t = 0; t < 20; ++t) {
            const Mat m = random_mat(gen, n, n, -3.0, 3.0);
            const double ref = eigen_radius(m);
            EXPECT_NEAR(spectral_radius(m), ref, 1e-10 * std::max(1.0, ref)) << n << "x" << n;
        }
    }
}

TEST(SpectralRadius, Bounds) {
    std::mt19937_64 gen(7);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + gen() % 6;
        const Mat m = random_mat(gen, n, n);
        const double rho = spectral_radius(m);
        EXPECT_LE(rho, inf_norm(m) + 1e-12);
        EXPECT_LE(rho, spectral_norm(m) + 1e-12);
        EXPECT_NEAR(rho, spectral_radius(transpose(m)), 1e-9);
    }
}

TEST(SpectralRadius, DefectiveAndTriangular) {
    EXPECT_NEAR(spectral_radius(Mat{{0.5, 1, 0}, {0, 0.5, 1}, {0, 0, 0.5}}), 0.5, 1e-5);
    EXPECT_NEAR(spectral_radius(Mat{{0.2, 3, -1}, {0, -0.7, 2}, {0, 0, 0.4}}), 0.7, 1e-12);
}

TEST(SpectralNorm, Examples) {
    EXPECT_EQ(spectral_norm(Mat(2, 3)), 0.0);
    EXPECT_NEAR(spectral_norm(Mat{{2, 0}, {0, -3}}), 3.0, 1e-12);
    EXPECT_NEAR(spectral_norm(Mat{{0, 1}, {0, 0}}), 1.0, 1e-12);
}

TEST(SpectralNorm, AgreesWithSvd) {
    std::mt19937_64 gen(42);
    for (int t = 0; t < 100; ++t) {
        const std::size_t r = 1 + gen() % 5, c = 1 + gen() % 5;
        const Mat m = random_mat(gen, r, c, -2.0, 2.0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
        EXPECT_NEAR(spectral_norm(m), svd.singularValues()(0), 1e-10);
    }
}

TEST(SymmetricEigenvalues, AgreeWithSelfAdjointSolver) {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + gen() % 8;
        const Mat a = random_mat(gen, n, n);
        const Mat s = a + transpose(a);
        const auto ours = symmetric_eigenvalues(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(s));
        ASSERT_EQ(ours.size(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ours[i], es.eigenvalues()(static_cast<long>(i)), 1e-10);
    }
}

TEST(Invert, Examples) {
    EXPECT_EQ(invert(Mat::identity(3)), Mat::identity(3));
    const Mat d = invert(Mat{{2, 0}, {0, 4}});
    EXPECT_DOUBLE_EQ(d(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(d(1, 1), 0.25);
    const Mat inv = invert(Mat{{2, 1}, {-0.4, 0.8}});
    const Mat expected{{0.4, -0.5}, {0.2, 1.0}};
    EXPECT_LE(max_abs(inv - expected), 1e-14);
}

TEST(Invert, SingularThrows) {
    EXPECT_THROW(invert(Mat{{1, 2}, {2, 4}}), Singular);
    EXPECT_THROW(invert(Mat(3, 3)), Singular);
    EXPECT_THROW(invert(Mat(2, 3)), NonSquare);
}

TEST(Invert, ResidualAndInvolution) {
    std::mt19937_64 gen(11);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + gen() % 6;
        Mat m = random_mat(gen, n, n);
        m += static_cast<double>(n) * Mat::identity(n);  // well conditioned
        const Mat inv = invert(m);
        EXPECT_LE(identity_residual(m * inv), 1e-9);
        EXPECT_LE(inf_norm(invert(inv) - m), 1e-8 * inf_norm(m));
    }
}

TEST(Invert, IllConditionedWithinContract) {
    // condition number about 4e7
    const Mat m{{1, 1}, {1, 1 + 1e-7}};
    EXPECT_LE(identity_residual(m * invert(m)), 1e-9);
}

TEST(Determinant, MatchesEigen) {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + gen() % 5;
        const Mat m = random_mat(gen, n, n);
        EXPECT_NEAR(determinant(m), to_eigen(m).determinant(), 1e-12);
    }
}

TEST(Algebra, BlocksAndConcatenation) {
    const Mat h = hcat(Mat::identity(2), Mat(2, 1));
    EXPECT_EQ(h, (Mat{{1, 0, 0}, {0, 1, 0}}));
    EXPECT_EQ(block2x2(Mat{{1}}, Mat{{2}}, Mat{{3}}, Mat{{4}}), (Mat{{1, 2}, {3, 4}}));
    EXPECT_EQ(vcat(Mat{{1, 2}}, Mat{{3, 4}}), (Mat{{1, 2}, {3, 4}}));
    EXPECT_EQ(block(Mat{{1, 2, 3}, {4, 5, 6}}, 0, 1, 2, 2), (Mat{{2, 3}, {5, 6}}));
    // empty partitions
    EXPECT_EQ(hcat(Mat::identity(2), Mat(2, 0)), Mat::identity(2));
    EXPECT_EQ(block2x2(Mat::identity(2), Mat(2, 0), Mat(0, 2), Mat(0, 0)), Mat::identity(2));
}

TEST(Algebra, TransposeInvolution) {
    std::mt19937_64 gen(8);
    const Mat m = random_mat(gen, 3, 4);
    EXPECT_EQ(transpose(transpose(m)), m);
    EXPECT_EQ(transpose(m).rows(), 4u);
}

TEST(Algebra, ProductMatchesEigen) {
    std::mt19937_64 gen(10);
    const Mat a = random_mat(gen, 3, 4), b = random_mat(gen, 4, 2);
    const Eigen::MatrixXd ref = to_eigen(a) * to_eigen(b);
    const Mat c = a * b;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(c(i, j), ref(static_cast<long>(i), static_cast<long>(j)), 1e-15);
}

TEST(Algebra, DimensionMismatch) {
    EXPECT_THROW(Mat(2, 2) + Mat(2, 3), DimensionMismatch);
    EXPECT_THROW(Mat(2, 2) * Mat(3, 2), DimensionMismatch);
    EXPECT_THROW(hcat(Mat(2, 2), Mat(3, 1)), DimensionMismatch);
    EXPECT_THROW(vcat(Mat(2, 2), Mat(1, 3)), DimensionMismatch);
    EXPECT_THROW((Mat{{1, 2}, {3}}), DimensionMismatch);
}

TEST(Algebra, Permutations) {
    const Mat m{{1, 2, 3}, {4, 5, 6}};
    const std::vector<std::size_t> perm{2, 0, 1};
    EXPECT_EQ(permute_cols(m, perm), (Mat{{3, 1, 2}, {6, 4, 5}}));
    const Mat v = Mat::column({10, 20, 30});
    EXPECT_EQ(permute_rows(v, perm), Mat::column({30, 10, 20}));
    EXPECT_EQ(unpermute_rows(permute_rows(v, perm), perm), v);
}
