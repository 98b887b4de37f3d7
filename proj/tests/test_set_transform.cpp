#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "ilcset/config.hpp"
#include "ilcset/set_transform.hpp"

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

std::vector<std::complex<double>> sorted_eigs(const Mat& m) {
    auto ev = eigenvalues(m);
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

// Right inverse scaled by 1/2: ρ(I − DΞ) = 1/2 whenever D has full row rank.
Mat witness_gain(const Mat& D) { return 0.5 * (transpose(D) * invert(D * transpose(D))); }

std::vector<Mat> zero_inputs(std::size_t m, int N) { return std::vector<Mat>(static_cast<std::size_t>(N) + 1, Mat(m, 1)); }

}  // namespace

TEST(SelectBlock, IdentityLeading) {
    const auto s = select_nonsingular_block(hcat(Mat::identity(2), Mat(2, 1)));
    EXPECT_EQ(s.perm, (Permutation{0, 1, 2}));
    EXPECT_EQ(s.M1, Mat::identity(2));
}

TEST(SelectBlock, ZeroFirstColumn) {
    const auto s = select_nonsingular_block(Mat{{0, 0, 1}, {0, 1, 0}});
    EXPECT_EQ(s.perm, (Permutation{2, 1, 0}));
    EXPECT_EQ(s.M1, Mat::identity(2));
}

TEST(SelectBlock, ExampleOneAtZero) {
    const auto cfg = load_preset("example1");
    const Mat D0 = cfg.system.D[0];
    EXPECT_NEAR(D0(0, 0), 1.1, 1e-15);
    EXPECT_NEAR(D0(1, 1), 2.0, 0.0);
    const auto s = select_nonsingular_block(D0);
    EXPECT_EQ(s.perm, (Permutation{0, 1, 2}));
    EXPECT_NEAR(determinant(s.M1), 2.2, 1e-14);
}

TEST(SelectBlock, RankDeficient) {
    EXPECT_THROW(select_nonsingular_block(Mat{{1, 2, 3}, {2, 4, 6}}), RankDeficient);
    EXPECT_THROW(select_nonsingular_block(Mat(2, 3)), RankDeficient);
    EXPECT_THROW(select_nonsingular_block(Mat(3, 2, 1.0)), RankDeficient);
}

TEST(SelectBlock, RandomFullRankGivesNonsingularBlock) {
    std::mt19937_64 gen(31);
    for (int t = 0; t < 200; ++t) {
        const std::size_t p = 1 + gen() % 3, m = p + gen() % 3;
        const Mat M = random_mat(gen, p, m);
        const auto s = select_nonsingular_block(M);
        Permutation sorted = s.perm;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t j = 0; j < m; ++j) ASSERT_EQ(sorted[j], j);
        EXPECT_GT(std::abs(determinant(s.M1)), 1e-10);
        EXPECT_EQ(hcat(s.M1, s.M2), permute_cols(M, s.perm));
    }
}

TEST(QTransform, SquareCase) {
    const auto t = build_q_transform(MatrixSchedule(Mat::identity(2), 1), MatrixSchedule(0.5 * Mat::identity(2), 1));
    EXPECT_EQ(t.assembled(0), Mat::identity(2));
    EXPECT_LE(max_abs(t.assembled_inverse(0) - Mat::identity(2)), 1e-15);
    EXPECT_EQ(t.at(0).T22.rows(), 0u);
    const auto [u1, u2] = split_input(t, Mat::column({1, 2}), 0);
    EXPECT_EQ(u1, Mat::column({1, 2}));
    EXPECT_EQ(u2.rows(), 0u);
}

TEST(QTransform, OneByTwoExample) {
    const auto t = build_q_transform(MatrixSchedule(Mat{{2, 1}}, 1), MatrixSchedule(Mat{{0.2}, {0.1}}, 1));
    EXPECT_LE(max_abs(t.assembled(0) - Mat{{2, 1}, {-0.4, 0.8}}), 1e-15);
    EXPECT_LE(max_abs(t.assembled_inverse(0) - Mat{{0.4, -0.5}, {0.2, 1.0}}), 1e-15);
    EXPECT_LE(identity_residual(t.assembled(0) * t.assembled_inverse(0)), 1e-12);
    EXPECT_EQ(t.at(0).H22, Mat::identity(1));

    const auto [u1, u2] = split_input(t, Mat::column({1, 1}), 0);
    EXPECT_NEAR(u1(0, 0), 3.0, 1e-15);
    EXPECT_NEAR(u2(0, 0), 0.4, 1e-15);
    EXPECT_LE(max_abs(merge_input(t, u1, u2, 0) - Mat::column({1, 1})), 1e-15);

    const auto [z1, z2] = split_input(t, Mat(2, 1), 0);
    EXPECT_EQ(max_abs(z1), 0.0);
    EXPECT_EQ(max_abs(z2), 0.0);
}

TEST(QTransform, ConditionViolatedCarriesStep) {
    const auto D = build_schedule({{"1", "0"}, {"0", "1"}}, 3);
    const auto Xi = build_schedule({{"1", "0"}, {"0", "k"}}, 3);  // I - DΞ = diag(0, 1-k): ρ = 1 already at k = 0
    try {
        build_q_transform(D, Xi);
        FAIL();
    } catch (const ConditionViolated& e) {
        EXPECT_EQ(e.k(), 0);
        EXPECT_DOUBLE_EQ(e.value(), 1.0);
    }
}

TEST(QTransform, ExampleOneInverseIdentities) {
    const auto cfg = load_preset("example1");
    const auto t = build_q_transform(cfg.system.D, cfg.gains.Xi);
    EXPECT_TRUE(t.fixed_permutation);
    ASSERT_EQ(t.last_k, 100);
    for (int k = 0; k <= 100; ++k) {
        const Mat Q = t.assembled(k);
        const Mat Qi = t.assembled_inverse(k);
        EXPECT_LE(identity_residual(Q * Qi), 1e-9) << k;
        EXPECT_LE(inf_norm(Qi - invert(Q)), 1e-8) << k;
        EXPECT_EQ(t.at(k).H22, Mat::identity(1));
        EXPECT_LE(identity_residual(t.full(k) * t.full_inverse(k)), 1e-9);
    }
}

TEST(QTransform, GainAnnihilation) {
    const auto cfg = load_preset("example1");
    const auto t = build_q_transform(cfg.system.D, cfg.gains.Xi);
    for (int k = 0; k <= 100; ++k) {
        const Mat QXi = t.full(k) * cfg.gains.Xi[k];
        EXPECT_LE(max_abs(block(QXi, 0, 0, 2, 2) - cfg.system.D[k] * cfg.gains.Xi[k]), 1e-10);
        EXPECT_LE(inf_norm(block(QXi, 2, 0, 1, 2)), 1e-10);
    }
}

TEST(QTransform, RandomInstancesAgainstEigenInverse) {
    std::mt19937_64 gen(77);
    for (int t = 0; t < 200; ++t) {
        const std::size_t p = 1 + gen() % 3, m = p + gen() % 3;
        const Mat D = random_mat(gen, p, m);
        const Mat Xi = witness_gain(D);
        if (std::abs(determinant(D * transpose(D))) < 1e-6) continue;
        const auto q = build_q_transform(MatrixSchedule(D, 1), MatrixSchedule(Xi, 1));
        const Mat Q = q.assembled(0);
        const Eigen::MatrixXd ref = to_eigen(Q).inverse();
        const Mat Qi = q.assembled_inverse(0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                EXPECT_NEAR(Qi(i, j), ref(static_cast<long>(i), static_cast<long>(j)), 1e-8 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
        // round trip through split and merge
        const Mat u = random_mat(gen, m, 1);
        const auto [u1, u2] = split_input(q, u, 0);
        EXPECT_LE(max_abs(merge_input(q, u1, u2, 0) - u), 1e-9);
    }
}

TEST(QTransform, ExistenceWitnessAndRankDeficientSmoke) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> d(-2, 2);
    // full row rank: the scaled right inverse always satisfies the condition
    for (int t = 0; t < 50; ++t) {
        const Mat D = random_mat(gen, 2, 3);
        EXPECT_NEAR(spectral_radius(Mat::identity(2) - D * witness_gain(D)), 0.5, 1e-9);
    }
    // rank one D: no random Ξ works
    const Mat D = Mat{{1, 2, 3}, {2, 4, 6}};
    int hits = 0;
    for (int t = 0; t < 10000; ++t) {
        Mat Xi(3, 2);
        for (std::size_t i = 0; i < Xi.size(); ++i) Xi[i] = d(gen);
        if (spectral_radius(Mat::identity(2) - D * Xi) < 1.0 - 1e-9) ++hits;
    }
    EXPECT_EQ(hits, 0);
}

TEST(PTransform, ScalarAndOneByTwo) {
    const auto one = MatrixSchedule(Mat{{1}}, 2);
    const auto t = build_p_transform(one, one, MatrixSchedule(Mat{{0.5}}, 2));
    EXPECT_EQ(t.last_k, 1);
    EXPECT_EQ(t.assembled(0), Mat{{1}});
    EXPECT_LE(max_abs(t.assembled_inverse(0) - Mat{{1}}), 1e-15);

    // C(k+1)B(k) = [2, 1]
    const auto B = MatrixSchedule(Mat{{2, 1}}, 2);
    const auto C = MatrixSchedule(Mat{{1}}, 2);
    const auto p = build_p_transform(B, C, MatrixSchedule(Mat{{0.2}, {0.1}}, 2));
    EXPECT_LE(max_abs(p.assembled(0) - Mat{{2, 1}, {-0.4, 0.8}}), 1e-15);
    EXPECT_LE(max_abs(p.assembled_inverse(0) - Mat{{0.4, -0.5}, {0.2, 1.0}}), 1e-15);
}

TEST(PTransform, ExampleTwoInverseIdentities) {
    const auto cfg = load_preset("example2");
    const auto t = build_p_transform(cfg.system.B, cfg.system.C, cfg.gains.Gamma);
    ASSERT_EQ(t.last_k, 99);
    for (int k = 0; k < 100; ++k) {
        const Mat P = t.assembled(k);
        EXPECT_LE(identity_residual(P * t.assembled_inverse(k)), 1e-9) << k;
        EXPECT_LE(inf_norm(t.assembled_inverse(k) - invert(P)), 1e-8) << k;
        EXPECT_EQ(t.at(k).H22, Mat::identity(1));
        const Mat PG = t.full(k) * cfg.gains.Gamma[k];
        EXPECT_LE(inf_norm(block(PG, 2, 0, 1, 2)), 1e-10);
    }
}

TEST(FeedthroughTransform, NoDeltaDGivesIdentityDstar) {
    const auto cfg = load_preset("example1-clean");
    const auto q = build_q_transform(cfg.system.D, cfg.gains.Xi);
    const auto it = sample_iteration(cfg.system, cfg.uncertainty, 0);
    const auto ts = transform_feedthrough(it, q, zero_inputs(3, 100));
    for (int k = 0; k <= 100; ++k) {
        EXPECT_LE(identity_residual(ts.Dstar[k]), 1e-9);
        EXPECT_EQ(ts.wstar[k], it.w[k]);
        EXPECT_EQ(ts.vstar[k], it.v[k]);
        EXPECT_LE(max_abs(ts.gain_star[k] - cfg.system.D[k] * cfg.gains.Xi[k]), 1e-15);
    }
}

TEST(FeedthroughTransform, DeltaDShowsUpInDstar) {
    const auto cfg = load_preset("example1");
    const auto q = build_q_transform(cfg.system.D, cfg.gains.Xi);
    const auto it = sample_iteration(cfg.system, cfg.uncertainty, 4);
    const auto ts = transform_feedthrough(it, q, zero_inputs(3, 100));
    for (int k = 0; k <= 100; ++k) {
        const auto& s = q.at(k);
        const Mat deltaD = permute_cols(it.D[k] - cfg.system.D[k], s.perm);
        const Mat expected = deltaD * vcat(s.H11, s.H21);
        EXPECT_LE(max_abs((ts.Dstar[k] - Mat::identity(2)) - expected), 1e-10);
    }
}

TEST(FeedthroughTransform, FrozenTermMatchesCompactForm) {
    // B [Q̂12; Q̂22] [Q21 Q22] u0 is the compact form of the printed 2x2 map
    const auto cfg = load_preset("example1");
    const auto q = build_q_transform(cfg.system.D, cfg.gains.Xi);
    const auto it = sample_iteration(cfg.system, cfg.uncertainty, 1);
    std::mt19937_64 gen(4);
    std::vector<Mat> u0;
    for (int k = 0; k <= 100; ++k) u0.push_back(random_mat(gen, 3, 1));
    const auto ts = transform_feedthrough(it, q, u0);
    for (int k = 0; k <= 100; ++k) {
        const auto& s = q.at(k);
        const Mat up = permute_rows(u0[k], s.perm);
        const Mat compact = vcat(s.H12, s.H22) * (hcat(s.T21, s.T22) * up);
        const Mat Bp = permute_cols(it.B[k], s.perm);
        const Mat Dp = permute_cols(it.D[k], s.perm);
        EXPECT_LE(max_abs(ts.wstar[k] - (it.w[k] + Bp * compact)), 1e-9);
        EXPECT_LE(max_abs(ts.vstar[k] - (it.v[k] + Dp * compact)), 1e-9);
    }
}

TEST(FeedthroughTransform, SimilarityOfTransformedConditions) {
    const auto cfg = load_preset("example1");
    const auto q = build_q_transform(cfg.system.D, cfg.gains.Xi);
    for (std::size_t l = 0; l < 5; ++l) {
        const auto it = sample_iteration(cfg.system, cfg.uncertainty, l);
        const auto ts = transform_feedthrough(it, q, zero_inputs(3, 100));
        for (int k = 0; k <= 100; k += 7) {
            const Mat I = Mat::identity(2);
            const auto a = sorted_eigs(I - ts.gain_star[k] * ts.Dstar[k]);
            const auto b = sorted_eigs(I - ts.Dstar[k] * ts.gain_star[k]);
            const auto c = sorted_eigs(I - it.D[k] * cfg.gains.Xi[k]);
            for (std::size_t i = 0; i < 2; ++i) {
                EXPECT_LE(std::abs(a[i] - b[i]), 1e-8);
                EXPECT_LE(std::abs(b[i] - c[i]), 1e-8);
            }
        }
    }
}

TEST(CoupledTransform, ScalarChain) {
    NominalSystem s;
    s.n = s.m = s.p = 1;
    s.N = 3;
    s.A = MatrixSchedule::zeros(1, 1, 3);
    s.B = MatrixSchedule(Mat{{1}}, 3);
    s.C = MatrixSchedule(Mat{{1}}, 3);
    s.D = MatrixSchedule::zeros(1, 1, 3);
    s.w = s.v = s.r = MatrixSchedule::zeros(1, 1, 3);
    s.x0 = Mat(1, 1);
    const auto pt = build_p_transform(s.B, s.C, MatrixSchedule(Mat{{0.8}}, 3));
    const auto ts = transform_coupled(s, sample_iteration(s, {}, 0), pt, zero_inputs(1, 3));
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(ts.Bstar[k](0, 0), 1.0, 1e-15);
    EXPECT_LE(ts.coupling_residual, 1e-15);
}

TEST(CoupledTransform, ExampleTwoCouplingIsIdentity) {
    const auto cfg = load_preset("example2");
    const auto pt = build_p_transform(cfg.system.B, cfg.system.C, cfg.gains.Gamma);
    const auto it = sample_iteration(cfg.system, cfg.uncertainty, 2);
    const auto ts = transform_coupled(cfg.system, it, pt, zero_inputs(3, 100));
    EXPECT_LE(ts.coupling_residual, 1e-9);
    ASSERT_EQ(ts.Bstar.size(), 100u);
    for (int k = 0; k < 100; ++k) {
        EXPECT_LE(identity_residual(cfg.system.C[k + 1] * ts.Bstar[k]), 1e-9);
        EXPECT_EQ(ts.wstar[k], it.w[k]);
        // I − Γ*·C(k+1)B* equals I − C(k+1)BΓ
        const Mat I = Mat::identity(2);
        const Mat CB = cfg.system.C[k + 1] * cfg.system.B[k];
        EXPECT_LE(max_abs((I - ts.gain_star[k] * (cfg.system.C[k + 1] * ts.Bstar[k])) - (I - CB * cfg.gains.Gamma[k])),
                  1e-9);
    }
}

TEST(CoupledTransform, RejectsNonRepetitivePlants) {
    const auto cfg = load_preset("example1");
    const auto ex2 = load_preset("example2");
    const auto pt = build_p_transform(ex2.system.B, ex2.system.C, ex2.gains.Gamma);
    // nonzero D
    EXPECT_THROW(transform_coupled(cfg.system, sample_iteration(cfg.system, {}, 0), pt, zero_inputs(3, 100)),
                 ModelMismatch);
    // perturbed B
    UncertaintySpec unc;
    unc.amp.B = 0.01;
    EXPECT_THROW(transform_coupled(ex2.system, sample_iteration(ex2.system, unc, 0), pt, zero_inputs(3, 100)),
                 ModelMismatch);
}

TEST(Transforms, PerStepPermutationFallback) {
    // the leading column vanishes at k = 1, so the k = 0 choice is not valid throughout
    const auto D = build_schedule({{"1-k", "1"}}, 2);
    const auto Xi = build_schedule({{"0.5*(1-k)"}, {"0.5*k"}}, 2);
    const auto q = build_q_transform(D, Xi);
    EXPECT_FALSE(q.fixed_permutation);
    EXPECT_EQ(q.at(0).perm, (Permutation{0, 1}));
    EXPECT_EQ(q.at(1).perm, (Permutation{1, 0}));
    for (int k = 0; k <= 2; ++k) EXPECT_LE(identity_residual(q.full(k) * q.full_inverse(k)), 1e-9);
}
