#include <cmath>

#include <gtest/gtest.h>

#include "nmfk/nmf.hpp"
#include "nmfk/synthetic.hpp"
#include "oracles.hpp"

using nmfk::Mask;
using nmfk::Matrix;

namespace {

constexpr double kGuard = 1e-12;

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    return d;
}

}  // namespace

TEST(InitFactors, ShapeRangeAndDeterminism) {
    const auto [w, h] = nmfk::init_factors(3, 4, 2, 7);
    EXPECT_EQ(w.rows(), 3u);
    EXPECT_EQ(w.cols(), 2u);
    EXPECT_EQ(h.rows(), 2u);
    EXPECT_EQ(h.cols(), 4u);
    for (double v : w.values()) EXPECT_TRUE(v > 0.0 && v <= 1.0);
    for (double v : h.values()) EXPECT_TRUE(v > 0.0 && v <= 1.0);

    const auto [w2, h2] = nmfk::init_factors(3, 4, 2, 7);
    EXPECT_EQ(w, w2);
    EXPECT_EQ(h, h2);

    const auto [w1, h1] = nmfk::init_factors(3, 4, 2, 1);
    const auto [w3, h3] = nmfk::init_factors(3, 4, 2, 2);
    EXPECT_FALSE(w1 == w3 && h1 == h3);
}

TEST(InitFactors, RankOutOfRange) {
    EXPECT_THROW(nmfk::init_factors(3, 4, 0, 1), nmfk::ParameterError);
    EXPECT_THROW(nmfk::init_factors(3, 4, 3, 1), nmfk::ParameterError);
}

TEST(Update, ExactFactorizationIsFixedPoint) {
    nmfk::SplitMix64 rng(21);
    const Matrix w = oracle::random_matrix(6, 3, rng, 0.1, 1.0);
    const Matrix h = oracle::random_matrix(3, 8, rng, 0.1, 1.0);
    const Matrix x = nmfk::multiply(w, h);
    const Mask all(6, 8);
    EXPECT_LE(max_abs_diff(nmfk::update_w(x, w, h, all, kGuard), w), 1e-12);
    EXPECT_LE(max_abs_diff(nmfk::update_h(x, w, h, all, kGuard), h), 1e-12);
}

TEST(Update, ZeroEntriesStayZero) {
    nmfk::SplitMix64 rng(4);
    const Matrix x = oracle::random_matrix(4, 5, rng);
    Matrix w = oracle::random_matrix(4, 2, rng);
    Matrix h = oracle::random_matrix(2, 5, rng);
    w(1, 0) = 0.0;
    h(1, 3) = 0.0;
    const Mask all(4, 5);
    for (int it = 0; it < 20; ++it) {
        w = nmfk::update_w(x, w, h, all, kGuard);
        h = nmfk::update_h(x, w, h, all, kGuard);
        ASSERT_EQ(w(1, 0), 0.0);
        ASSERT_EQ(h(1, 3), 0.0);
    }
}

TEST(Update, SingleUpdateDoesNotIncreaseLoss) {
    nmfk::SplitMix64 rng(8);
    {
        const Matrix x = oracle::random_matrix(4, 3, rng);
        const Matrix w = oracle::random_matrix(4, 2, rng);
        const Matrix h = oracle::random_matrix(2, 3, rng);
        const Mask all(4, 3);
        const double before = nmfk::frobenius_loss(x, w, h);
        EXPECT_LE(nmfk::frobenius_loss(x, nmfk::update_w(x, w, h, all, kGuard), h), before * (1 + 1e-12));
    }
    {
        const Matrix x = oracle::random_matrix(5, 4, rng);
        const Matrix w = oracle::random_matrix(5, 2, rng);
        const Matrix h = oracle::random_matrix(2, 4, rng);
        const Mask all(5, 4);
        const double before = nmfk::frobenius_loss(x, w, h);
        EXPECT_LE(nmfk::frobenius_loss(x, w, nmfk::update_h(x, w, h, all, kGuard)), before * (1 + 1e-12));
    }
}

TEST(Update, MaskedUpdateDoesNotIncreaseMaskedLoss) {
    nmfk::SplitMix64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = oracle::random_matrix(6, 7, rng);
        std::vector<bool> obs(42);
        for (std::size_t i = 0; i < obs.size(); ++i) obs[i] = rng.uniform() > 0.3;
        obs[0] = true;
        const Mask mask(6, 7, obs);
        Matrix w = oracle::random_matrix(6, 3, rng);
        Matrix h = oracle::random_matrix(3, 7, rng);
        double prev = nmfk::masked_frobenius_loss(x, w, h, mask);
        for (int it = 0; it < 30; ++it) {
            w = nmfk::update_w(x, w, h, mask, kGuard);
            const double mid = nmfk::masked_frobenius_loss(x, w, h, mask);
            ASSERT_LE(mid, prev * (1 + 1e-10));
            h = nmfk::update_h(x, w, h, mask, kGuard);
            const double after = nmfk::masked_frobenius_loss(x, w, h, mask);
            ASSERT_LE(after, mid * (1 + 1e-10));
            prev = after;
        }
    }
}

TEST(Update, ShapeMismatch) {
    const Matrix x(3, 4, 1.0);
    EXPECT_THROW(nmfk::update_w(x, Matrix(3, 2), Matrix(2, 5), Mask(3, 4), kGuard), nmfk::ShapeError);
    EXPECT_THROW(nmfk::update_h(x, Matrix(3, 2), Matrix(2, 4), Mask(3, 5), kGuard), nmfk::ShapeError);
}

TEST(Solve, RecoversNoiselessPlantedInstance) {
    nmfk::PlantedOptions po;
    po.n = 10;
    po.m = 20;
    po.k = 3;
    po.noise = 0.0;
    po.seed = 5;
    const auto inst = nmfk::make_planted(po);
    const auto fp = nmfk::solve(inst.x, inst.mask, 3, 17);
    EXPECT_LT(fp.loss / nmfk::frobenius_norm(inst.x), 1e-3);
    EXPECT_TRUE(fp.w.non_negative());
    EXPECT_TRUE(fp.h.non_negative());
}

TEST(Solve, HighRankBeatsRankOne) {
    nmfk::SplitMix64 rng(30);
    const Matrix x = oracle::random_matrix(6, 9, rng);
    const Mask all(6, 9);
    const auto low = nmfk::solve(x, all, 1, 1);
    const auto high = nmfk::solve(x, all, 5, 1);
    EXPECT_LT(high.loss, low.loss);
}

TEST(Solve, ConstantMatrixRankOne) {
    const Matrix x(5, 7, 2.5);
    const auto fp = nmfk::solve(x, Mask(5, 7), 1, 3);
    EXPECT_LT(fp.loss / nmfk::frobenius_norm(x), 1e-6);
}

TEST(Solve, BitwiseDeterministic) {
    nmfk::SplitMix64 rng(2);
    const Matrix x = oracle::random_matrix(8, 10, rng);
    std::vector<bool> obs(80);
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i] = i % 7 != 3;
    const Mask mask(8, 10, obs);
    const auto a = nmfk::solve(x, mask, 3, 99);
    const auto b = nmfk::solve(x, mask, 3, 99);
    EXPECT_EQ(a.w, b.w);
    EXPECT_EQ(a.h, b.h);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, StopsAtIterationCap) {
    nmfk::SplitMix64 rng(6);
    const Matrix x = oracle::random_matrix(6, 6, rng);
    nmfk::SolveOptions opts;
    opts.max_iterations = 7;
    const auto fp = nmfk::solve(x, Mask(6, 6), 2, 1, opts);
    EXPECT_EQ(fp.iterations, 7u);
    EXPECT_FALSE(fp.converged);
}

TEST(Solve, RejectsBadInput) {
    Matrix x(4, 4, 1.0);
    x(2, 2) = -1.0;
    EXPECT_THROW(nmfk::solve(x, Mask(4, 4), 2, 1), nmfk::ParameterError);
    std::vector<bool> obs(16, true);
    obs[10] = false;
    EXPECT_NO_THROW(nmfk::solve(x, Mask(4, 4, obs), 2, 1));  // negative cell is unobserved
    EXPECT_THROW(nmfk::solve(Matrix(4, 4, 1.0), Mask(4, 4), 4, 1), nmfk::ParameterError);
    nmfk::SolveOptions bad;
    bad.relative_tolerance = 0.0;
    EXPECT_THROW(nmfk::solve(Matrix(4, 4, 1.0), Mask(4, 4), 2, 1, bad), nmfk::ParameterError);
}

TEST(Solve, OverflowReportsNumericalFailureWithIteration) {
    const Matrix x(3, 3, 1e300);
    try {
        nmfk::refine(x, Mask(3, 3), Matrix(3, 2, 1e300), Matrix(2, 3, 1e300), {});
        FAIL() << "expected a numerical failure";
    } catch (const nmfk::NumericalFailure& e) {
        EXPECT_GE(e.iteration(), 1u);
    }
}

TEST(Solve, ScaleEquivariantLoss) {
    nmfk::SplitMix64 rng(12);
    const Matrix x = oracle::random_matrix(5, 8, rng);
    Matrix x10 = x;
    for (double& v : x10.values()) v *= 10.0;
    const auto a = nmfk::solve(x, Mask(5, 8), 2, 4);
    auto [w0, h0] = nmfk::init_factors(5, 8, 2, 4);
    for (double& v : w0.values()) v *= 10.0;
    const auto b = nmfk::refine(x10, Mask(5, 8), w0, h0, {});
    EXPECT_NEAR(b.loss / nmfk::frobenius_norm(x10), a.loss / nmfk::frobenius_norm(x), 1e-6);
}
