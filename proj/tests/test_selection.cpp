#include <gtest/gtest.h>

#include "nmfk/selection.hpp"
#include "nmfk/synthetic.hpp"
#include "oracles.hpp"

using nmfk::KDiagnostics;
using nmfk::Mask;
using nmfk::Matrix;

namespace {

KDiagnostics diag(std::size_t k, double silhouette, double loss) {
    KDiagnostics d;
    d.k = k;
    d.mean_silhouette = silhouette;
    d.min_cluster_silhouette = silhouette;
    d.normalized_loss = loss;
    d.best_loss = loss;
    return d;
}

}  // namespace

TEST(SelectOptimalK, LargestStableKWins) {
    const std::vector<KDiagnostics> d{diag(2, 0.95, 0.3), diag(3, 0.90, 0.2), diag(4, 0.10, 0.1)};
    for (auto stat : {nmfk::SilhouetteStatistic::mean, nmfk::SilhouetteStatistic::min_cluster}) {
        nmfk::SelectionRule rule;
        rule.statistic = stat;
        const auto sel = nmfk::select_optimal_k(d, rule);
        EXPECT_EQ(sel.k, 3u);
        EXPECT_FALSE(sel.low_confidence);
    }
}

TEST(SelectOptimalK, FallbackToBestSilhouetteIsLowConfidence) {
    const std::vector<KDiagnostics> d{diag(2, 0.1, 0.3), diag(3, 0.2, 0.2), diag(4, 0.05, 0.1)};
    const auto sel = nmfk::select_optimal_k(d, {});
    EXPECT_EQ(sel.k, 3u);
    EXPECT_TRUE(sel.low_confidence);
}

TEST(SelectOptimalK, LossIncreaseDisqualifies) {
    const std::vector<KDiagnostics> d{diag(2, 0.9, 0.3), diag(3, 0.9, 0.35)};
    EXPECT_EQ(nmfk::select_optimal_k(d, {}).k, 2u);
}

TEST(SelectOptimalK, StatisticChoiceMatters) {
    KDiagnostics overfit = diag(4, 0.6, 0.1);
    overfit.min_cluster_silhouette = -0.5;
    const std::vector<KDiagnostics> d{diag(2, 0.9, 0.3), diag(3, 0.95, 0.2), overfit};
    nmfk::SelectionRule rule;
    EXPECT_EQ(nmfk::select_optimal_k(d, rule).k, 3u);
    rule.statistic = nmfk::SilhouetteStatistic::mean;
    EXPECT_EQ(nmfk::select_optimal_k(d, rule).k, 4u);
}

TEST(SelectOptimalK, RaisingThresholdNeverRaisesK) {
    nmfk::SplitMix64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<KDiagnostics> d;
        double loss = 1.0;
        for (std::size_t k = 2; k <= 7; ++k) {
            loss *= 0.5 + 0.6 * rng.uniform();
            d.push_back(diag(k, 2.0 * rng.uniform() - 1.0, loss));
        }
        nmfk::SelectionRule lo, hi;
        lo.silhouette_threshold = -0.2 + 0.8 * rng.uniform();
        hi.silhouette_threshold = lo.silhouette_threshold + 0.2 * rng.uniform();
        const auto a = nmfk::select_optimal_k(d, lo);
        const auto b = nmfk::select_optimal_k(d, hi);
        if (!a.low_confidence && !b.low_confidence) {
            EXPECT_LE(b.k, a.k);
        }
        EXPECT_EQ(nmfk::select_optimal_k(d, lo).k, a.k);
    }
}

TEST(SelectOptimalK, FailedEntriesIgnoredAndEmptyRejected) {
    KDiagnostics failed = diag(3, 0.99, 0.0);
    failed.failed = true;
    EXPECT_EQ(nmfk::select_optimal_k({diag(2, 0.9, 0.3), failed}, {}).k, 2u);
    EXPECT_THROW(nmfk::select_optimal_k({}, {}), nmfk::ParameterError);
    EXPECT_THROW(nmfk::select_optimal_k({failed}, {}), nmfk::ParameterError);
}

TEST(SelectionRule, Validation) {
    nmfk::SelectionRule r;
    EXPECT_EQ(r.resolved_k_max(12, 40), 10u);
    EXPECT_EQ(r.resolved_k_max(4, 40), 3u);
    EXPECT_NO_THROW(r.validate(12, 40));
    r.k_max = 12;
    EXPECT_THROW(r.validate(12, 40), nmfk::ParameterError);
    r.k_max = 0;
    r.k_min = 1;
    EXPECT_THROW(r.validate(12, 40), nmfk::ParameterError);
    r.k_min = 2;
    r.silhouette_threshold = 1.5;
    EXPECT_THROW(r.validate(12, 40), nmfk::ParameterError);
    EXPECT_THROW(nmfk::SelectionRule{}.validate(2, 40), nmfk::ParameterError);
}

TEST(Sweep, SingleKRange) {
    nmfk::SplitMix64 rng(7);
    const Matrix x = oracle::random_matrix(6, 10, rng);
    nmfk::SelectionRule rule;
    rule.k_min = rule.k_max = 2;
    nmfk::SweepOptions so;
    so.restarts = 4;
    const auto res = nmfk::sweep(x, Mask(6, 10), rule, so);
    ASSERT_EQ(res.size(), 1u);
    EXPECT_EQ(res[0].diagnostics.k, 2u);
    EXPECT_EQ(nmfk::select_optimal_k(nmfk::diagnostics_of(res), rule).k, 2u);
}

TEST(Sweep, PlantedThreeShowsKneeAndSilhouetteDrop) {
    nmfk::PlantedOptions po;
    po.seed = 21;
    const auto inst = nmfk::make_planted(po);
    nmfk::SelectionRule rule;
    rule.k_max = 5;
    nmfk::SweepOptions so;
    so.restarts = 20;
    so.master_seed = 3;
    const auto d = nmfk::diagnostics_of(nmfk::sweep(inst.x, inst.mask, rule, so));
    ASSERT_EQ(d.size(), 4u);
    EXPECT_GE(d[0].mean_silhouette, 0.8);
    EXPECT_GE(d[1].mean_silhouette, 0.8);
    EXPECT_LT(d[2].min_cluster_silhouette, 0.25);
    const double drop_to_3 = d[0].normalized_loss - d[1].normalized_loss;
    const double drop_to_4 = d[1].normalized_loss - d[2].normalized_loss;
    EXPECT_GT(drop_to_3, 10.0 * drop_to_4);
    EXPECT_EQ(nmfk::select_optimal_k(d, rule).k, 3u);
}

TEST(Sweep, RankOneInputFitsAtTwoAndSilhouetteDegrades) {
    std::vector<double> u{0.2, 0.9, 0.4, 0.7, 0.1, 0.5}, v{0.3, 0.8, 0.6, 0.2, 0.9, 0.4, 0.7, 0.5};
    Matrix x(6, 8);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 8; ++j) x(i, j) = u[i] * v[j];
    nmfk::SelectionRule rule;
    rule.k_max = 4;
    nmfk::SweepOptions so;
    so.restarts = 10;
    const auto d = nmfk::diagnostics_of(nmfk::sweep(x, Mask(6, 8), rule, so));
    ASSERT_EQ(d.size(), 3u);
    EXPECT_LT(d[0].normalized_loss, 1e-6);
    EXPECT_LT(d[2].mean_silhouette, 0.9);
}

TEST(Sweep, Deterministic) {
    nmfk::SplitMix64 rng(8);
    const Matrix x = oracle::random_matrix(6, 12, rng);
    nmfk::SelectionRule rule;
    rule.k_max = 3;
    nmfk::SweepOptions so;
    so.restarts = 6;
    const auto a = nmfk::diagnostics_of(nmfk::sweep(x, Mask(6, 12), rule, so));
    so.threads = 3;
    const auto b = nmfk::diagnostics_of(nmfk::sweep(x, Mask(6, 12), rule, so));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].best_loss, b[i].best_loss);
        EXPECT_EQ(a[i].mean_silhouette, b[i].mean_silhouette);
        EXPECT_EQ(a[i].min_cluster_silhouette, b[i].min_cluster_silhouette);
    }
}
