#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "nmfk/clustering.hpp"
#include "nmfk/synthetic.hpp"
#include "oracles.hpp"

using nmfk::Mask;
using nmfk::Matrix;

namespace {

nmfk::SignatureVectorSet make_set(const std::vector<oracle::Vec>& vecs, std::size_t k, std::vector<double> losses = {}) {
    const std::size_t dim = vecs.front().size();
    std::vector<double> values;
    std::vector<double> scales;
    for (const auto& v : vecs) {
        double nn = 0;
        for (double x : v) nn += x * x;
        nn = std::sqrt(nn);
        for (double x : v) values.push_back(x / nn);
        scales.push_back(nn);
    }
    nmfk::SignatureVectorSet vs;
    vs.k = k;
    vs.vectors = Matrix(vecs.size(), dim, std::move(values));
    vs.scales = std::move(scales);
    const std::size_t groups = vecs.size() / k;
    for (std::size_t g = 0; g < groups; ++g) vs.restarts.push_back(g);
    vs.losses = losses.empty() ? std::vector<double>(groups, 1.0) : std::move(losses);
    return vs;
}

std::vector<oracle::Vec> jittered_basis(std::size_t restarts, std::size_t k, std::size_t dim, double jitter,
                                        nmfk::SplitMix64& rng) {
    std::vector<oracle::Vec> out;
    for (std::size_t r = 0; r < restarts; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            oracle::Vec v(dim);
            for (std::size_t t = 0; t < dim; ++t) v[t] = (t == c ? 1.0 : 0.0) + jitter * rng.uniform();
            out.push_back(v);
        }
    return out;
}

}  // namespace

TEST(Assignment, MatchesBruteForce) {
    nmfk::SplitMix64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 1 + trial % 5;
        const Matrix cost = oracle::random_matrix(k, k, rng);
        const auto col = nmfk::solve_assignment(cost);
        double got = 0;
        for (std::size_t i = 0; i < k; ++i) got += cost(i, col[i]);
        std::vector<std::size_t> p(k);
        std::iota(p.begin(), p.end(), 0);
        double best = INFINITY;
        do {
            double s = 0;
            for (std::size_t i = 0; i < k; ++i) s += cost(i, p[i]);
            best = std::min(best, s);
        } while (std::next_permutation(p.begin(), p.end()));
        EXPECT_NEAR(got, best, 1e-12);
        std::vector<std::size_t> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(sorted[i], i);
    }
}

TEST(Silhouette, PerfectlySeparatedClustersScoreOne) {
    const Matrix pts = Matrix::from_rows({{1, 0}, {2, 0}, {0, 1}, {0, 3}});
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    const auto s = nmfk::silhouette(pts, labels, 2);
    for (double v : s.per_vector) EXPECT_NEAR(v, 1.0, 1e-15);
    EXPECT_NEAR(s.mean, 1.0, 1e-15);
}

TEST(Silhouette, EquidistantVectorScoresZero) {
    // Point 0 sits at 45 degrees: its own cluster mate and the other cluster are equally far.
    const Matrix pts = Matrix::from_rows({{1, 1}, {1, 0}, {0, 1}});
    const std::vector<std::size_t> labels{0, 0, 1};
    const auto s = nmfk::silhouette(pts, labels, 2);
    EXPECT_NEAR(s.per_vector[0], 0.0, 1e-15);
}

TEST(Silhouette, MatchesBruteForceOracle) {
    nmfk::SplitMix64 rng(40);
    const auto vecs = oracle::random_unit_vectors(8, 5, rng);
    Matrix pts(8, 5);
    for (std::size_t i = 0; i < 8; ++i) std::copy(vecs[i].begin(), vecs[i].end(), pts.row(i).begin());
    const std::vector<std::size_t> labels{0, 1, 0, 1, 1, 0, 0, 1};
    const auto s = nmfk::silhouette(pts, labels, 2);
    const auto ref = oracle::brute_silhouette(vecs, labels, 2);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(s.per_vector[i], ref[i], 1e-12);
}

TEST(Silhouette, BoundsAndSingletons) {
    nmfk::SplitMix64 rng(41);
    const auto vecs = oracle::random_unit_vectors(7, 4, rng);
    Matrix pts(7, 4);
    for (std::size_t i = 0; i < 7; ++i) std::copy(vecs[i].begin(), vecs[i].end(), pts.row(i).begin());
    const std::vector<std::size_t> labels{0, 1, 1, 2, 2, 2, 1};
    const auto s = nmfk::silhouette(pts, labels, 3);
    EXPECT_EQ(s.per_vector[0], 0.0);
    for (double v : s.per_vector) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Silhouette, Errors) {
    const Matrix pts = Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
    EXPECT_THROW(nmfk::silhouette(pts, std::vector<std::size_t>{0, 0, 0}, 2), nmfk::ContractViolation);
    EXPECT_THROW(nmfk::silhouette(pts, std::vector<std::size_t>{0, 1, 2}, 2), nmfk::ContractViolation);
    EXPECT_THROW(nmfk::silhouette(pts, std::vector<std::size_t>{0, 0}, 2), nmfk::ShapeError);
}

TEST(BalancedKMeans, JitteredBasisVectors) {
    nmfk::SplitMix64 rng(50);
    const auto vs = make_set(jittered_basis(3, 2, 4, 0.05, rng), 2);
    const auto cr = nmfk::balanced_kmeans(vs, 2, 1);
    EXPECT_GT(cr.mean_silhouette, 0.9);
    for (std::size_t v = 0; v < vs.size(); ++v) EXPECT_EQ(cr.assignments[v], cr.assignments[v % 2]);
    EXPECT_NE(cr.assignments[0], cr.assignments[1]);
}

TEST(BalancedKMeans, ExactOrthogonalPairs) {
    const auto vs = make_set({{1, 0}, {0, 1}, {1, 0}, {0, 1}}, 2);
    const auto cr = nmfk::balanced_kmeans(vs, 2, 1);
    EXPECT_DOUBLE_EQ(cr.mean_silhouette, 1.0);
    EXPECT_EQ(cr.assignments[0], cr.assignments[2]);
    EXPECT_EQ(cr.assignments[1], cr.assignments[3]);
    EXPECT_NEAR(cr.total_dissimilarity, 0.0, 1e-15);
}

TEST(BalancedKMeans, MatchesExhaustiveBalancedOptimum) {
    nmfk::SplitMix64 rng(60);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 2 + trial % 2;
        const std::size_t restarts = 2 + trial % 3;
        const auto vecs = oracle::random_unit_vectors(restarts * k, 4, rng);
        const auto vs = make_set(vecs, k);
        const auto cr = nmfk::balanced_kmeans(vs, k, 3);
        EXPECT_NEAR(cr.total_dissimilarity, oracle::exhaustive_balanced_minimum(oracle::rows_of(vs.vectors), k), 1e-12)
            << "trial " << trial;
        EXPECT_NEAR(cr.total_dissimilarity, oracle::within_cost(oracle::rows_of(vs.vectors), cr.assignments, k), 1e-12);
    }
}

TEST(BalancedKMeans, AssignmentsAreBalancedAndCentroidsUnit) {
    nmfk::SplitMix64 rng(61);
    const auto vs = make_set(oracle::random_unit_vectors(30, 6, rng), 3);
    const auto cr = nmfk::balanced_kmeans(vs, 3, 9);
    EXPECT_TRUE(nmfk::is_balanced(vs, cr.assignments));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(nmfk::euclidean_norm(cr.centroids.row(c)), 1.0, 1e-12);
    for (double s : cr.silhouette_per_vector) {
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(BalancedKMeans, InvariantToOrderWithinRestart) {
    nmfk::SplitMix64 rng(62);
    auto vecs = jittered_basis(5, 3, 5, 0.2, rng);
    const auto a = nmfk::balanced_kmeans(make_set(vecs, 3), 3, 1);
    for (std::size_t g = 0; g < 5; ++g) std::swap(vecs[g * 3], vecs[g * 3 + 2 - g % 2]);
    const auto b = nmfk::balanced_kmeans(make_set(vecs, 3), 3, 1);
    EXPECT_NEAR(a.total_dissimilarity, b.total_dissimilarity, 1e-12);
    EXPECT_NEAR(a.mean_silhouette, b.mean_silhouette, 1e-12);
}

TEST(BalancedKMeans, IdenticalVectorsAreDegenerate) {
    const auto vs = make_set({{1, 1}, {1, 1}, {1, 1}, {1, 1}}, 2);
    EXPECT_THROW(nmfk::balanced_kmeans(vs, 2, 1), nmfk::ClusteringDegeneracy);
}

TEST(BalancedKMeans, Deterministic) {
    nmfk::SplitMix64 rng(63);
    const auto vs = make_set(oracle::random_unit_vectors(60, 5, rng), 3);
    const auto a = nmfk::balanced_kmeans(vs, 3, 5);
    const auto b = nmfk::balanced_kmeans(vs, 3, 5);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Consensus, IdenticalRestartsReproduceTheRun) {
    nmfk::SplitMix64 rng(70);
    const Matrix x = oracle::random_matrix(5, 9, rng);
    const auto fp = nmfk::solve(x, Mask(5, 9), 2, 4);
    nmfk::Ensemble e;
    e.k = 2;
    e.requested_restarts = 3;
    for (std::size_t r = 0; r < 3; ++r) {
        e.runs.push_back(fp);
        e.restart_indices.push_back(r);
    }
    e.best_loss = fp.loss;
    const auto vs = nmfk::extract_signature_vectors(e, 5, 9);
    const auto cr = nmfk::balanced_kmeans(vs, 2, 1);
    const auto cs = nmfk::consensus(vs, cr, x, Mask(5, 9));
    const auto m = oracle::best_column_matching(cs.w, fp.w);
    EXPECT_GT(m.min_similarity, 1.0 - 1e-12);
    EXPECT_NEAR(cs.loss, fp.loss, 1e-6 * nmfk::frobenius_norm(x));
}

TEST(Consensus, PlantedRankThreeMatchesPlantedSignatures) {
    nmfk::PlantedOptions po;
    po.k = 3;
    po.seed = 9;
    const auto inst = nmfk::make_planted(po);
    const auto e = nmfk::run_ensemble(inst.x, inst.mask, 3, 20, 1);
    const auto vs = nmfk::extract_signature_vectors(e, inst.x.rows(), inst.x.cols());
    const auto cr = nmfk::balanced_kmeans(vs, 3, 1);
    const auto cs = nmfk::consensus(vs, cr, inst.x, inst.mask);
    EXPECT_GT(oracle::best_column_matching(cs.w, inst.w).min_similarity, 0.95);
    EXPECT_EQ(cs.w.rows(), 12u);
    EXPECT_EQ(cs.h.cols(), 40u);
    EXPECT_TRUE(cs.w.non_negative());
    EXPECT_TRUE(cs.h.non_negative());
}
