#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nmfk/ensemble.hpp"
#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/nnls.hpp"
#include "nmfk/random.hpp"

namespace nmfk {

/**
 * Minimum-cost perfect matching on a square cost matrix (Hungarian method,
 * O(k^3)). Returns column_of_row: row r is matched to column column_of_row[r].
 */
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
    const std::size_t n = cost.rows();
    if (cost.cols() != n) throw ShapeError("assignment cost matrix must be square");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; index 0 is the virtual start column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t r = 1; r <= n; ++r) {
        row_of_col[0] = r;
        std::size_t col = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[col] = 1;
            const std::size_t row = row_of_col[col];
            double delta = inf;
            std::size_t next = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double reduced = cost(row - 1, j - 1) - u[row] - v[j];
                if (reduced < minv[j]) {
                    minv[j] = reduced;
                    way[j] = col;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    next = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col = next;
        } while (row_of_col[col] != 0);
        do {
            const std::size_t prev = way[col];
            row_of_col[col] = row_of_col[prev];
            col = prev;
        } while (col != 0);
    }
    std::vector<std::size_t> column_of_row(n);
    for (std::size_t j = 1; j <= n; ++j) column_of_row[row_of_col[j] - 1] = j - 1;
    return column_of_row;
}

struct SilhouetteResult {
    std::vector<double> per_vector;
    double mean = 0.0;
};

/**
 * Silhouette widths s(i) = (b - a) / max(a, b) for labelled points.
 *
 * a(i) is the mean distance to the other members of i's cluster, b(i) the
 * smallest mean distance to any other cluster. Members of singleton clusters
 * get s = 0, as does a point with a = b = 0.
 */
template <class Distance>
SilhouetteResult silhouette(const Matrix& points, std::span<const std::size_t> labels, std::size_t k,
                            Distance&& distance) {
    const std::size_t n = points.rows();
    if (labels.size() != n) throw ShapeError("silhouette: one label per point required");
    if (k < 2) throw ParameterError("silhouette needs at least 2 clusters");
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t label : labels) {
        if (label >= k) throw ContractViolation("silhouette: label out of range");
        ++counts[label];
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c] == 0) throw ContractViolation("silhouette: cluster " + std::to_string(c) + " is empty");

    // sums[i * k + c] = total distance from point i to the members of cluster c
    std::vector<double> sums(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(points.row(i), points.row(j));
            sums[i * k + labels[j]] += d;
            sums[j * k + labels[i]] += d;
        }
    }

    SilhouetteResult out;
    out.per_vector.resize(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = labels[i];
        double s = 0.0;
        if (counts[own] > 1) {
            const double a = sums[i * k + own] / static_cast<double>(counts[own] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c)
                if (c != own) b = std::min(b, sums[i * k + c] / static_cast<double>(counts[c]));
            const double denom = std::max(a, b);
            s = denom > 0.0 ? (b - a) / denom : 0.0;
        }
        out.per_vector[i] = s;
        total += s;
    }
    out.mean = total / static_cast<double>(n);
    return out;
}

inline SilhouetteResult silhouette(const Matrix& points, std::span<const std::size_t> labels, std::size_t k) {
    return silhouette(points, labels, k, [](std::span<const double> p, std::span<const double> q) {
        return cosine_dissimilarity(p, q);
    });
}

struct ClusteringResult {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // cluster id of each vector
    Matrix centroids{1, 1};                // k x dimension, unit rows
    std::vector<double> silhouette_per_vector;
    double mean_silhouette = 0.0;
    std::vector<double> cluster_silhouette;  // mean silhouette of each cluster's members
    double min_cluster_silhouette = 0.0;
    double total_dissimilarity = 0.0;  // sum over vectors of dissimilarity to own centroid
    std::size_t iterations = 0;
    std::size_t start_group = 0;  // group whose vectors seeded the winning start
};

struct KMeansOptions {
    std::size_t max_rounds = 100;
    /// Number of distinct groups used to seed centroids; the best-loss group is always first.
    std::size_t max_starts = 16;
};

namespace detail {

/// Unit-normalized mean of each cluster's members; a cluster with zero sum keeps its old centroid.
inline void recompute_centroids(const SignatureVectorSet& vs, std::span<const std::size_t> labels, Matrix& centroids) {
    const std::size_t k = centroids.rows();
    const std::size_t dim = centroids.cols();
    Matrix sums(k, dim);
    for (std::size_t v = 0; v < vs.size(); ++v) {
        auto dst = sums.row(labels[v]);
        const auto src = vs.vector(v);
        for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        const double norm = euclidean_norm(sums.row(c));
        if (!(norm > 0.0)) continue;
        auto dst = centroids.row(c);
        const auto src = sums.row(c);
        for (std::size_t d = 0; d < dim; ++d) dst[d] = src[d] / norm;
    }
}

inline double total_dissimilarity(const SignatureVectorSet& vs, std::span<const std::size_t> labels,
                                  const Matrix& centroids) {
    double total = 0.0;
    for (std::size_t v = 0; v < vs.size(); ++v) total += unit_cosine_dissimilarity(vs.vector(v), centroids.row(labels[v]));
    return total;
}

/**
 * Exact block coordinate descent on the within-cluster objective. With the
 * other groups fixed, the objective sum_c (size_c - |S_c|) depends on one
 * group's permutation only through the pairwise terms |S_c^(-g) + u_j|, so
 * each group is re-permuted optimally by one assignment solve. Returns the
 * number of sweeps over the groups.
 */
inline std::size_t polish_by_group(const SignatureVectorSet& vs, std::vector<std::size_t>& labels, std::size_t max_rounds) {
    const std::size_t k = vs.k;
    const std::size_t dim = vs.dimension();
    Matrix sums(k, dim);
    for (std::size_t v = 0; v < vs.size(); ++v) {
        auto dst = sums.row(labels[v]);
        const auto src = vs.vector(v);
        for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    Matrix cost(k, k);
    std::vector<double> trial(dim);
    std::size_t sweeps = 0;
    bool improved = true;
    while (improved && sweeps < max_rounds) {
        ++sweeps;
        improved = false;
        for (std::size_t g = 0; g < vs.groups(); ++g) {
            for (std::size_t j = 0; j < k; ++j) {
                auto dst = sums.row(labels[g * k + j]);
                const auto src = vs.vector(g * k + j);
                for (std::size_t d = 0; d < dim; ++d) dst[d] -= src[d];
            }
            for (std::size_t j = 0; j < k; ++j) {
                const auto u = vs.vector(g * k + j);
                for (std::size_t c = 0; c < k; ++c) {
                    const auto s = sums.row(c);
                    for (std::size_t d = 0; d < dim; ++d) trial[d] = s[d] + u[d];
                    cost(j, c) = -euclidean_norm(trial);
                }
            }
            const auto match = solve_assignment(cost);
            double before = 0.0, after = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                before += cost(j, labels[g * k + j]);
                after += cost(j, match[j]);
            }
            if (after < before - 1e-12) {
                for (std::size_t j = 0; j < k; ++j) labels[g * k + j] = match[j];
                improved = true;
            }
            for (std::size_t j = 0; j < k; ++j) {
                auto dst = sums.row(labels[g * k + j]);
                const auto src = vs.vector(g * k + j);
                for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
            }
        }
    }
    return sweeps;
}

struct KMeansRun {
    std::vector<std::size_t> labels;
    Matrix centroids;
    double objective;
    std::size_t rounds;
};

inline KMeansRun balanced_kmeans_from(const SignatureVectorSet& vs, std::size_t start_group, std::size_t max_rounds) {
    const std::size_t k = vs.k;
    const std::size_t dim = vs.dimension();
    Matrix centroids(k, dim);
    for (std::size_t c = 0; c < k; ++c) {
        const auto src = vs.vector(start_group * k + c);
        std::copy(src.begin(), src.end(), centroids.row(c).begin());
    }
    std::vector<std::size_t> labels(vs.size(), k);
    Matrix cost(k, k);
    std::size_t round = 0;
    while (round < max_rounds) {
        ++round;
        bool changed = false;
        for (std::size_t g = 0; g < vs.groups(); ++g) {
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t c = 0; c < k; ++c)
                    cost(j, c) = unit_cosine_dissimilarity(vs.vector(g * k + j), centroids.row(c));
            const auto match = solve_assignment(cost);
            for (std::size_t j = 0; j < k; ++j) {
                if (labels[g * k + j] != match[j]) {
                    labels[g * k + j] = match[j];
                    changed = true;
                }
            }
        }
        recompute_centroids(vs, labels, centroids);
        if (!changed) break;
    }
    round += polish_by_group(vs, labels, max_rounds);
    recompute_centroids(vs, labels, centroids);
    const double objective = total_dissimilarity(vs, labels, centroids);
    return {std::move(labels), std::move(centroids), objective, round};
}

}  // namespace detail

/**
 * k-means over signature vectors under the balance constraint: each cluster
 * receives exactly one vector from every restart group.
 *
 * Each round solves, per group, the k x k assignment of the group's vectors to
 * the current centroids exactly, then recomputes centroids as normalized
 * member means. Centroids are seeded from the best-loss group's vectors, then
 * from further groups (in group order, or a seed-determined sample of them
 * when there are more than max_starts); the start with the smallest total
 * within-cluster dissimilarity wins, earlier starts winning ties.
 */
inline ClusteringResult balanced_kmeans(const SignatureVectorSet& vs, std::size_t k, std::uint64_t seed,
                                        const KMeansOptions& opts = {}) {
    if (k < 2) throw ParameterError("balanced_kmeans needs k >= 2");
    if (vs.k != k) throw ShapeError("signature set has " + std::to_string(vs.k) + " vectors per restart, not " +
                                    std::to_string(k));
    if (vs.size() != vs.groups() * k) throw ShapeError("every restart must contribute exactly k vectors");
    if (opts.max_rounds < 1 || opts.max_starts < 1) throw ParameterError("max_rounds and max_starts must be positive");

    bool all_identical = true;
    for (std::size_t v = 1; v < vs.size() && all_identical; ++v)
        all_identical = unit_cosine_dissimilarity(vs.vector(0), vs.vector(v)) <= 1e-12;
    if (all_identical) throw ClusteringDegeneracy("all signature vectors are identical; clusters are indistinguishable");

    const std::size_t best = vs.best_group();
    std::vector<std::size_t> others;
    for (std::size_t g = 0; g < vs.groups(); ++g)
        if (g != best) others.push_back(g);
    if (others.size() + 1 > opts.max_starts) {
        SplitMix64 rng(seed);
        for (std::size_t i = others.size(); i > 1; --i) std::swap(others[i - 1], others[rng.below(i)]);
        others.resize(opts.max_starts - 1);
        std::sort(others.begin(), others.end());
    }
    std::vector<std::size_t> starts{best};
    starts.insert(starts.end(), others.begin(), others.end());

    detail::KMeansRun winner = detail::balanced_kmeans_from(vs, starts.front(), opts.max_rounds);
    std::size_t winner_start = starts.front();
    for (std::size_t s = 1; s < starts.size(); ++s) {
        detail::KMeansRun run = detail::balanced_kmeans_from(vs, starts[s], opts.max_rounds);
        if (run.objective < winner.objective) {
            winner = std::move(run);
            winner_start = starts[s];
        }
    }

    ClusteringResult out;
    out.k = k;
    out.assignments = std::move(winner.labels);
    out.centroids = std::move(winner.centroids);
    out.total_dissimilarity = winner.objective;
    out.iterations = winner.rounds;
    out.start_group = winner_start;

    auto sil = silhouette(vs.vectors, out.assignments, k, [](std::span<const double> p, std::span<const double> q) {
        return unit_cosine_dissimilarity(p, q);
    });
    out.silhouette_per_vector = std::move(sil.per_vector);
    out.mean_silhouette = sil.mean;
    out.cluster_silhouette.assign(k, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t v = 0; v < vs.size(); ++v) {
        out.cluster_silhouette[out.assignments[v]] += out.silhouette_per_vector[v];
        ++counts[out.assignments[v]];
    }
    for (std::size_t c = 0; c < k; ++c) out.cluster_silhouette[c] /= static_cast<double>(counts[c]);
    out.min_cluster_silhouette = *std::min_element(out.cluster_silhouette.begin(), out.cluster_silhouette.end());
    return out;
}

/// True when every group has exactly one vector in every cluster.
inline bool is_balanced(const SignatureVectorSet& vs, std::span<const std::size_t> labels) {
    const std::size_t k = vs.k;
    for (std::size_t g = 0; g < vs.groups(); ++g) {
        std::vector<char> seen(k, 0);
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t c = labels[g * k + j];
            if (c >= k || seen[c]) return false;
            seen[c] = 1;
        }
    }
    return true;
}

/**
 * Consensus factors for a clustered ensemble.
 *
 * Column c of w (or row c of h, when the H side was clustered) is cluster c's
 * signature: the elementwise median of its member unit vectors, renormalized
 * and scaled to the median pre-normalization norm of the members.
 */
struct ConsensusSignatures {
    Matrix w{1, 1};  // n x k
    Matrix h{1, 1};  // k x m
    std::vector<double> within_cluster_spread;
    FactorSide side = FactorSide::w;
    double loss = 0.0;  // masked Frobenius loss of w * h against X
};

namespace detail {

inline double median(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

/**
 * Builds consensus signatures and recovers the complementary factor by a
 * masked non-negative least-squares fit of X against the fixed signatures.
 */
inline ConsensusSignatures consensus(const SignatureVectorSet& vs, const ClusteringResult& cr, const Matrix& x,
                                     const Mask& mask) {
    const std::size_t k = vs.k;
    if (cr.k != k || cr.assignments.size() != vs.size()) throw ShapeError("clustering does not match signature set");
    if (!is_balanced(vs, cr.assignments)) throw ContractViolation("consensus requires a balanced clustering");
    require_same_shape(x, mask);
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    const std::size_t dim = vs.dimension();
    if (dim != (vs.side == FactorSide::w ? n : m)) throw ShapeError("signature dimension does not match X");

    ConsensusSignatures out;
    out.side = vs.side;
    Matrix signatures(k, dim);
    out.within_cluster_spread.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t v = 0; v < vs.size(); ++v)
            if (cr.assignments[v] == c) members.push_back(v);
        std::vector<double> column(members.size());
        auto dst = signatures.row(c);
        for (std::size_t d = 0; d < dim; ++d) {
            for (std::size_t i = 0; i < members.size(); ++i) column[i] = vs.vector(members[i])[d];
            dst[d] = detail::median(column);
        }
        std::vector<double> scales;
        for (std::size_t v : members) scales.push_back(vs.scales[v]);
        const double scale = detail::median(scales);
        double norm = euclidean_norm(dst);
        if (!(norm > 0.0)) {
            std::copy(cr.centroids.row(c).begin(), cr.centroids.row(c).end(), dst.begin());
            norm = euclidean_norm(dst);
        }
        for (double& v : dst) v *= scale / norm;

        double spread = 0.0;
        for (std::size_t v : members) spread += unit_cosine_dissimilarity(vs.vector(v), cr.centroids.row(c));
        out.within_cluster_spread[c] = spread / static_cast<double>(members.size());
    }

    // Fit the complementary factor one column (W side) or row (H side) of X at a time.
    Matrix gram(k, k);
    std::vector<double> rhs(k);
    if (vs.side == FactorSide::w) {
        out.w = signatures.transposed();
        out.h = Matrix(k, m);
        for (std::size_t j = 0; j < m; ++j) {
            std::fill(gram.values().begin(), gram.values().end(), 0.0);
            std::fill(rhs.begin(), rhs.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!mask(i, j)) continue;
                const auto wi = out.w.row(i);
                for (std::size_t a = 0; a < k; ++a) {
                    rhs[a] += wi[a] * x(i, j);
                    for (std::size_t b = 0; b < k; ++b) gram(a, b) += wi[a] * wi[b];
                }
            }
            const auto coef = nnls_gram(gram, rhs);
            for (std::size_t a = 0; a < k; ++a) out.h(a, j) = coef[a];
        }
    } else {
        out.h = std::move(signatures);
        out.w = Matrix(n, k);
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(gram.values().begin(), gram.values().end(), 0.0);
            std::fill(rhs.begin(), rhs.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                if (!mask(i, j)) continue;
                for (std::size_t a = 0; a < k; ++a) {
                    rhs[a] += out.h(a, j) * x(i, j);
                    for (std::size_t b = 0; b < k; ++b) gram(a, b) += out.h(a, j) * out.h(b, j);
                }
            }
            const auto coef = nnls_gram(gram, rhs);
            for (std::size_t a = 0; a < k; ++a) out.w(i, a) = coef[a];
        }
    }
    out.loss = masked_frobenius_loss(x, out.w, out.h, mask);
    return out;
}

}  // namespace nmfk
