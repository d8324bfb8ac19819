#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmfk/clustering.hpp"
#include "nmfk/ensemble.hpp"
#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/nmf.hpp"

namespace nmfk {

/// Per-rank summary used to choose the number of signatures.
struct KDiagnostics {
    std::size_t k = 0;
    double best_loss = std::numeric_limits<double>::quiet_NaN();
    double normalized_loss = std::numeric_limits<double>::quiet_NaN();  // best_loss / ||X||_F over observed entries
    double mean_silhouette = std::numeric_limits<double>::quiet_NaN();
    double min_cluster_silhouette = std::numeric_limits<double>::quiet_NaN();
    std::size_t dropped_restarts = 0;
    bool failed = false;
    std::string error;
    ErrorKind error_kind = ErrorKind::numerical_failure;
};

/// Which silhouette summary the selection threshold is applied to.
enum class SilhouetteStatistic {
    min_cluster,  // worst per-cluster mean silhouette
    mean,         // mean over all vectors
};

inline const char* to_string(SilhouetteStatistic s) { return s == SilhouetteStatistic::mean ? "mean" : "min_cluster"; }

struct SelectionRule {
    double silhouette_threshold = 0.25;
    SilhouetteStatistic statistic = SilhouetteStatistic::min_cluster;
    std::size_t k_min = 2;
    std::size_t k_max = 0;  // 0 = default_k_max(n, m)

    /// min(n, m) - 1 capped at 10; k must stay strictly below min(n, m).
    static std::size_t default_k_max(std::size_t n, std::size_t m) { return std::min<std::size_t>(std::min(n, m) - 1, 10); }

    std::size_t resolved_k_max(std::size_t n, std::size_t m) const { return k_max == 0 ? default_k_max(n, m) : k_max; }

    void validate(std::size_t n, std::size_t m) const {
        if (!std::isfinite(silhouette_threshold) || silhouette_threshold < -1.0 || silhouette_threshold > 1.0)
            throw ParameterError("silhouette_threshold must lie in [-1, 1]");
        if (k_min < 2) throw ParameterError("k_min must be at least 2");
        const std::size_t hi = resolved_k_max(n, m);
        if (hi < k_min) throw ParameterError("k range [" + std::to_string(k_min) + ", " + std::to_string(hi) + "] is empty");
        check_rank(n, m, hi);
    }
};

/// Everything computed for one k; the vector set and clustering feed consensus reporting.
struct KAnalysis {
    KDiagnostics diagnostics;
    std::optional<SignatureVectorSet> vectors;
    std::optional<ClusteringResult> clustering;
};

struct SweepOptions {
    std::size_t restarts = 1000;
    std::uint64_t master_seed = 0;
    SolveOptions solver;
    KMeansOptions kmeans;
    std::size_t threads = 1;
};

/// ensemble -> signature vectors -> balanced k-means -> silhouette, for one k.
inline KAnalysis analyze_k(const Matrix& x, const Mask& mask, std::size_t k, const SweepOptions& opts) {
    KAnalysis out;
    out.diagnostics.k = k;
    const Ensemble e = run_ensemble(x, mask, k, opts.restarts, opts.master_seed, opts.solver, opts.threads);
    SignatureVectorSet vs = extract_signature_vectors(e, x.rows(), x.cols());
    ClusteringResult cr = balanced_kmeans(vs, k, opts.master_seed, opts.kmeans);

    const double norm = masked_frobenius_norm(x, mask);
    out.diagnostics.best_loss = e.best_loss;
    out.diagnostics.normalized_loss = norm > 0.0 ? e.best_loss / norm : 0.0;
    out.diagnostics.mean_silhouette = cr.mean_silhouette;
    out.diagnostics.min_cluster_silhouette = cr.min_cluster_silhouette;
    out.diagnostics.dropped_restarts = e.failures.size() + vs.dropped.size();
    out.vectors = std::move(vs);
    out.clustering = std::move(cr);
    return out;
}

/**
 * Runs analyze_k for every k in the rule's range, in increasing k. A failing
 * k is recorded (failed = true) and the sweep moves on; only when every k
 * fails is the first failure rethrown.
 */
inline std::vector<KAnalysis> sweep(const Matrix& x, const Mask& mask, const SelectionRule& rule,
                                    const SweepOptions& opts) {
    require_same_shape(x, mask);
    rule.validate(x.rows(), x.cols());
    const std::size_t hi = rule.resolved_k_max(x.rows(), x.cols());
    std::vector<KAnalysis> results;
    std::optional<Error> first_failure;
    for (std::size_t k = rule.k_min; k <= hi; ++k) {
        try {
            results.push_back(analyze_k(x, mask, k, opts));
        } catch (const Error& e) {
            if (!first_failure) first_failure = e;
            KAnalysis failed;
            failed.diagnostics.k = k;
            failed.diagnostics.failed = true;
            failed.diagnostics.error = e.what();
            failed.diagnostics.error_kind = e.kind();
            results.push_back(std::move(failed));
        }
    }
    const bool all_failed =
        std::all_of(results.begin(), results.end(), [](const KAnalysis& a) { return a.diagnostics.failed; });
    if (all_failed) throw Error(first_failure->kind(), std::string("every k in the sweep failed; first: ") + first_failure->what());
    return results;
}

inline std::vector<KDiagnostics> diagnostics_of(const std::vector<KAnalysis>& results) {
    std::vector<KDiagnostics> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.diagnostics);
    return out;
}

struct Selection {
    std::size_t k = 0;
    bool low_confidence = false;
};

inline double selection_score(const KDiagnostics& d, SilhouetteStatistic s) {
    return s == SilhouetteStatistic::mean ? d.mean_silhouette : d.min_cluster_silhouette;
}

/**
 * Largest k whose silhouette score reaches the threshold and whose normalized
 * loss did not increase relative to the next smaller successful k (1e-9
 * slack). When no k reaches the threshold, the k with the highest score is
 * returned (smallest k on ties) and flagged low-confidence.
 *
 * The score is the worst cluster's mean silhouette by default. An overfit k
 * typically keeps k-1 tight clusters and one incoherent one, which the
 * overall mean hides.
 */
inline Selection select_optimal_k(std::vector<KDiagnostics> diags, const SelectionRule& rule) {
    diags.erase(std::remove_if(diags.begin(), diags.end(), [](const KDiagnostics& d) { return d.failed; }), diags.end());
    if (diags.empty()) throw ParameterError("select_optimal_k: no successful diagnostics");
    std::sort(diags.begin(), diags.end(), [](const KDiagnostics& a, const KDiagnostics& b) { return a.k < b.k; });

    constexpr double loss_slack = 1e-9;
    std::optional<std::size_t> chosen;
    for (std::size_t i = 0; i < diags.size(); ++i) {
        const bool silhouette_ok = selection_score(diags[i], rule.statistic) >= rule.silhouette_threshold;
        const bool loss_ok = i == 0 || diags[i].normalized_loss <= diags[i - 1].normalized_loss + loss_slack;
        if (silhouette_ok && loss_ok) chosen = diags[i].k;
    }
    if (chosen) return {*chosen, false};

    std::size_t best = 0;
    for (std::size_t i = 1; i < diags.size(); ++i)
        if (selection_score(diags[i], rule.statistic) > selection_score(diags[best], rule.statistic)) best = i;
    return {diags[best].k, true};
}

}  // namespace nmfk
