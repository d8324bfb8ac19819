#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/nmf.hpp"
#include "nmfk/parallel.hpp"
#include "nmfk/random.hpp"

namespace nmfk {

struct RestartFailure {
    std::size_t restart = 0;
    std::string message;
};

/// All surviving random restarts for one rank k, in restart order.
struct Ensemble {
    std::size_t k = 0;
    std::size_t requested_restarts = 0;
    std::vector<FactorPair> runs;
    std::vector<std::size_t> restart_indices;  // parallel to runs
    std::vector<RestartFailure> failures;
    double best_loss = std::numeric_limits<double>::infinity();

    std::size_t best_run() const {
        std::size_t best = 0;
        for (std::size_t r = 1; r < runs.size(); ++r)
            if (runs[r].loss < runs[best].loss) best = r;
        return best;
    }
};

/**
 * Solve the same rank-k problem from `restarts` independent random starts.
 *
 * Restart i is seeded with derive_seed(master_seed, i). Results are stored by
 * restart index, so the outcome does not depend on `threads`. Restarts that
 * fail numerically are recorded and dropped; more than 10% failures is an
 * ensemble error.
 */
inline Ensemble run_ensemble(const Matrix& x, const Mask& mask, std::size_t k, std::size_t restarts,
                             std::uint64_t master_seed, const SolveOptions& opts = {}, std::size_t threads = 1) {
    if (restarts < 2) throw ParameterError("an ensemble needs at least 2 restarts");
    require_same_shape(x, mask);
    check_rank(x.rows(), x.cols(), k);
    opts.validate();

    std::vector<std::optional<FactorPair>> slots(restarts);
    std::vector<std::string> errors(restarts);
    parallel_for(restarts, threads, [&](std::size_t i) {
        try {
            slots[i] = solve(x, mask, k, derive_seed(master_seed, i), opts);
        } catch (const NumericalFailure& e) {
            errors[i] = e.what();
        }
    });

    Ensemble e;
    e.k = k;
    e.requested_restarts = restarts;
    for (std::size_t i = 0; i < restarts; ++i) {
        if (slots[i]) {
            e.best_loss = std::min(e.best_loss, slots[i]->loss);
            e.runs.push_back(std::move(*slots[i]));
            e.restart_indices.push_back(i);
        } else {
            e.failures.push_back({i, errors[i]});
        }
    }
    if (e.failures.size() * 10 > restarts) {
        throw EnsembleError(std::to_string(e.failures.size()) + " of " + std::to_string(restarts) +
                            " restarts failed for k = " + std::to_string(k) + "; first: restart " +
                            std::to_string(e.failures.front().restart) + ": " + e.failures.front().message);
    }
    return e;
}

enum class FactorSide { w, h };

inline const char* to_string(FactorSide side) { return side == FactorSide::w ? "W" : "H"; }

/**
 * Unit-normalized signature vectors, k per surviving restart.
 *
 * Vectors of group g (one group per restart) occupy rows [g*k, (g+1)*k) of
 * `vectors`, in the restart's own component order.
 */
struct SignatureVectorSet {
    FactorSide side = FactorSide::w;
    std::size_t k = 0;
    Matrix vectors{1, 1};
    std::vector<double> scales;          // Euclidean norm of each vector before normalization
    std::vector<std::size_t> restarts;   // ensemble restart index of each group
    std::vector<double> losses;          // loss of each group's restart
    std::vector<std::size_t> dropped;    // restarts rejected for an all-zero signature
    std::vector<std::string> warnings;

    std::size_t groups() const noexcept { return restarts.size(); }
    std::size_t size() const noexcept { return vectors.rows(); }
    std::size_t dimension() const noexcept { return vectors.cols(); }
    std::size_t restart_of(std::size_t v) const { return restarts[v / k]; }
    std::span<const double> vector(std::size_t v) const { return vectors.row(v); }

    std::size_t best_group() const {
        std::size_t best = 0;
        for (std::size_t g = 1; g < losses.size(); ++g)
            if (losses[g] < losses[best]) best = g;
        return best;
    }
};

/// Side whose signature vectors have the smaller ambient dimension; ties go to W.
inline FactorSide smaller_side(std::size_t n, std::size_t m) noexcept {
    return n <= m ? FactorSide::w : FactorSide::h;
}

/**
 * Collect each restart's k signature vectors from the smaller factor:
 * columns of W (length n) when n <= m, otherwise rows of H (length m).
 */
inline SignatureVectorSet extract_signature_vectors(const Ensemble& e, std::size_t n, std::size_t m) {
    if (e.runs.empty()) throw EnsembleError("ensemble has no runs");
    const std::size_t k = e.k;
    const FactorSide side = smaller_side(n, m);
    const std::size_t dim = side == FactorSide::w ? n : m;

    SignatureVectorSet vs;
    vs.side = side;
    vs.k = k;
    std::vector<double> values;
    values.reserve(e.runs.size() * k * dim);
    for (std::size_t r = 0; r < e.runs.size(); ++r) {
        const FactorPair& run = e.runs[r];
        if (run.w.rows() != n || run.h.cols() != m || run.rank() != k)
            throw ShapeError("ensemble run does not match the requested n x m shape");
        std::vector<double> group;
        std::vector<double> norms;
        group.reserve(k * dim);
        bool zero = false;
        for (std::size_t c = 0; c < k && !zero; ++c) {
            std::vector<double> v = side == FactorSide::w ? run.w.column(c)
                                                          : std::vector<double>(run.h.row(c).begin(), run.h.row(c).end());
            const double norm = euclidean_norm(v);
            if (!(norm > 0.0)) {
                zero = true;
                break;
            }
            for (double& x : v) x /= norm;
            group.insert(group.end(), v.begin(), v.end());
            norms.push_back(norm);
        }
        if (zero) {
            vs.dropped.push_back(e.restart_indices[r]);
            vs.warnings.push_back("restart " + std::to_string(e.restart_indices[r]) +
                                  " dropped: all-zero signature vector");
            continue;
        }
        values.insert(values.end(), group.begin(), group.end());
        vs.scales.insert(vs.scales.end(), norms.begin(), norms.end());
        vs.restarts.push_back(e.restart_indices[r]);
        vs.losses.push_back(run.loss);
    }
    if (vs.restarts.empty()) throw EnsembleError("every restart produced an all-zero signature vector");
    vs.vectors = Matrix(vs.restarts.size() * k, dim, std::move(values));
    return vs;
}

}  // namespace nmfk
