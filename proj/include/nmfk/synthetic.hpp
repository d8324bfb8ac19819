#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/random.hpp"

namespace nmfk {

struct PlantedOptions {
    std::size_t n = 12;
    std::size_t m = 40;
    std::size_t k = 3;
    double noise = 0.01;  // Gaussian noise sd relative to the RMS of W H
    double missing_fraction = 0.0;
    double max_signature_cosine = 0.5;  // pairwise bound on planted W columns
    std::uint64_t seed = 1;
};

/// Known low-rank non-negative instance for recovery tests and benchmarks.
struct PlantedInstance {
    Matrix x{1, 1};
    Mask mask{1, 1};
    Matrix w{1, 1};  // n x k, planted signatures as columns
    Matrix h{1, 1};  // k x m
};

/**
 * Draws W with a dominant block of attributes per signature (attribute i
 * leads signature i mod k) over a weak uniform background, H with a share of
 * exact zeros, then X = max(0, W H + noise). W is redrawn until every pair of
 * columns has cosine similarity below max_signature_cosine.
 */
inline PlantedInstance make_planted(const PlantedOptions& opt) {
    if (opt.k < 1 || opt.k >= std::min(opt.n, opt.m)) throw ParameterError("planted k must satisfy 1 <= k < min(n, m)");
    if (opt.missing_fraction < 0.0 || opt.missing_fraction >= 1.0) throw ParameterError("missing_fraction must lie in [0, 1)");
    SplitMix64 rng(opt.seed);
    const std::size_t n = opt.n, m = opt.m, k = opt.k;

    PlantedInstance out;
    Matrix w(n, k);
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw ParameterError("could not draw signatures with the requested separation");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c)
                w(i, c) = i % k == c ? 0.5 + 0.5 * rng.uniform_open_closed() : 0.15 * rng.uniform();
        bool separated = true;
        for (std::size_t a = 0; a < k && separated; ++a)
            for (std::size_t b = a + 1; b < k && separated; ++b)
                separated = 1.0 - cosine_dissimilarity(w.column(a), w.column(b)) < opt.max_signature_cosine;
        if (separated) break;
    }

    Matrix h(k, m);
    for (double& v : h.values()) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform_open_closed();
    for (std::size_t j = 0; j < m; ++j) {
        bool any = false;
        for (std::size_t c = 0; c < k; ++c) any = any || h(c, j) > 0.0;
        if (!any) h(rng.below(k), j) = rng.uniform_open_closed();
    }

    Matrix x = multiply(w, h);
    double rms = frobenius_norm(x) / std::sqrt(static_cast<double>(n * m));
    for (double& v : x.values()) v = std::max(0.0, v + opt.noise * rms * rng.normal());

    std::vector<bool> observed(n * m, true);
    if (opt.missing_fraction > 0.0) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == 1000) throw ParameterError("could not draw a mask covering every row and column");
            for (std::size_t i = 0; i < n * m; ++i) observed[i] = rng.uniform() >= opt.missing_fraction;
            if (Mask(n, m, observed).covers_all_rows_and_columns()) break;
        }
        for (std::size_t i = 0; i < n * m; ++i)
            if (!observed[i]) x.values()[i] = 0.0;
    }

    out.x = std::move(x);
    out.mask = Mask(n, m, std::move(observed));
    out.w = std::move(w);
    out.h = std::move(h);
    return out;
}

}  // namespace nmfk
