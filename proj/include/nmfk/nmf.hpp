#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/random.hpp"

namespace nmfk {

struct SolveOptions {
    std::size_t max_iterations = 10'000;
    double relative_tolerance = 1e-6;
    double epsilon_guard = 1e-12;
    std::size_t loss_check_interval = 10;

    void validate() const {
        if (max_iterations < 1) throw ParameterError("max_iterations must be at least 1");
        if (!(relative_tolerance > 0.0)) throw ParameterError("relative_tolerance must be positive");
        if (!(epsilon_guard > 0.0)) throw ParameterError("epsilon_guard must be positive");
        if (loss_check_interval < 1) throw ParameterError("loss_check_interval must be at least 1");
    }
};

/// One factorization X ~ W H with W (n x k) and H (k x m), both non-negative.
struct FactorPair {
    Matrix w;
    Matrix h;
    double loss = 0.0;  // masked Frobenius norm of the residual
    std::size_t iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;

    std::size_t rank() const noexcept { return w.cols(); }
};

inline void check_rank(std::size_t n, std::size_t m, std::size_t k) {
    if (k < 1 || k >= std::min(n, m))
        throw ParameterError("k = " + std::to_string(k) + " must satisfy 1 <= k < min(n, m) = " +
                             std::to_string(std::min(n, m)));
}

/// Random starting factors, entries uniform on (0, 1], fully determined by seed.
inline std::pair<Matrix, Matrix> init_factors(std::size_t n, std::size_t m, std::size_t k, std::uint64_t seed) {
    check_rank(n, m, k);
    SplitMix64 rng(seed);
    Matrix w(n, k);
    Matrix h(k, m);
    for (double& v : w.values()) v = rng.uniform_open_closed();
    for (double& v : h.values()) v = rng.uniform_open_closed();
    return {std::move(w), std::move(h)};
}

namespace detail {

/// Dot product with eight independent partial sums; fixed order, so results are reproducible.
inline double dot_unrolled(const double* a, const double* b, std::size_t len) noexcept {
    double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t j = 0;
    for (; j + 8 <= len; j += 8)
        for (std::size_t t = 0; t < 8; ++t) acc[t] += a[j + t] * b[j + t];
    double tail = 0.0;
    for (; j < len; ++j) tail += a[j] * b[j];
    return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

/// Scratch buffers reused across iterations of one solve.
struct UpdateWorkspace {
    std::vector<double> numer;
    std::vector<double> denom;
    std::vector<double> gram;
};

/// out = W H (n x m)
inline void reconstruct_into(const Matrix& w, const Matrix& h, Matrix& out) noexcept {
    const std::size_t n = w.rows(), k = w.cols(), m = h.cols();
    auto ov = out.values();
    std::fill(ov.begin(), ov.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = ov.data() + i * m;
        for (std::size_t c = 0; c < k; ++c) {
            const double wic = w(i, c);
            const double* src = h.row(c).data();
            for (std::size_t j = 0; j < m; ++j) dst[j] += wic * src[j];
        }
    }
}

/// Row-major indices of the unobserved cells.
inline std::vector<std::size_t> missing_cells(const Mask& mask) {
    std::vector<std::size_t> out;
    out.reserve(mask.missing_count());
    for (std::size_t i = 0; i < mask.rows(); ++i)
        for (std::size_t j = 0; j < mask.cols(); ++j)
            if (!mask(i, j)) out.push_back(i * mask.cols() + j);
    return out;
}

/**
 * Overwrites the listed missing cells of `filled` with (W H)(i, j); every
 * other cell must already hold X. Only the missing cells are reconstructed.
 */
inline void impute_missing(std::span<const std::size_t> missing, const Matrix& w, const Matrix& h, Matrix& filled) noexcept {
    const std::size_t k = w.cols(), m = h.cols();
    auto fv = filled.values();
    for (std::size_t p : missing) {
        const std::size_t i = p / m, j = p % m;
        double acc = 0.0;
        for (std::size_t c = 0; c < k; ++c) acc += w(i, c) * h(c, j);
        fv[p] = acc;
    }
}

/// filled = X on observed cells, W H elsewhere.
inline void impute_into(const Matrix& x, const Mask& mask, const Matrix& w, const Matrix& h, Matrix& filled) {
    filled = x;
    impute_missing(missing_cells(mask), w, h, filled);
}

inline double masked_loss_into(const Matrix& x, const Mask& mask, const Matrix& w, const Matrix& h, Matrix& scratch) {
    reconstruct_into(w, h, scratch);
    double acc = 0.0;
    const bool full = mask.all_observed();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (full || mask(i, j)) {
                const double d = x(i, j) - scratch(i, j);
                acc += d * d;
            }
    return std::sqrt(acc);
}

/// W <- W .* (T H^T) ./ max(W H H^T, guard) for a fully specified target T.
inline void update_w_inplace(const Matrix& target, Matrix& w, const Matrix& h, double guard, UpdateWorkspace& ws) {
    const std::size_t n = w.rows(), k = w.cols(), m = h.cols();
    ws.numer.resize(n * k);
    ws.denom.resize(n * k);
    ws.gram.resize(k * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) ws.numer[i * k + c] = dot_unrolled(target.row(i).data(), h.row(c).data(), m);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b)
            ws.gram[a * k + b] = ws.gram[b * k + a] = dot_unrolled(h.row(a).data(), h.row(b).data(), m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t a = 0; a < k; ++a) acc += w(i, a) * ws.gram[a * k + c];
            ws.denom[i * k + c] = acc;
        }
    auto wv = w.values();
    for (std::size_t p = 0; p < wv.size(); ++p) wv[p] = wv[p] * ws.numer[p] / std::max(ws.denom[p], guard);
}

/// H <- H .* (W^T T) ./ max(W^T W H, guard) for a fully specified target T.
inline void update_h_inplace(const Matrix& target, const Matrix& w, Matrix& h, double guard, UpdateWorkspace& ws) {
    const std::size_t n = w.rows(), k = w.cols(), m = h.cols();
    ws.numer.assign(k * m, 0.0);
    ws.denom.assign(k * m, 0.0);
    ws.gram.resize(k * k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = target.row(i).data();
        for (std::size_t c = 0; c < k; ++c) {
            const double wic = w(i, c);
            double* dst = ws.numer.data() + c * m;
            for (std::size_t j = 0; j < m; ++j) dst[j] += wic * src[j];
        }
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += w(i, a) * w(i, b);
            ws.gram[a * k + b] = ws.gram[b * k + a] = acc;
        }
    for (std::size_t c = 0; c < k; ++c) {
        double* dst = ws.denom.data() + c * m;
        for (std::size_t a = 0; a < k; ++a) {
            const double g = ws.gram[c * k + a];
            const double* src = h.row(a).data();
            for (std::size_t j = 0; j < m; ++j) dst[j] += g * src[j];
        }
    }
    auto hv = h.values();
    for (std::size_t p = 0; p < hv.size(); ++p) hv[p] = hv[p] * ws.numer[p] / std::max(ws.denom[p], guard);
}

inline void check_update_inputs(const Matrix& x, const Matrix& w, const Matrix& h, const Mask& mask) {
    check_factor_shapes(x, w, h);
    require_same_shape(x, mask);
}

}  // namespace detail

/**
 * Multiplicative update of the mixing matrix:
 *   W <- W .* (X~ H^T) ./ max(W H H^T, guard)
 * where X~ is X with unobserved cells filled from the current W H. With an
 * all-observed mask this is the classical Lee-Seung rule.
 */
inline Matrix update_w(const Matrix& x, const Matrix& w, const Matrix& h, const Mask& mask, double guard) {
    detail::check_update_inputs(x, w, h, mask);
    detail::UpdateWorkspace ws;
    Matrix out = w;
    if (mask.all_observed()) {
        detail::update_w_inplace(x, out, h, guard, ws);
    } else {
        Matrix filled(x.rows(), x.cols());
        detail::impute_into(x, mask, w, h, filled);
        detail::update_w_inplace(filled, out, h, guard, ws);
    }
    return out;
}

/// H <- H .* (W^T X~) ./ max(W^T W H, guard); the mirror of update_w.
inline Matrix update_h(const Matrix& x, const Matrix& w, const Matrix& h, const Mask& mask, double guard) {
    detail::check_update_inputs(x, w, h, mask);
    detail::UpdateWorkspace ws;
    Matrix out = h;
    if (mask.all_observed()) {
        detail::update_h_inplace(x, w, out, guard, ws);
    } else {
        Matrix filled(x.rows(), x.cols());
        detail::impute_into(x, mask, w, h, filled);
        detail::update_h_inplace(filled, w, out, guard, ws);
    }
    return out;
}

/**
 * Run alternating multiplicative updates from the given starting factors.
 *
 * Stops when the masked loss changes by less than relative_tolerance (relative
 * to the previous checkpoint) between checkpoints spaced loss_check_interval
 * iterations apart, or after max_iterations update pairs.
 */
inline FactorPair refine(const Matrix& x, const Mask& mask, Matrix w, Matrix h, const SolveOptions& opts,
                         std::uint64_t seed = 0) {
    opts.validate();
    detail::check_update_inputs(x, w, h, mask);
    if (mask.observed_count() == 0) throw DegenerateInputError("mask has no observed entries");
    if (!w.non_negative() || !h.non_negative()) throw ParameterError("starting factors must be non-negative");

    const bool full = mask.all_observed();
    detail::UpdateWorkspace ws;
    Matrix scratch(x.rows(), x.cols());
    const std::vector<std::size_t> missing = full ? std::vector<std::size_t>{} : detail::missing_cells(mask);
    Matrix filled = x;
    double checkpoint = detail::masked_loss_into(x, mask, w, h, scratch);
    std::size_t it = 0;
    bool converged = false;
    while (it < opts.max_iterations) {
        if (full) {
            detail::update_w_inplace(x, w, h, opts.epsilon_guard, ws);
            detail::update_h_inplace(x, w, h, opts.epsilon_guard, ws);
        } else {
            detail::impute_missing(missing, w, h, filled);
            detail::update_w_inplace(filled, w, h, opts.epsilon_guard, ws);
            detail::impute_missing(missing, w, h, filled);
            detail::update_h_inplace(filled, w, h, opts.epsilon_guard, ws);
        }
        ++it;
        if (!w.all_finite() || !h.all_finite()) throw NumericalFailure("non-finite factor entry", it);
        if (it % opts.loss_check_interval == 0) {
            const double loss = detail::masked_loss_into(x, mask, w, h, scratch);
            if (!std::isfinite(loss)) throw NumericalFailure("non-finite loss", it);
            const bool stalled = checkpoint == 0.0 || std::abs(checkpoint - loss) < opts.relative_tolerance * checkpoint;
            checkpoint = loss;
            if (stalled) {
                converged = true;
                break;
            }
        }
    }
    const double loss = masked_frobenius_loss(x, w, h, mask);
    if (!std::isfinite(loss)) throw NumericalFailure("non-finite loss", it);
    return FactorPair{std::move(w), std::move(h), loss, it, converged, seed};
}

/// Single random-start masked NMF solve of rank k.
inline FactorPair solve(const Matrix& x, const Mask& mask, std::size_t k, std::uint64_t seed,
                        const SolveOptions& opts = {}) {
    require_same_shape(x, mask);
    check_rank(x.rows(), x.cols(), k);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask(i, j) && x(i, j) < 0.0) throw ParameterError("observed entries of X must be non-negative");
    auto [w, h] = init_factors(x.rows(), x.cols(), k, seed);
    return refine(x, mask, std::move(w), std::move(h), opts, seed);
}

}  // namespace nmfk
