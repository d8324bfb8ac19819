#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nmfk/matrix.hpp"

namespace nmfk {

/**
 * Non-negative least squares in normal-equation form:
 *   minimize 0.5 x^T G x - b^T x  subject to x >= 0
 * with G = A^T A (k x k, symmetric PSD) and b = A^T y.
 *
 * Cyclic coordinate descent; each coordinate step is the exact minimizer
 * along that axis projected onto x >= 0. Coordinates with G_cc = 0 stay 0.
 */
inline std::vector<double> nnls_gram(const Matrix& gram, std::span<const double> rhs, double tolerance = 1e-14,
                                     std::size_t max_sweeps = 20'000) {
    const std::size_t k = gram.rows();
    std::vector<double> x(k, 0.0);
    std::vector<double> grad(rhs.begin(), rhs.end());  // b - G x
    double scale = 0.0;
    for (double v : rhs) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return x;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double largest_step = 0.0;
        double largest_value = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double diag = gram(c, c);
            if (!(diag > 0.0)) continue;
            const double next = std::max(0.0, x[c] + grad[c] / diag);
            const double step = next - x[c];
            if (step == 0.0) continue;
            x[c] = next;
            for (std::size_t r = 0; r < k; ++r) grad[r] -= gram(r, c) * step;
            largest_step = std::max(largest_step, std::abs(step));
            largest_value = std::max(largest_value, next);
        }
        if (largest_step <= tolerance * std::max(1.0, largest_value)) break;
    }
    return x;
}

}  // namespace nmfk
