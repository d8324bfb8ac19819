#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nmfk/errors.hpp"

namespace nmfk {

/**
 * Dense row-major matrix of doubles.
 *
 * Shapes are always at least 1 x 1. Entries are checked for finiteness when a
 * matrix is built from external values (from_rows, the value constructor);
 * arithmetic helpers in this header never introduce non-finite values on
 * finite input except through overflow, which callers detect with all_finite().
 */
class Matrix {
public:
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(checked_size(rows, cols), fill) {
        if (!std::isfinite(fill)) throw DegenerateInputError("matrix fill value must be finite");
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != checked_size(rows, cols))
            throw ShapeError("matrix value count " + std::to_string(values_.size()) + " does not match " +
                             std::to_string(rows) + "x" + std::to_string(cols));
        if (!all_finite()) throw DegenerateInputError("matrix entries must be finite");
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("ragged matrix literal");
            values.insert(values.end(), row.begin(), row.end());
        }
        return Matrix(r, c, std::move(values));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
        return out;
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    bool non_negative() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0; });
    }

    Matrix transposed() const {
        Matrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    static std::size_t checked_size(std::size_t rows, std::size_t cols) {
        if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be at least 1x1");
        return rows * cols;
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

/// Observation pattern for a companion matrix; true = observed.
class Mask {
public:
    /// All-observed mask.
    Mask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), observed_(rows * cols, 1) {
        if (rows == 0 || cols == 0) throw ShapeError("mask dimensions must be at least 1x1");
        observed_count_ = observed_.size();
    }

    Mask(std::size_t rows, std::size_t cols, std::vector<bool> observed) : rows_(rows), cols_(cols) {
        if (rows == 0 || cols == 0) throw ShapeError("mask dimensions must be at least 1x1");
        if (observed.size() != rows * cols) throw ShapeError("mask value count does not match its shape");
        observed_.assign(observed.begin(), observed.end());
        observed_count_ = static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), 1));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool operator()(std::size_t i, std::size_t j) const noexcept { return observed_[i * cols_ + j] != 0; }
    std::size_t observed_count() const noexcept { return observed_count_; }
    std::size_t missing_count() const noexcept { return observed_.size() - observed_count_; }
    bool all_observed() const noexcept { return observed_count_ == observed_.size(); }

    /// True when every row and every column has at least one observed entry.
    bool covers_all_rows_and_columns() const {
        std::vector<char> col_seen(cols_, 0);
        for (std::size_t i = 0; i < rows_; ++i) {
            bool row_seen = false;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (observed_[i * cols_ + j]) {
                    row_seen = true;
                    col_seen[j] = 1;
                }
            }
            if (!row_seen) return false;
        }
        return std::all_of(col_seen.begin(), col_seen.end(), [](char c) { return c != 0; });
    }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<unsigned char> observed_;
    std::size_t observed_count_ = 0;
};

inline void require_same_shape(const Matrix& x, const Mask& mask) {
    if (x.rows() != mask.rows() || x.cols() != mask.cols())
        throw ShapeError("mask shape " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                         " does not match matrix shape " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()));
}

/// A * B
inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("multiply: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t cols = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.row(i).data();
        const double* arow = a.row(i).data();
        for (std::size_t p = 0; p < inner; ++p) {
            const double aip = arow[p];
            const double* brow = b.row(p).data();
            for (std::size_t j = 0; j < cols; ++j) dst[j] += aip * brow[j];
        }
    }
    return out;
}

/// A * B^T, evaluated as A * (B^T) so the inner loop is a contiguous axpy.
inline Matrix multiply_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("multiply_transpose_b: inner dimensions differ");
    return multiply(a, b.transposed());
}

/// A^T * B
inline Matrix multiply_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("multiply_transpose_a: inner dimensions differ");
    Matrix out(a.cols(), b.cols());
    const std::size_t cols = b.cols();
    for (std::size_t p = 0; p < a.rows(); ++p) {
        const double* arow = a.row(p).data();
        const double* brow = b.row(p).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double api = arow[i];
            double* dst = out.row(i).data();
            for (std::size_t j = 0; j < cols; ++j) dst[j] += api * brow[j];
        }
    }
    return out;
}

inline double frobenius_norm(const Matrix& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v * v;
    return std::sqrt(acc);
}

/// Frobenius norm restricted to observed entries.
inline double masked_frobenius_norm(const Matrix& x, const Mask& mask) {
    require_same_shape(x, mask);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask(i, j)) acc += x(i, j) * x(i, j);
    return std::sqrt(acc);
}

namespace detail {

inline void check_factor_shapes(const Matrix& x, const Matrix& w, const Matrix& h) {
    if (w.cols() != h.rows() || x.rows() != w.rows() || x.cols() != h.cols())
        throw ShapeError("factor shapes " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + " * " +
                         std::to_string(h.rows()) + "x" + std::to_string(h.cols()) + " do not conform to " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

}  // namespace detail

/// ||X - W H||_F
inline double frobenius_loss(const Matrix& x, const Matrix& w, const Matrix& h) {
    detail::check_factor_shapes(x, w, h);
    const Matrix wh = multiply(w, h);
    double acc = 0.0;
    const auto xv = x.values();
    const auto rv = wh.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = xv[i] - rv[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// ||X - W H||_F summed over observed entries only.
inline double masked_frobenius_loss(const Matrix& x, const Matrix& w, const Matrix& h, const Mask& mask) {
    detail::check_factor_shapes(x, w, h);
    require_same_shape(x, mask);
    if (mask.observed_count() == 0) throw DegenerateInputError("mask has no observed entries");
    const Matrix wh = multiply(w, h);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask(i, j)) {
                const double d = x(i, j) - wh(i, j);
                acc += d * d;
            }
    return std::sqrt(acc);
}

inline double dot(std::span<const double> p, std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * q[i];
    return acc;
}

inline double euclidean_norm(std::span<const double> p) { return std::sqrt(dot(p, p)); }

/**
 * Cosine dissimilarity 1 - <p,q> / (|p| |q|).
 *
 * For non-negative inputs the result lies in [0, 1]. Rounding in the quotient
 * is clamped away so identical vectors give exactly 0.
 */
inline double cosine_dissimilarity(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("cosine_dissimilarity: length mismatch");
    const double np = euclidean_norm(p);
    const double nq = euclidean_norm(q);
    if (!(np > 0.0) || !(nq > 0.0)) throw DegenerateInputError("cosine_dissimilarity: zero-norm vector");
    const double d = 1.0 - dot(p, q) / (np * nq);
    return std::clamp(d, 0.0, 2.0);
}

/// Same as cosine_dissimilarity for vectors already known to have unit length.
inline double unit_cosine_dissimilarity(std::span<const double> p, std::span<const double> q) noexcept {
    return std::clamp(1.0 - dot(p, q), 0.0, 2.0);
}

}  // namespace nmfk
