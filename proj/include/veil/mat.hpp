#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace veil {

/// Dense real matrix, row-major.
///
/// This is the substrate of the whole protocol: weights, masks and 2-D
/// activations are all Mats. Precision is a template parameter; double is
/// the default everywhere, float exists for the error-magnitude study.
template <std::floating_point R>
class Mat {
public:
    Mat() = default;

    Mat(std::size_t rows, std::size_t cols, R fill = R(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Mat(std::initializer_list<std::initializer_list<R>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw ShapeError("Mat: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = R(1);
        return m;
    }

    static Mat from_row(std::span<const R> v) {
        Mat m(1, v.size());
        std::copy(v.begin(), v.end(), m.data_.begin());
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    R& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const R& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<R> data() { return data_; }
    std::span<const R> data() const { return data_; }

    Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    template <typename F>
    Mat map(F f) const {
        Mat out(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) out.data_[k] = f(data_[k]);
        return out;
    }

    bool finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](R v) { return std::isfinite(v); });
    }

    R max_abs() const {
        R m = R(0);
        for (R v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Induced 1-norm (max column abs sum).
    R norm1() const {
        R best = R(0);
        for (std::size_t j = 0; j < cols_; ++j) {
            R s = R(0);
            for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
            best = std::max(best, s);
        }
        return best;
    }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Mat& operator+=(const Mat& o) {
        if (!same_shape(o)) throw ShapeError("Mat +=: shape mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    Mat& operator-=(const Mat& o) {
        if (!same_shape(o)) throw ShapeError("Mat -=: shape mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    Mat& operator*=(R s) {
        for (R& v : data_) v *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, R s) { return a *= s; }
    friend Mat operator*(R s, Mat a) { return a *= s; }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<R> data_;
};

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

/// a * b. ikj loop order; good enough for desk-scale shapes.
template <std::floating_point R>
Mat<R> matmul(const Mat<R>& a, const Mat<R>& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Mat<R> out(a.rows(), b.cols());
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    const R* ad = a.data().data();
    const R* bd = b.data().data();
    R* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            const R aik = ad[i * m + k];
            if (aik == R(0)) continue;
            const R* brow = bd + k * p;
            R* orow = od + i * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

/// a * b^T without materializing the transpose.
template <std::floating_point R>
Mat<R> matmul_nt(const Mat<R>& a, const Mat<R>& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dims disagree");
    Mat<R> out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            R s = R(0);
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            out(i, j) = s;
        }
    return out;
}

template <std::floating_point R>
Mat<R> operator*(const Mat<R>& a, const Mat<R>& b) {
    return matmul(a, b);
}

// ---------------------------------------------------------------------------
// Inverse and conditioning
// ---------------------------------------------------------------------------

/// Gauss-Jordan inverse with partial pivoting. Throws NumericError when the
/// pivot collapses; callers that need graceful rejection use try_inverse.
template <std::floating_point R>
Mat<R> inverse(const Mat<R>& m) {
    if (m.rows() != m.cols()) throw ShapeError("inverse: matrix not square");
    const std::size_t n = m.rows();
    Mat<R> a = m;
    Mat<R> inv = Mat<R>::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (a(piv, col) == R(0)) throw NumericError("inverse: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(piv, j));
                std::swap(inv(col, j), inv(piv, j));
            }
        }
        const R d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) continue;
            const R f = a(i, col);
            if (f == R(0)) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(col, j);
                inv(i, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

template <std::floating_point R>
bool try_inverse(const Mat<R>& m, Mat<R>& out) {
    try {
        out = inverse(m);
        return out.finite();
    } catch (const NumericError&) {
        return false;
    }
}

/// 1-norm condition number; the inverse is already at hand wherever this is
/// needed, so the estimate is free.
template <std::floating_point R>
R cond1(const Mat<R>& m, const Mat<R>& minv) {
    return m.norm1() * minv.norm1();
}

// ---------------------------------------------------------------------------
// Small helpers used all over the tests and reports
// ---------------------------------------------------------------------------

template <std::floating_point R>
R max_abs_diff(const Mat<R>& a, const Mat<R>& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    R m = R(0);
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

/// Per-row argmax; ties resolve to the lowest index.
template <std::floating_point R>
std::vector<std::size_t> argmax_rows(const Mat<R>& m) {
    std::vector<std::size_t> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < m.cols(); ++j)
            if (m(i, j) > m(i, best)) best = j;
        out[i] = best;
    }
    return out;
}

}  // namespace veil
