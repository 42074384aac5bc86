#pragma once

#include <concepts>
#include <cstddef>
#include <vector>

#include "error.hpp"
#include "mat.hpp"

namespace veil {

/// Dense 4-D activation tensor: (batch n, channel c, height h, width w),
/// n-major storage. Convolution inputs/outputs and their masked versions
/// live here; everything 2-D is a Mat.
template <std::floating_point R>
class Tensor4 {
public:
    Tensor4() = default;

    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, R fill = R(0))
        : n_(n), c_(c), h_(h), w_(w), data_(n * c * h * w, fill) {}

    std::size_t n() const { return n_; }
    std::size_t c() const { return c_; }
    std::size_t h() const { return h_; }
    std::size_t w() const { return w_; }
    std::size_t size() const { return data_.size(); }

    R& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) {
        return data_[((b * c_ + ch) * h_ + y) * w_ + x];
    }
    const R& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
        return data_[((b * c_ + ch) * h_ + y) * w_ + x];
    }

    std::span<R> data() { return data_; }
    std::span<const R> data() const { return data_; }

    /// Loss-free 2-D view: rows = n, cols = c*h*w, column index c*(h*w) + y*w + x.
    Mat<R> flatten() const {
        Mat<R> m(n_, c_ * h_ * w_);
        std::copy(data_.begin(), data_.end(), m.data().begin());
        return m;
    }

    static Tensor4 unflatten(const Mat<R>& m, std::size_t c, std::size_t h, std::size_t w) {
        if (m.cols() != c * h * w) throw ShapeError("Tensor4::unflatten: column count mismatch");
        Tensor4 t(m.rows(), c, h, w);
        std::copy(m.data().begin(), m.data().end(), t.data_.begin());
        return t;
    }

    template <typename F>
    Tensor4 map(F f) const {
        Tensor4 out(n_, c_, h_, w_);
        for (std::size_t k = 0; k < data_.size(); ++k) out.data_[k] = f(data_[k]);
        return out;
    }

    bool finite() const {
        for (R v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    R max_abs() const {
        R m = R(0);
        for (R v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    bool same_shape(const Tensor4& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    Tensor4& operator+=(const Tensor4& o) {
        if (!same_shape(o)) throw ShapeError("Tensor4 +=: shape mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
    friend Tensor4 operator-(Tensor4 a, const Tensor4& b) {
        if (!a.same_shape(b)) throw ShapeError("Tensor4 -: shape mismatch");
        for (std::size_t k = 0; k < a.data_.size(); ++k) a.data_[k] -= b.data_[k];
        return a;
    }

    friend bool operator==(const Tensor4& a, const Tensor4& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    std::size_t n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<R> data_;
};

/// P * X: mixes the batch dimension. out[b'] = sum_b P(b', b) X[b].
template <std::floating_point R>
Tensor4<R> batch_mix(const Mat<R>& p, const Tensor4<R>& x) {
    if (p.cols() != x.n()) throw ShapeError("batch_mix: batch size mismatch");
    Tensor4<R> out(p.rows(), x.c(), x.h(), x.w());
    const std::size_t stride = x.c() * x.h() * x.w();
    for (std::size_t bo = 0; bo < p.rows(); ++bo)
        for (std::size_t bi = 0; bi < x.n(); ++bi) {
            const R f = p(bo, bi);
            if (f == R(0)) continue;
            const R* src = x.data().data() + bi * stride;
            R* dst = out.data().data() + bo * stride;
            for (std::size_t k = 0; k < stride; ++k) dst[k] += f * src[k];
        }
    return out;
}

/// X * Q: mixes the channel dimension. out[.., r] = sum_c X[.., c] Q(c, r).
template <std::floating_point R>
Tensor4<R> channel_mix(const Tensor4<R>& x, const Mat<R>& q) {
    if (q.rows() != x.c()) throw ShapeError("channel_mix: channel count mismatch");
    Tensor4<R> out(x.n(), q.cols(), x.h(), x.w());
    const std::size_t plane = x.h() * x.w();
    for (std::size_t b = 0; b < x.n(); ++b)
        for (std::size_t c = 0; c < x.c(); ++c)
            for (std::size_t r = 0; r < q.cols(); ++r) {
                const R f = q(c, r);
                if (f == R(0)) continue;
                const R* src = x.data().data() + (b * x.c() + c) * plane;
                R* dst = out.data().data() + (b * q.cols() + r) * plane;
                for (std::size_t k = 0; k < plane; ++k) dst[k] += f * src[k];
            }
    return out;
}

template <std::floating_point R>
R max_abs_diff(const Tensor4<R>& a, const Tensor4<R>& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    R m = R(0);
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

}  // namespace veil
