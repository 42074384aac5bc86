#pragma once

#include <concepts>
#include <string>

#include "mat.hpp"
#include "rng.hpp"

namespace veil {

/// An invertible mask together with its cached inverse. Inverses are computed
/// once at generation time and reused for every inference.
template <std::floating_point R>
struct Invertible {
    Mat<R> m;
    Mat<R> inv;
    R cond = R(0);  // 1-norm condition number
    int attempts = 1;

    static Invertible identity(std::size_t n) {
        Invertible v;
        v.m = Mat<R>::identity(n);
        v.inv = Mat<R>::identity(n);
        v.cond = R(1);
        return v;
    }
};

/// Matrix with entries i.i.d. uniform on (-1, 1).
template <std::floating_point R>
Mat<R> rand_signed(std::size_t rows, std::size_t cols, SeededRng& rng) {
    Mat<R> m(rows, cols);
    for (R& v : m.data()) v = static_cast<R>(rng.signed_unit());
    return m;
}

/// Matrix with entries i.i.d. uniform on (0, 1), strictly positive.
template <std::floating_point R>
Mat<R> rand_positive(std::size_t rows, std::size_t cols, SeededRng& rng) {
    if (rows < 1 || cols < 1) throw ShapeError("rand_positive: empty shape");
    Mat<R> m(rows, cols);
    for (R& v : m.data()) v = static_cast<R>(rng.positive_unit());
    return m;
}

/// Random invertible matrix, entries uniform on (-1, 1), rejection-sampled
/// until the 1-norm condition number is at most cond_max. The uniform draw
/// alone is almost surely invertible but can land arbitrarily close to
/// singular; the condition bound keeps unmasking numerically stable.
template <std::floating_point R>
Invertible<R> rand_invertible(std::size_t n, SeededRng& rng, double cond_max = 1e6,
                              int budget = 1000) {
    if (n < 1) throw ShapeError("rand_invertible: n must be >= 1");
    if (cond_max <= 1.0) throw NumericError("rand_invertible: cond_max must exceed 1");
    for (int attempt = 1; attempt <= budget; ++attempt) {
        Invertible<R> out;
        out.m = rand_signed<R>(n, n, rng);
        if (!try_inverse(out.m, out.inv)) continue;
        out.cond = cond1(out.m, out.inv);
        if (!(static_cast<double>(out.cond) <= cond_max)) continue;
        out.attempts = attempt;
        return out;
    }
    throw NumericError("rand_invertible: rejection budget exhausted after " +
                       std::to_string(budget) + " attempts (cond_max=" +
                       std::to_string(cond_max) + ", n=" + std::to_string(n) + ")");
}

}  // namespace veil
