#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "mat.hpp"
#include "rng.hpp"

namespace veil {

/// Permutation on [0, size). As a matrix it has a single 1 in each row and
/// column: mat()[i][j] = 1 iff j == map[i]. Applying it on the left of X
/// gathers rows (row i of the result is row map[i] of X); on the right it
/// scatters columns (column k of X lands in column map[k] of the result).
/// Both applications are exact data moves, no arithmetic.
struct Perm {
    std::vector<std::uint32_t> map;

    std::size_t size() const { return map.size(); }

    static Perm identity(std::size_t n) {
        Perm p;
        p.map.resize(n);
        std::iota(p.map.begin(), p.map.end(), 0u);
        return p;
    }

    Perm inverse() const {
        Perm inv;
        inv.map.resize(map.size());
        for (std::size_t i = 0; i < map.size(); ++i) inv.map[map[i]] = static_cast<std::uint32_t>(i);
        return inv;
    }

    bool is_identity() const {
        for (std::size_t i = 0; i < map.size(); ++i)
            if (map[i] != i) return false;
        return true;
    }

    template <std::floating_point R>
    Mat<R> mat() const {
        Mat<R> m(size(), size());
        for (std::size_t i = 0; i < size(); ++i) m(i, map[i]) = R(1);
        return m;
    }

    /// mat() * x  (row gather).
    template <std::floating_point R>
    Mat<R> apply_rows(const Mat<R>& x) const {
        if (x.rows() != size()) throw ShapeError("Perm::apply_rows: size mismatch");
        Mat<R> out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(map[i], j);
        return out;
    }

    /// x * mat()  (column scatter).
    template <std::floating_point R>
    Mat<R> apply_cols(const Mat<R>& x) const {
        if (x.cols() != size()) throw ShapeError("Perm::apply_cols: size mismatch");
        Mat<R> out(x.rows(), x.cols());
        for (std::size_t k = 0; k < x.cols(); ++k)
            for (std::size_t i = 0; i < x.rows(); ++i) out(i, map[k]) = x(i, k);
        return out;
    }
};

/// Uniform random permutation (Fisher-Yates).
inline Perm rand_perm(std::size_t n, SeededRng& rng) {
    Perm p = Perm::identity(n);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(p.map[i - 1], p.map[j]);
    }
    return p;
}

}  // namespace veil
