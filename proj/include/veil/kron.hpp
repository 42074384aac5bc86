#pragma once

#include <span>
#include <utility>

#include "mat.hpp"

namespace veil {

/// Kronecker product. Composite indices follow the row-major convention used
/// everywhere in this library: out(i*p + s, j*q + t) = a(i,j) * b(s,t) for
/// b of shape p x q. Under this convention the mixed-product law
/// (A (x) B)(C (x) D) = (AC) (x) (BD) holds, and so does the flatten identity
/// Flatten(P X Q) = Flatten(X) (P^T (x) Q).
template <std::floating_point R>
Mat<R> kron(const Mat<R>& a, const Mat<R>& b) {
    if (a.empty() || b.empty()) throw ShapeError("kron: empty operand");
    const std::size_t m = a.rows(), n = a.cols(), p = b.rows(), q = b.cols();
    if (m > 0 && n > 0 && (m * p) / p != m)  // overflow guard on the product shape
        throw ShapeError("kron: product shape overflow");
    Mat<R> out(m * p, n * q);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const R aij = a(i, j);
            for (std::size_t s = 0; s < p; ++s)
                for (std::size_t t = 0; t < q; ++t)
                    out(i * p + s, j * q + t) = aij * b(s, t);
        }
    return out;
}

/// Block-diagonal assembly of square blocks. The inverse of the result is the
/// block diagonal of the block inverses.
template <std::floating_point R>
Mat<R> block_diag(std::span<const Mat<R>> blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) {
        if (b.rows() != b.cols()) throw ShapeError("block_diag: non-square block");
        n += b.rows();
    }
    Mat<R> out(n, n);
    std::size_t off = 0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j) out(off + i, off + j) = b(i, j);
        off += b.rows();
    }
    return out;
}

template <std::floating_point R>
Mat<R> block_diag(std::initializer_list<Mat<R>> blocks) {
    return block_diag(std::span<const Mat<R>>(blocks.begin(), blocks.size()));
}

/// Index-selection pair (e1, e2) for pulling one Kronecker sub-entry out of
/// every block: e1 * (A (x) Rbar) * e2 = A * Rbar(s0, t0) for any A of shape
/// b x d and Rbar of shape p x q. e1 is b x bp with e1(i, i*p + s0) = 1;
/// e2 is dq x d with e2(j*q + t0, j) = 1.
template <std::floating_point R>
std::pair<Mat<R>, Mat<R>> selection_pair(std::size_t b, std::size_t p, std::size_t d,
                                         std::size_t q, std::size_t s0, std::size_t t0) {
    if (s0 >= p || t0 >= q) throw ShapeError("selection_pair: index out of range");
    Mat<R> e1(b, b * p);
    for (std::size_t i = 0; i < b; ++i) e1(i, i * p + s0) = R(1);
    Mat<R> e2(d * q, d);
    for (std::size_t j = 0; j < d; ++j) e2(j * q + t0, j) = R(1);
    return {std::move(e1), std::move(e2)};
}

}  // namespace veil
