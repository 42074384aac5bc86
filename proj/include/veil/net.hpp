#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "mat.hpp"
#include "tensor.hpp"

namespace veil {

// ---------------------------------------------------------------------------
// Activations: everything flowing through a model is a Mat or a Tensor4
// ---------------------------------------------------------------------------

template <std::floating_point R>
using Act = std::variant<Mat<R>, Tensor4<R>>;

struct MatShape {
    std::size_t rows = 0, cols = 0;
    friend bool operator==(const MatShape&, const MatShape&) = default;
};
struct T4Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    friend bool operator==(const T4Shape&, const T4Shape&) = default;
};
using ActShape = std::variant<MatShape, T4Shape>;

template <std::floating_point R>
ActShape shape_of(const Act<R>& a) {
    if (std::holds_alternative<Mat<R>>(a)) {
        const auto& m = std::get<Mat<R>>(a);
        return MatShape{m.rows(), m.cols()};
    }
    const auto& t = std::get<Tensor4<R>>(a);
    return T4Shape{t.n(), t.c(), t.h(), t.w()};
}

inline std::string shape_str(const ActShape& s) {
    if (std::holds_alternative<MatShape>(s)) {
        const auto& m = std::get<MatShape>(s);
        return std::to_string(m.rows) + "x" + std::to_string(m.cols);
    }
    const auto& t = std::get<T4Shape>(s);
    return std::to_string(t.n) + "x" + std::to_string(t.c) + "x" + std::to_string(t.h) + "x" +
           std::to_string(t.w);
}

// ---------------------------------------------------------------------------
// Layer definitions
// ---------------------------------------------------------------------------

/// Fully connected layer computing y = x W^T + b.
template <std::floating_point R>
struct DenseL {
    Mat<R> w;  // out x in
    Mat<R> b;  // 1 x out
};

/// 2-D convolution (cross-correlation), kernels indexed (out_ch, in_ch, kh, kw).
template <std::floating_point R>
struct ConvL {
    Tensor4<R> kernels;
    Mat<R> b;  // 1 x out_ch
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// Inference-time batch normalization with frozen statistics.
template <std::floating_point R>
struct BatchNormL {
    Mat<R> gamma, beta, mu, sigma;  // 1 x channels each
    R eps = R(1e-5);
};

struct AvgPoolL {
    std::size_t k = 2;  // non-overlapping k x k window means
};

struct FlattenL {};
struct ReluL {};
struct GeluL {};

/// Multi-head self-attention: Q = X Wq, K = X Wk, V = X Wv, heads are column
/// slices of width d_model / heads, output is the concatenation times Wo.
template <std::floating_point R>
struct MhaL {
    Mat<R> wq, wk, wv, wo;  // d_model x d_model each
    std::size_t heads = 1;
};

/// Row-wise standardization followed by the learned affine map.
template <std::floating_point R>
struct LayerNormL {
    Mat<R> gamma, beta;  // 1 x d
    R eps = R(0);
};

/// Marker block: adds the activation produced after block `src`
/// (kResidualFromInput refers to the model input).
struct ResidualAdd {
    static constexpr std::size_t kFromInput = static_cast<std::size_t>(-1);
    std::size_t src = kFromInput;
};

template <std::floating_point R>
using Block = std::variant<DenseL<R>, ConvL<R>, BatchNormL<R>, AvgPoolL, FlattenL, ReluL, GeluL,
                           MhaL<R>, LayerNormL<R>, ResidualAdd>;

enum class LayerKind : std::uint8_t {
    dense,
    conv,
    batchnorm,
    avgpool,
    flatten,
    relu,
    gelu,
    mha,
    layernorm,
    residual,
};

template <std::floating_point R>
LayerKind kind_of(const Block<R>& b) {
    return std::visit(
        [](const auto& l) -> LayerKind {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseL<R>>) return LayerKind::dense;
            else if constexpr (std::is_same_v<T, ConvL<R>>) return LayerKind::conv;
            else if constexpr (std::is_same_v<T, BatchNormL<R>>) return LayerKind::batchnorm;
            else if constexpr (std::is_same_v<T, AvgPoolL>) return LayerKind::avgpool;
            else if constexpr (std::is_same_v<T, FlattenL>) return LayerKind::flatten;
            else if constexpr (std::is_same_v<T, ReluL>) return LayerKind::relu;
            else if constexpr (std::is_same_v<T, GeluL>) return LayerKind::gelu;
            else if constexpr (std::is_same_v<T, MhaL<R>>) return LayerKind::mha;
            else if constexpr (std::is_same_v<T, LayerNormL<R>>) return LayerKind::layernorm;
            else return LayerKind::residual;
        },
        b);
}

inline const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv: return "conv";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::relu: return "relu";
        case LayerKind::gelu: return "gelu";
        case LayerKind::mha: return "mha";
        case LayerKind::layernorm: return "layernorm";
        case LayerKind::residual: return "residual";
    }
    return "?";
}

/// Ordered layer list plus the fixed input shape it runs on.
template <std::floating_point R>
struct PlainModel {
    ActShape input_shape;
    std::vector<Block<R>> blocks;
};

// ---------------------------------------------------------------------------
// Element-wise activations
// ---------------------------------------------------------------------------

template <std::floating_point R>
R relu_scalar(R x) {
    return x > R(0) ? x : R(0);
}

/// Exact GELU: x * Phi(x) with the Gaussian CDF via erf. The tanh
/// approximation is deliberately not used; the masked GELU recovery relies on
/// the element at the unit Kronecker factor being reproduced exactly.
template <std::floating_point R>
R gelu_scalar(R x) {
    const R kInvSqrt2 = static_cast<R>(0.70710678118654752440L);
    return x * static_cast<R>(0.5) * (R(1) + std::erf(x * kInvSqrt2));
}

template <std::floating_point R>
Mat<R> relu_fwd(const Mat<R>& x) {
    return x.map(relu_scalar<R>);
}
template <std::floating_point R>
Tensor4<R> relu_fwd(const Tensor4<R>& x) {
    return x.map(relu_scalar<R>);
}
template <std::floating_point R>
Mat<R> gelu_fwd(const Mat<R>& x) {
    return x.map(gelu_scalar<R>);
}
template <std::floating_point R>
Tensor4<R> gelu_fwd(const Tensor4<R>& x) {
    return x.map(gelu_scalar<R>);
}

/// Row-wise softmax, max-subtracted. The shift is per row and therefore
/// invariant under column permutations, which keeps the permutation
/// equivariance used by the masked attention path intact.
template <std::floating_point R>
Mat<R> softmax_rows(const Mat<R>& x) {
    Mat<R> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        R mx = x(i, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
        R sum = R(0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(i, j) = std::exp(x(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

/// Row-wise standardization: mean 0, variance 1 (population), with eps folded
/// into the denominator. A constant row maps to zeros (the eps -> 0 limit).
template <std::floating_point R>
Mat<R> norm_rows(const Mat<R>& x, R eps) {
    Mat<R> out(x.rows(), x.cols());
    const R d = static_cast<R>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        R mean = R(0);
        for (std::size_t j = 0; j < x.cols(); ++j) mean += x(i, j);
        mean /= d;
        R var = R(0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const R c = x(i, j) - mean;
            var += c * c;
        }
        var /= d;
        const R denom = std::sqrt(var + eps);
        if (denom == R(0)) continue;  // row stays zero
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean) / denom;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layer forwards
// ---------------------------------------------------------------------------

template <std::floating_point R>
Mat<R> dense_fwd(const Mat<R>& x, const DenseL<R>& l) {
    if (x.cols() != l.w.cols())
        throw ShapeError("dense_fwd: input cols " + std::to_string(x.cols()) +
                         " != fan-in " + std::to_string(l.w.cols()));
    Mat<R> y = matmul_nt(x, l.w);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += l.b(0, j);
    return y;
}

template <std::floating_point R>
Tensor4<R> conv_fwd(const Tensor4<R>& x, const ConvL<R>& l) {
    const auto& k = l.kernels;
    if (x.c() != k.c()) throw ShapeError("conv_fwd: input channels mismatch");
    const std::size_t kh = k.h(), kw = k.w();
    if (x.h() + 2 * l.padding < kh || x.w() + 2 * l.padding < kw)
        throw ShapeError("conv_fwd: spatial dims underflow");
    const std::size_t oh = (x.h() + 2 * l.padding - kh) / l.stride + 1;
    const std::size_t ow = (x.w() + 2 * l.padding - kw) / l.stride + 1;
    Tensor4<R> y(x.n(), k.n(), oh, ow);
    for (std::size_t b = 0; b < x.n(); ++b)
        for (std::size_t oc = 0; oc < k.n(); ++oc) {
            const R bias = l.b(0, oc);
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    R s = bias;
                    for (std::size_t ic = 0; ic < x.c(); ++ic)
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                                static_cast<std::ptrdiff_t>(l.padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.h())) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                                    static_cast<std::ptrdiff_t>(l.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.w())) continue;
                                s += x(b, ic, static_cast<std::size_t>(iy),
                                       static_cast<std::size_t>(ix)) *
                                     k(oc, ic, ky, kx);
                            }
                        }
                    y(b, oc, oy, ox) = s;
                }
        }
    return y;
}

template <std::floating_point R>
Tensor4<R> batchnorm_fwd(const Tensor4<R>& x, const BatchNormL<R>& l) {
    if (l.gamma.cols() != x.c()) throw ShapeError("batchnorm_fwd: channel mismatch");
    Tensor4<R> y(x.n(), x.c(), x.h(), x.w());
    for (std::size_t c = 0; c < x.c(); ++c) {
        const R denom = std::sqrt(l.sigma(0, c) * l.sigma(0, c) + l.eps);
        const R scale = l.gamma(0, c) / denom;
        const R shift = l.beta(0, c) - l.mu(0, c) * scale;
        for (std::size_t b = 0; b < x.n(); ++b)
            for (std::size_t yy = 0; yy < x.h(); ++yy)
                for (std::size_t xx = 0; xx < x.w(); ++xx)
                    y(b, c, yy, xx) = x(b, c, yy, xx) * scale + shift;
    }
    return y;
}

/// Folds frozen batch-norm statistics into the preceding convolution:
/// scale_c = gamma_c / sqrt(sigma_c^2 + eps), kernel rows scale per output
/// channel, bias becomes beta + (b_conv - mu) * scale.
template <std::floating_point R>
ConvL<R> bn_fuse(const ConvL<R>& conv, const BatchNormL<R>& bn) {
    if (bn.gamma.cols() != conv.kernels.n())
        throw ShapeError("bn_fuse: channel count mismatch");
    ConvL<R> out = conv;
    for (std::size_t oc = 0; oc < conv.kernels.n(); ++oc) {
        const R denom = std::sqrt(bn.sigma(0, oc) * bn.sigma(0, oc) + bn.eps);
        const R scale = bn.gamma(0, oc) / denom;
        for (std::size_t ic = 0; ic < conv.kernels.c(); ++ic)
            for (std::size_t ky = 0; ky < conv.kernels.h(); ++ky)
                for (std::size_t kx = 0; kx < conv.kernels.w(); ++kx)
                    out.kernels(oc, ic, ky, kx) = conv.kernels(oc, ic, ky, kx) * scale;
        out.b(0, oc) = bn.beta(0, oc) + (conv.b(0, oc) - bn.mu(0, oc)) * scale;
    }
    return out;
}

template <std::floating_point R>
Tensor4<R> avgpool_fwd(const Tensor4<R>& x, std::size_t k) {
    if (k == 0 || x.h() % k != 0 || x.w() % k != 0)
        throw ShapeError("avgpool_fwd: spatial dims not divisible by window");
    const std::size_t oh = x.h() / k, ow = x.w() / k;
    Tensor4<R> y(x.n(), x.c(), oh, ow);
    const R inv = R(1) / static_cast<R>(k * k);
    for (std::size_t b = 0; b < x.n(); ++b)
        for (std::size_t c = 0; c < x.c(); ++c)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    R s = R(0);
                    for (std::size_t dy = 0; dy < k; ++dy)
                        for (std::size_t dx = 0; dx < k; ++dx)
                            s += x(b, c, oy * k + dy, ox * k + dx);
                    y(b, c, oy, ox) = s * inv;
                }
    return y;
}

template <std::floating_point R>
Mat<R> flatten_fwd(const Tensor4<R>& x) {
    return x.flatten();
}

template <std::floating_point R>
Mat<R> mha_fwd(const Mat<R>& x, const MhaL<R>& l) {
    const std::size_t dm = l.wq.rows();
    if (x.cols() != dm) throw ShapeError("mha_fwd: input width != d_model");
    if (l.heads == 0 || dm % l.heads != 0)
        throw ShapeError("mha_fwd: d_model not divisible by head count");
    const std::size_t d = dm / l.heads;
    const Mat<R> q = matmul(x, l.wq);
    const Mat<R> k = matmul(x, l.wk);
    const Mat<R> v = matmul(x, l.wv);
    const R scale = R(1) / std::sqrt(static_cast<R>(d));
    Mat<R> concat(x.rows(), dm);
    for (std::size_t hindex = 0; hindex < l.heads; ++hindex) {
        const std::size_t off = hindex * d;
        // scores = Q_i K_i^T / sqrt(d), then row softmax, then * V_i
        Mat<R> scores(x.rows(), x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.rows(); ++j) {
                R s = R(0);
                for (std::size_t t = 0; t < d; ++t) s += q(i, off + t) * k(j, off + t);
                scores(i, j) = s * scale;
            }
        const Mat<R> attn = softmax_rows(scores);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t t = 0; t < d; ++t) {
                R s = R(0);
                for (std::size_t j = 0; j < x.rows(); ++j) s += attn(i, j) * v(j, off + t);
                concat(i, off + t) = s;
            }
    }
    return matmul(concat, l.wo);
}

template <std::floating_point R>
Mat<R> layernorm_fwd(const Mat<R>& x, const LayerNormL<R>& l) {
    if (x.cols() != l.gamma.cols()) throw ShapeError("layernorm_fwd: width mismatch");
    Mat<R> y = norm_rows(x, l.eps);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j)
            y(i, j) = y(i, j) * l.gamma(0, j) + l.beta(0, j);
    return y;
}

// ---------------------------------------------------------------------------
// Shape inference and whole-model forward
// ---------------------------------------------------------------------------

namespace detail {

template <std::floating_point R>
ActShape block_out_shape(const Block<R>& blk, const ActShape& in,
                         const std::vector<ActShape>& history, const ActShape& input_shape) {
    return std::visit(
        [&](const auto& l) -> ActShape {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseL<R>>) {
                const auto& s = std::get<MatShape>(in);
                if (s.cols != l.w.cols()) throw ShapeError("dense fan-in mismatch");
                return MatShape{s.rows, l.w.rows()};
            } else if constexpr (std::is_same_v<T, ConvL<R>>) {
                const auto& s = std::get<T4Shape>(in);
                if (s.c != l.kernels.c()) throw ShapeError("conv channel mismatch");
                if (s.h + 2 * l.padding < l.kernels.h() || s.w + 2 * l.padding < l.kernels.w())
                    throw ShapeError("conv spatial underflow");
                return T4Shape{s.n, l.kernels.n(),
                               (s.h + 2 * l.padding - l.kernels.h()) / l.stride + 1,
                               (s.w + 2 * l.padding - l.kernels.w()) / l.stride + 1};
            } else if constexpr (std::is_same_v<T, BatchNormL<R>>) {
                const auto& s = std::get<T4Shape>(in);
                if (s.c != static_cast<std::size_t>(l.gamma.cols()))
                    throw ShapeError("batchnorm channel mismatch");
                return in;
            } else if constexpr (std::is_same_v<T, AvgPoolL>) {
                const auto& s = std::get<T4Shape>(in);
                if (l.k == 0 || s.h % l.k != 0 || s.w % l.k != 0)
                    throw ShapeError("avgpool divisibility violation");
                return T4Shape{s.n, s.c, s.h / l.k, s.w / l.k};
            } else if constexpr (std::is_same_v<T, FlattenL>) {
                const auto& s = std::get<T4Shape>(in);
                return MatShape{s.n, s.c * s.h * s.w};
            } else if constexpr (std::is_same_v<T, ReluL> || std::is_same_v<T, GeluL>) {
                return in;
            } else if constexpr (std::is_same_v<T, MhaL<R>>) {
                const auto& s = std::get<MatShape>(in);
                if (s.cols != l.wq.rows()) throw ShapeError("mha width mismatch");
                if (l.heads == 0 || l.wq.rows() % l.heads != 0)
                    throw ShapeError("mha head divisibility");
                return in;
            } else if constexpr (std::is_same_v<T, LayerNormL<R>>) {
                const auto& s = std::get<MatShape>(in);
                if (s.cols != static_cast<std::size_t>(l.gamma.cols()))
                    throw ShapeError("layernorm width mismatch");
                return in;
            } else {  // ResidualAdd
                const ActShape& other = (l.src == ResidualAdd::kFromInput)
                                            ? input_shape
                                            : history.at(l.src);
                if (!(other == in)) throw ShapeError("residual endpoints differ in shape");
                return in;
            }
        },
        blk);
}

}  // namespace detail

/// Output shape after every block; throws ShapeError (with block index) on
/// any incompatibility. Also the shape audit used by the generators.
template <std::floating_point R>
std::vector<ActShape> infer_shapes(const PlainModel<R>& m) {
    std::vector<ActShape> out;
    out.reserve(m.blocks.size());
    ActShape cur = m.input_shape;
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        try {
            cur = detail::block_out_shape<R>(m.blocks[i], cur, out, m.input_shape);
        } catch (const std::bad_variant_access&) {
            throw ShapeError("block " + std::to_string(i) + " (" +
                             kind_name(kind_of(m.blocks[i])) + "): wrong activation rank");
        } catch (const Error& e) {
            throw ShapeError("block " + std::to_string(i) + ": " + e.what());
        }
        out.push_back(cur);
    }
    return out;
}

/// Unprotected forward pass; the correctness oracle for the masked runtime.
/// Residual markers add the recorded earlier activation.
template <std::floating_point R>
Act<R> model_fwd(const PlainModel<R>& m, const Act<R>& input) {
    std::vector<Act<R>> acts;
    acts.reserve(m.blocks.size());
    Act<R> cur = input;
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        try {
            cur = std::visit(
                [&](const auto& l) -> Act<R> {
                    using T = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<T, DenseL<R>>)
                        return dense_fwd(std::get<Mat<R>>(cur), l);
                    else if constexpr (std::is_same_v<T, ConvL<R>>)
                        return conv_fwd(std::get<Tensor4<R>>(cur), l);
                    else if constexpr (std::is_same_v<T, BatchNormL<R>>)
                        return batchnorm_fwd(std::get<Tensor4<R>>(cur), l);
                    else if constexpr (std::is_same_v<T, AvgPoolL>)
                        return avgpool_fwd(std::get<Tensor4<R>>(cur), l.k);
                    else if constexpr (std::is_same_v<T, FlattenL>)
                        return flatten_fwd(std::get<Tensor4<R>>(cur));
                    else if constexpr (std::is_same_v<T, ReluL>)
                        return std::visit([](const auto& a) -> Act<R> { return relu_fwd(a); },
                                          cur);
                    else if constexpr (std::is_same_v<T, GeluL>)
                        return std::visit([](const auto& a) -> Act<R> { return gelu_fwd(a); },
                                          cur);
                    else if constexpr (std::is_same_v<T, MhaL<R>>)
                        return mha_fwd(std::get<Mat<R>>(cur), l);
                    else if constexpr (std::is_same_v<T, LayerNormL<R>>)
                        return layernorm_fwd(std::get<Mat<R>>(cur), l);
                    else {  // ResidualAdd
                        const Act<R>& other =
                            (l.src == ResidualAdd::kFromInput) ? input : acts.at(l.src);
                        if (std::holds_alternative<Mat<R>>(cur))
                            return std::get<Mat<R>>(cur) + std::get<Mat<R>>(other);
                        return std::get<Tensor4<R>>(cur) + std::get<Tensor4<R>>(other);
                    }
                },
                m.blocks[i]);
        } catch (const std::bad_variant_access&) {
            throw ShapeError("block " + std::to_string(i) + " (" +
                             kind_name(kind_of(m.blocks[i])) + "): wrong activation rank");
        } catch (const Error& e) {
            throw Error("block " + std::to_string(i) + " (" +
                        kind_name(kind_of(m.blocks[i])) + "): " + e.what());
        }
        acts.push_back(cur);
    }
    return cur;
}

/// Replaces every conv+batchnorm pair with the fused convolution. The fused
/// model computes the same function; the obfuscator requires this form.
template <std::floating_point R>
PlainModel<R> fuse_batchnorm(const PlainModel<R>& m) {
    PlainModel<R> out;
    out.input_shape = m.input_shape;
    // Old block index -> new index, for residual source remapping.
    std::vector<std::size_t> remap(m.blocks.size());
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        if (std::holds_alternative<BatchNormL<R>>(m.blocks[i])) {
            if (out.blocks.empty() || !std::holds_alternative<ConvL<R>>(out.blocks.back()))
                throw Error("fuse_batchnorm: batchnorm at block " + std::to_string(i) +
                            " is not preceded by a convolution");
            out.blocks.back() = bn_fuse(std::get<ConvL<R>>(out.blocks.back()),
                                        std::get<BatchNormL<R>>(m.blocks[i]));
            remap[i] = out.blocks.size() - 1;
            continue;
        }
        Block<R> blk = m.blocks[i];
        if (auto* res = std::get_if<ResidualAdd>(&blk)) {
            if (res->src != ResidualAdd::kFromInput) res->src = remap.at(res->src);
        }
        out.blocks.push_back(std::move(blk));
        remap[i] = out.blocks.size() - 1;
    }
    return out;
}

}  // namespace veil
