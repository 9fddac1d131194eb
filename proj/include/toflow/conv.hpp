#pragma once

#include <Eigen/Core>

#include "toflow/tensor.hpp"

namespace toflow {

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unpack zero-padded kH x kW patches into a (Cin*kH*kW) x (Hout*Wout) matrix.
template <typename T>
void im2col(const T* src, int cin, int h, int w, int kh, int kw, int ph, int pw, int oh, int ow,
            T* col) {
    const size_t p = static_cast<size_t>(oh) * ow;
    for (int ci = 0; ci < cin; ++ci) {
        const T* plane = src + static_cast<size_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                T* row = col + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy - ph + ky;
                    T* dst = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* sp = plane + static_cast<size_t>(iy) * w;
                    int x0 = std::max(0, pw - kx);                // first ox with ix >= 0
                    int x1 = std::min(ow, w + pw - kx);           // first ox with ix >= w
                    std::fill(dst, dst + std::min(x0, ow), T(0));
                    for (int ox = x0; ox < x1; ++ox) dst[ox] = sp[ox - pw + kx];
                    if (x1 < ow) std::fill(dst + std::max(x1, 0), dst + ow, T(0));
                }
            }
        }
    }
}

// Transpose of im2col: scatter-add column rows back into the image grid.
template <typename T>
void col2im(const T* col, int cin, int h, int w, int kh, int kw, int ph, int pw, int oh, int ow,
            T* dst) {
    const size_t p = static_cast<size_t>(oh) * ow;
    for (int ci = 0; ci < cin; ++ci) {
        T* plane = dst + static_cast<size_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const T* row = col + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * p;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy - ph + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* sp = plane + static_cast<size_t>(iy) * w;
                    const T* rp = row + static_cast<size_t>(oy) * ow;
                    int x0 = std::max(0, pw - kx);
                    int x1 = std::min(ow, w + pw - kx);
                    for (int ox = x0; ox < x1; ++ox) sp[ox - pw + kx] += rp[ox];
                }
            }
        }
    }
}

}  // namespace detail

// 2-D convolution with explicit zero padding. weight: Cout x Cin x kH x kW,
// bias: Cout. Differentiable w.r.t. input, weight, and bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int ph,
                 int pw) {
    check(input.rank() == 3, "conv2d: expected CxHxW input, got " + shape_str(input.shape()));
    check(weight.rank() == 4, "conv2d: expected CoutxCinxkHxkW weight, got " + shape_str(weight.shape()));
    int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    int cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    check(weight.dim(1) == cin, "conv2d: input has " + std::to_string(cin) +
                                    " channels but weight expects " + std::to_string(weight.dim(1)));
    check(bias.numel() == cout, "conv2d: bias length must equal output channel count");
    if (ph < 0 || pw < 0) throw ConfigError("conv2d: negative padding");
    int oh = h + 2 * ph - kh + 1;
    int ow = w + 2 * pw - kw + 1;
    check(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");

    const int K = cin * kh * kw;
    const size_t P = static_cast<size_t>(oh) * ow;
    std::vector<T> col(static_cast<size_t>(K) * P);
    detail::im2col(input.data().data(), cin, h, w, kh, kw, ph, pw, oh, ow, col.data());

    std::vector<T> out(static_cast<size_t>(cout) * P);
    {
        Eigen::Map<const detail::MatRM<T>> W(weight.data().data(), cout, K);
        Eigen::Map<const detail::MatRM<T>> C(col.data(), K, static_cast<Eigen::Index>(P));
        Eigen::Map<detail::MatRM<T>> O(out.data(), cout, static_cast<Eigen::Index>(P));
        O.noalias() = W * C;
        for (int co = 0; co < cout; ++co) O.row(co).array() += bias.data()[co];
    }

    auto in_n = input.node();
    auto w_n = weight.node();
    auto b_n = bias.node();
    return detail::make_result<T>(
        {cout, oh, ow}, std::move(out), {in_n, w_n, b_n},
        [in_n, w_n, b_n, cin, h, w, cout, kh, kw, ph, pw, oh, ow, K, P](Node<T>& n) {
            Eigen::Map<const detail::MatRM<T>> G(n.grad.data(), cout, static_cast<Eigen::Index>(P));
            // dW and dInput both need the unpacked input patches again;
            // recomputing trades memory for a second im2col pass.
            if (w_n->requires_grad || b_n->requires_grad) {
                if (b_n->requires_grad) {
                    b_n->ensure_grad();
                    // Fixed-order scalar sum: Eigen's vectorized reduction
                    // rounds differently depending on buffer alignment,
                    // which would make training runs non-reproducible.
                    for (int co = 0; co < cout; ++co) {
                        const T* g = n.grad.data() + static_cast<size_t>(co) * P;
                        T acc = 0;
                        for (size_t i = 0; i < static_cast<size_t>(P); ++i) acc += g[i];
                        b_n->grad[co] += acc;
                    }
                }
                if (w_n->requires_grad) {
                    std::vector<T> col(static_cast<size_t>(K) * P);
                    detail::im2col(in_n->value.data(), cin, h, w, kh, kw, ph, pw, oh, ow,
                                   col.data());
                    w_n->ensure_grad();
                    Eigen::Map<const detail::MatRM<T>> C(col.data(), K,
                                                         static_cast<Eigen::Index>(P));
                    Eigen::Map<detail::MatRM<T>> DW(w_n->grad.data(), cout, K);
                    DW.noalias() += G * C.transpose();
                }
            }
            if (in_n->requires_grad) {
                std::vector<T> dcol(static_cast<size_t>(K) * P);
                Eigen::Map<const detail::MatRM<T>> W(w_n->value.data(), cout, K);
                Eigen::Map<detail::MatRM<T>> DC(dcol.data(), K, static_cast<Eigen::Index>(P));
                DC.noalias() = W.transpose() * G;
                in_n->ensure_grad();
                detail::col2im(dcol.data(), cin, h, w, kh, kw, ph, pw, oh, ow, in_n->grad.data());
            }
        });
}

// Same-padding convolution; requires odd kernel extents.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    check(weight.rank() == 4, "conv2d: expected CoutxCinxkHxkW weight");
    int kh = weight.dim(2), kw = weight.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("conv2d_same: even kernel " + std::to_string(kh) + "x" +
                          std::to_string(kw) + " cannot preserve spatial size");
    return conv2d(input, weight, bias, (kh - 1) / 2, (kw - 1) / 2);
}

}  // namespace toflow
