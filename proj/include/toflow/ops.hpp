#pragma once

#include "toflow/tensor.hpp"

namespace toflow {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(),
          "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(a.data().begin(), a.data().end());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] += b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::make_result<T>(
        a.shape(), std::move(out), {an, bn}, [an, bn](Node<T>& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
            }
        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(),
          "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(a.data().begin(), a.data().end());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] -= b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::make_result<T>(
        a.shape(), std::move(out), {an, bn}, [an, bn](Node<T>& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
            }
        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(static_cast<size_t>(a.numel()));
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::make_result<T>(
        a.shape(), std::move(out), {an, bn}, [an, bn](Node<T>& n) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->value[i];
            }
        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(static_cast<size_t>(a.numel()));
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] * s;
    auto an = a.node();
    return detail::make_result<T>(a.shape(), std::move(out), {an}, [an, s](Node<T>& n) {
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * s;
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(static_cast<size_t>(x.numel()));
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
    auto xn = x.node();
    return detail::make_result<T>(x.shape(), std::move(out), {xn}, [xn](Node<T>& n) {
        xn->ensure_grad();
        // subgradient at 0 is 0
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (xn->value[i] > T(0)) xn->grad[i] += n.grad[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    std::vector<T> out(static_cast<size_t>(x.numel()));
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
    auto xn = x.node();
    auto res = detail::make_result<T>(x.shape(), std::move(out), {xn}, [xn](Node<T>& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            xn->grad[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
    });
    return res;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.data()) s += v;
    auto xn = x.node();
    return detail::make_result<T>({1}, {s}, {xn}, [xn](Node<T>& n) {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += n.grad[0];
    });
}

// Mean absolute difference; subgradient 0 at ties.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check(pred.shape() == target.shape(), "l1_loss: shape mismatch " + shape_str(pred.shape()) +
                                              " vs " + shape_str(target.shape()));
    T s = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) s += std::abs(pred.data()[i] - target.data()[i]);
    T n_inv = T(1) / static_cast<T>(pred.numel());
    auto pn = pred.node();
    auto tn = target.node();
    return detail::make_result<T>({1}, {s * n_inv}, {pn, tn}, [pn, tn, n_inv](Node<T>& n) {
        for (size_t i = 0; i < pn->value.size(); ++i) {
            T d = pn->value[i] - tn->value[i];
            T g = d > T(0) ? n.grad[0] * n_inv : (d < T(0) ? -n.grad[0] * n_inv : T(0));
            if (pn->requires_grad) {
                pn->ensure_grad();
                pn->grad[i] += g;
            }
            if (tn->requires_grad) {
                tn->ensure_grad();
                tn->grad[i] -= g;
            }
        }
    });
}

// Concatenate C x H x W tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    check(!parts.empty(), "concat_channels: empty input");
    for (const auto& p : parts) check(p.rank() == 3, "concat_channels: expected rank-3 tensors");
    int h = parts[0].dim(1), w = parts[0].dim(2);
    int ctot = 0;
    for (const auto& p : parts) {
        check(p.dim(1) == h && p.dim(2) == w,
              "concat_channels: spatial mismatch " + shape_str(p.shape()));
        ctot += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(static_cast<size_t>(ctot) * h * w);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<std::shared_ptr<Node<T>>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    return detail::make_result<T>(
        {ctot, h, w}, std::move(out), parents, [parents](Node<T>& n) {
            size_t off = 0;
            for (const auto& p : parents) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += n.grad[off + i];
                }
                off += p->value.size();
            }
        });
}

// Channel slice [c0, c0+count) of a C x H x W tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int count) {
    check(x.rank() == 3, "slice_channels: expected rank-3 tensor");
    check(c0 >= 0 && count > 0 && c0 + count <= x.dim(0), "slice_channels: range out of bounds");
    int h = x.dim(1), w = x.dim(2);
    size_t plane = static_cast<size_t>(h) * w;
    std::vector<T> out(x.data().begin() + c0 * plane, x.data().begin() + (c0 + count) * plane);
    auto xn = x.node();
    return detail::make_result<T>({count, h, w}, std::move(out), {xn},
                                  [xn, c0, plane, count](Node<T>& n) {
                                      xn->ensure_grad();
                                      size_t off = c0 * plane;
                                      for (size_t i = 0; i < count * plane; ++i)
                                          xn->grad[off + i] += n.grad[i];
                                  });
}

// Multiply a C x H x W image by a 1 x H x W mask, mask broadcast over channels.
template <typename T>
Tensor<T> mul_mask(const Tensor<T>& image, const Tensor<T>& mask) {
    check(image.rank() == 3 && mask.rank() == 3 && mask.dim(0) == 1, "mul_mask: expected CxHxW image and 1xHxW mask");
    check(image.dim(1) == mask.dim(1) && image.dim(2) == mask.dim(2),
          "mul_mask: spatial mismatch " + shape_str(image.shape()) + " vs " + shape_str(mask.shape()));
    int c = image.dim(0);
    size_t plane = static_cast<size_t>(image.dim(1)) * image.dim(2);
    std::vector<T> out(static_cast<size_t>(image.numel()));
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < plane; ++i)
            out[ch * plane + i] = image.data()[ch * plane + i] * mask.data()[i];
    auto in = image.node();
    auto mn = mask.node();
    return detail::make_result<T>(
        image.shape(), std::move(out), {in, mn}, [in, mn, c, plane](Node<T>& n) {
            if (in->requires_grad) {
                in->ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < plane; ++i)
                        in->grad[ch * plane + i] += n.grad[ch * plane + i] * mn->value[i];
            }
            if (mn->requires_grad) {
                mn->ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < plane; ++i)
                        mn->grad[i] += n.grad[ch * plane + i] * in->value[ch * plane + i];
            }
        });
}

// Per-channel standardization over spatial positions, identical in train
// and eval (batch-size-1 statistics). gamma/beta are per-channel.
template <typename T>
Tensor<T> spatial_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       T epsilon = T(1e-5)) {
    check(x.rank() == 3, "spatial_norm: expected CxHxW input");
    int c = x.dim(0);
    check(gamma.numel() == c && beta.numel() == c,
          "spatial_norm: gamma/beta must have one value per channel");
    size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
    std::vector<T> out(static_cast<size_t>(x.numel()));
    std::vector<T> inv_sigma(static_cast<size_t>(c)), mean(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const T* px = x.data().data() + ch * plane;
        T mu = 0;
        for (size_t i = 0; i < plane; ++i) mu += px[i];
        mu /= static_cast<T>(plane);
        T var = 0;
        for (size_t i = 0; i < plane; ++i) var += (px[i] - mu) * (px[i] - mu);
        var /= static_cast<T>(plane);
        T is = T(1) / std::sqrt(var + epsilon);
        mean[ch] = mu;
        inv_sigma[ch] = is;
        T g = gamma.data()[ch], b = beta.data()[ch];
        for (size_t i = 0; i < plane; ++i) out[ch * plane + i] = (px[i] - mu) * is * g + b;
    }
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    return detail::make_result<T>(
        x.shape(), std::move(out), {xn, gn, bn},
        [xn, gn, bn, c, plane, mean, inv_sigma](Node<T>& n) {
            for (int ch = 0; ch < c; ++ch) {
                const T* px = xn->value.data() + ch * plane;
                const T* gy = n.grad.data() + ch * plane;
                T mu = mean[ch], is = inv_sigma[ch], g = gn->value[ch];
                T sum_gy = 0, sum_gy_xhat = 0;
                for (size_t i = 0; i < plane; ++i) {
                    sum_gy += gy[i];
                    sum_gy_xhat += gy[i] * (px[i] - mu) * is;
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    bn->grad[ch] += sum_gy;
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    gn->grad[ch] += sum_gy_xhat;
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    T inv_n = T(1) / static_cast<T>(plane);
                    for (size_t i = 0; i < plane; ++i) {
                        T xhat = (px[i] - mu) * is;
                        xn->grad[ch * plane + i] +=
                            g * is * (gy[i] - inv_n * sum_gy - xhat * inv_n * sum_gy_xhat);
                    }
                }
            }
        });
}

// Bilinear resize with half-pixel sample centers, clamped at borders.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, double scale) {
    check(x.rank() == 3, "resize_bilinear: expected CxHxW input");
    if (scale <= 0) throw ConfigError("resize_bilinear: scale must be positive");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    int oh = static_cast<int>(std::llround(h * scale));
    int ow = static_cast<int>(std::llround(w * scale));
    if (oh < 1 || ow < 1)
        throw ConfigError("resize_bilinear: zero-sized output for scale " + std::to_string(scale));

    struct Tap {
        int i0, i1;
        T f;
    };
    auto make_taps = [](int in, int out) {
        std::vector<Tap> taps(static_cast<size_t>(out));
        double r = static_cast<double>(in) / out;
        for (int i = 0; i < out; ++i) {
            double src = (i + 0.5) * r - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            int i0 = static_cast<int>(std::floor(src));
            int i1 = std::min(i0 + 1, in - 1);
            taps[i] = {i0, i1, static_cast<T>(src - i0)};
        }
        return taps;
    };
    auto ty = make_taps(h, oh);
    auto tx = make_taps(w, ow);

    std::vector<T> out(static_cast<size_t>(c) * oh * ow);
    const T* src = x.data().data();
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = src + static_cast<size_t>(ch) * h * w;
        T* op = out.data() + static_cast<size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const Tap& py = ty[y];
            for (int xo = 0; xo < ow; ++xo) {
                const Tap& px = tx[xo];
                T v00 = plane[py.i0 * w + px.i0], v01 = plane[py.i0 * w + px.i1];
                T v10 = plane[py.i1 * w + px.i0], v11 = plane[py.i1 * w + px.i1];
                T top = v00 + (v01 - v00) * px.f;
                T bot = v10 + (v11 - v10) * px.f;
                op[y * ow + xo] = top + (bot - top) * py.f;
            }
        }
    }
    auto xn = x.node();
    return detail::make_result<T>(
        {c, oh, ow}, std::move(out), {xn}, [xn, c, h, w, oh, ow, ty, tx](Node<T>& n) {
            xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                T* gin = xn->grad.data() + static_cast<size_t>(ch) * h * w;
                const T* gout = n.grad.data() + static_cast<size_t>(ch) * oh * ow;
                for (int y = 0; y < oh; ++y) {
                    const Tap& py = ty[y];
                    for (int xo = 0; xo < ow; ++xo) {
                        const Tap& px = tx[xo];
                        T g = gout[y * ow + xo];
                        gin[py.i0 * w + px.i0] += g * (1 - py.f) * (1 - px.f);
                        gin[py.i0 * w + px.i1] += g * (1 - py.f) * px.f;
                        gin[py.i1 * w + px.i0] += g * py.f * (1 - px.f);
                        gin[py.i1 * w + px.i1] += g * py.f * px.f;
                    }
                }
            }
        });
}

}  // namespace toflow
