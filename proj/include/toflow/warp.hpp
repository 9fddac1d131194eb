#pragma once

#include "toflow/tensor.hpp"

namespace toflow {

// Backward warp: output(x, y) samples image at (x + u(x,y), y + v(x,y))
// with bilinear interpolation, sample coordinates clamped to the border.
// flow is 2 x H x W (channel 0 = u horizontal, channel 1 = v vertical).
// Differentiable w.r.t. both the image and the flow; the flow gradient
// uses the right-continuous linear piece at integer sample coordinates
// and is zero where the clamp saturates.
template <typename T>
Tensor<T> bilinear_warp(const Tensor<T>& image, const Tensor<T>& flow) {
    check(image.rank() == 3, "bilinear_warp: expected CxHxW image");
    check(flow.rank() == 3 && flow.dim(0) == 2, "bilinear_warp: expected 2xHxW flow");
    int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    check(flow.dim(1) == h && flow.dim(2) == w,
          "bilinear_warp: extent mismatch, image " + shape_str(image.shape()) + " vs flow " +
              shape_str(flow.shape()));
    size_t plane = static_cast<size_t>(h) * w;
    for (T f : flow.data())
        if (!std::isfinite(f)) throw std::invalid_argument("bilinear_warp: non-finite flow value");

    const T* img = image.data().data();
    const T* u = flow.data().data();
    const T* v = u + plane;
    std::vector<T> out(static_cast<size_t>(c) * plane);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t i = static_cast<size_t>(y) * w + x;
            T xs = std::clamp(static_cast<T>(x) + u[i], T(0), static_cast<T>(w - 1));
            T ys = std::clamp(static_cast<T>(y) + v[i], T(0), static_cast<T>(h - 1));
            int x0 = static_cast<int>(std::floor(xs));
            int y0 = static_cast<int>(std::floor(ys));
            int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            T fx = xs - x0, fy = ys - y0;
            for (int ch = 0; ch < c; ++ch) {
                const T* p = img + ch * plane;
                T top = p[y0 * w + x0] + (p[y0 * w + x1] - p[y0 * w + x0]) * fx;
                T bot = p[y1 * w + x0] + (p[y1 * w + x1] - p[y1 * w + x0]) * fx;
                out[ch * plane + i] = top + (bot - top) * fy;
            }
        }
    }
    auto img_n = image.node();
    auto flow_n = flow.node();
    return detail::make_result<T>(
        image.shape(), std::move(out), {img_n, flow_n}, [img_n, flow_n, c, h, w, plane](Node<T>& n) {
            const T* img = img_n->value.data();
            const T* u = flow_n->value.data();
            const T* v = u + plane;
            if (img_n->requires_grad) img_n->ensure_grad();
            if (flow_n->requires_grad) flow_n->ensure_grad();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    size_t i = static_cast<size_t>(y) * w + x;
                    T xs_raw = static_cast<T>(x) + u[i];
                    T ys_raw = static_cast<T>(y) + v[i];
                    T xs = std::clamp(xs_raw, T(0), static_cast<T>(w - 1));
                    T ys = std::clamp(ys_raw, T(0), static_cast<T>(h - 1));
                    bool x_sat = xs_raw <= T(0) || xs_raw >= static_cast<T>(w - 1);
                    bool y_sat = ys_raw <= T(0) || ys_raw >= static_cast<T>(h - 1);
                    int x0 = static_cast<int>(std::floor(xs));
                    int y0 = static_cast<int>(std::floor(ys));
                    int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
                    T fx = xs - x0, fy = ys - y0;
                    for (int ch = 0; ch < c; ++ch) {
                        T g = n.grad[ch * plane + i];
                        if (g == T(0)) continue;
                        const T* p = img + ch * plane;
                        if (img_n->requires_grad) {
                            T* gp = img_n->grad.data() + ch * plane;
                            gp[y0 * w + x0] += g * (1 - fy) * (1 - fx);
                            gp[y0 * w + x1] += g * (1 - fy) * fx;
                            gp[y1 * w + x0] += g * fy * (1 - fx);
                            gp[y1 * w + x1] += g * fy * fx;
                        }
                        if (flow_n->requires_grad) {
                            if (!x_sat) {
                                T dx = (1 - fy) * (p[y0 * w + x1] - p[y0 * w + x0]) +
                                       fy * (p[y1 * w + x1] - p[y1 * w + x0]);
                                flow_n->grad[i] += g * dx;
                            }
                            if (!y_sat) {
                                T dy = (1 - fx) * (p[y1 * w + x0] - p[y0 * w + x0]) +
                                       fx * (p[y1 * w + x1] - p[y0 * w + x1]);
                                flow_n->grad[plane + i] += g * dy;
                            }
                        }
                    }
                }
            }
        });
}

}  // namespace toflow
