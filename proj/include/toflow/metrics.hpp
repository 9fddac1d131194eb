#pragma once

#include "toflow/tensor.hpp"

namespace toflow {

inline constexpr double kPsnrCap = 99.0;  // reported for identical images

// PSNR in dB over all channels jointly, peak = 1.0.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(),
          "psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double mse = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// PSNR restricted to pixels where the 1xHxW selector equals `select`
// (e.g. select = 0 evaluates only occluded pixels).
template <typename T>
double psnr_subset(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& selector, T select) {
    check(a.shape() == b.shape(), "psnr_subset: shape mismatch");
    check(selector.rank() == 3 && selector.dim(0) == 1 && selector.dim(1) == a.dim(1) &&
              selector.dim(2) == a.dim(2),
          "psnr_subset: selector must be 1xHxW matching the images");
    size_t plane = static_cast<size_t>(a.dim(1)) * a.dim(2);
    double mse = 0;
    int64_t count = 0;
    for (size_t i = 0; i < plane; ++i) {
        if (selector.data()[i] != select) continue;
        for (int ch = 0; ch < a.dim(0); ++ch) {
            double d = static_cast<double>(a.data()[ch * plane + i]) -
                       static_cast<double>(b.data()[ch * plane + i]);
            mse += d * d;
            ++count;
        }
    }
    if (count == 0) throw ConfigError("psnr_subset: selector matches no pixels");
    mse /= static_cast<double>(count);
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

// Rec. 601 luma from an RGB CxHxW image; grayscale passes through.
template <typename T>
std::vector<double> to_luma(const Tensor<T>& img) {
    check(img.rank() == 3, "ssim: expected CxHxW");
    size_t plane = static_cast<size_t>(img.dim(1)) * img.dim(2);
    std::vector<double> y(plane);
    if (img.dim(0) == 3) {
        const T* r = img.data().data();
        const T* g = r + plane;
        const T* b = g + plane;
        for (size_t i = 0; i < plane; ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    } else if (img.dim(0) == 1) {
        for (size_t i = 0; i < plane; ++i) y[i] = img.data()[i];
    } else {
        throw ShapeError("ssim: expected 1 or 3 channels, got " + std::to_string(img.dim(0)));
    }
    return y;
}

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        constexpr int n = 11;
        constexpr double sigma = 1.5;
        std::vector<double> g(n * n);
        double sum = 0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double dy = y - 5, dx = x - 5;
                g[y * n + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
                sum += g[y * n + x];
            }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return w;
}

}  // namespace detail

// Mean SSIM over valid (fully inside) 11x11 Gaussian windows, sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1.0. RGB images are compared on
// Rec. 601 luma.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(),
          "ssim: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    int h = a.dim(1), w = a.dim(2);
    constexpr int win = 11;
    check(h >= win && w >= win, "ssim: image smaller than the 11x11 window");
    auto ya = detail::to_luma(a);
    auto yb = detail::to_luma(b);
    const auto& g = detail::ssim_window();
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    int64_t count = 0;
    for (int y = 0; y + win <= h; ++y)
        for (int x = 0; x + win <= w; ++x) {
            double mua = 0, mub = 0, vaa = 0, vbb = 0, vab = 0;
            for (int wy = 0; wy < win; ++wy)
                for (int wx = 0; wx < win; ++wx) {
                    double gv = g[wy * win + wx];
                    double pa = ya[(y + wy) * w + (x + wx)];
                    double pb = yb[(y + wy) * w + (x + wx)];
                    mua += gv * pa;
                    mub += gv * pb;
                    vaa += gv * pa * pa;
                    vbb += gv * pb * pb;
                    vab += gv * pa * pb;
                }
            vaa -= mua * mua;
            vbb -= mub * mub;
            vab -= mua * mub;
            total += ((2 * mua * mub + c1) * (2 * vab + c2)) /
                     ((mua * mua + mub * mub + c1) * (vaa + vbb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

}  // namespace toflow
