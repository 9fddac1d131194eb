#pragma once

#include "toflow/flownet.hpp"

namespace toflow {

// Conv stack without normalization, per-layer kernel size and optional
// ReLU. All heads share this shape; the final layer is always plain so
// residuals can be negative.
template <typename T>
struct HeadStack {
    std::vector<ConvBlock<T>> layers;
    std::vector<bool> relu_after;

    struct LayerSpec {
        int channels;
        int kernel;
        bool relu;
    };

    static HeadStack make(int cin, const std::vector<LayerSpec>& specs, bool zero_init_last,
                          std::mt19937& rng) {
        HeadStack s;
        int prev = cin;
        for (size_t i = 0; i < specs.size(); ++i) {
            bool zero = zero_init_last && i + 1 == specs.size();
            s.layers.push_back(
                make_conv_block<T>(specs[i].channels, prev, specs[i].kernel, false, zero, rng));
            s.relu_after.push_back(specs[i].relu);
            prev = specs[i].channels;
        }
        return s;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (size_t i = 0; i < layers.size(); ++i) {
            h = conv2d_same(h, layers[i].weight, layers[i].bias);
            if (relu_after[i]) h = relu(h);
        }
        return h;
    }

    void register_params(ParamSet<T>& ps, const std::string& prefix) {
        for (size_t i = 0; i < layers.size(); ++i)
            register_conv_block(ps, prefix + ".conv" + std::to_string(i), layers[i]);
    }

    int in_channels() const { return layers.empty() ? 0 : layers[0].weight.dim(1); }
};

// Interpolation head: analytic average of the two warped frames plus a
// learned residual (9x9, 1x1, 1x1 convs; 64, 64, 3 channels).
template <typename T>
HeadStack<T> make_interp_head(bool use_mask, std::mt19937& rng, int frame_channels = 3) {
    int cin = (use_mask ? 4 : 2) * frame_channels;
    return HeadStack<T>::make(cin,
                              {{64, 9, true}, {64, 1, true}, {frame_channels, 1, false}},
                              /*zero_init_last=*/true, rng);
}

template <typename T>
Tensor<T> interp_head(const Tensor<T>& i21, const Tensor<T>& i23, const Tensor<T>* i21p,
                      const Tensor<T>* i23p, const HeadStack<T>& head, bool use_mask) {
    if (use_mask != (i21p != nullptr && i23p != nullptr))
        throw ConfigError(use_mask ? "interp_head: use_mask set but masked frames missing"
                                   : "interp_head: masked frames supplied with use_mask=false");
    auto avg = scale(add(i21, i23), T(0.5));
    Tensor<T> x = use_mask ? concat_channels<T>({i21, i23, *i21p, *i23p})
                           : concat_channels<T>({i21, i23});
    return add(avg, head.forward(x));
}

// Denoising head: same three-conv stack, direct prediction (no residual).
template <typename T>
HeadStack<T> make_denoise_head(int n_frames, std::mt19937& rng, int frame_channels = 3) {
    return HeadStack<T>::make(n_frames * frame_channels,
                              {{64, 9, true}, {64, 1, true}, {frame_channels, 1, false}},
                              /*zero_init_last=*/false, rng);
}

template <typename T>
Tensor<T> denoise_head(const std::vector<Tensor<T>>& registered, const HeadStack<T>& head) {
    auto x = concat_channels(registered);
    check(x.dim(0) == head.in_channels(),
          "denoise_head: stack has " + std::to_string(x.dim(0)) + " channels, head expects " +
              std::to_string(head.in_channels()));
    return head.forward(x);
}

// Super-resolution head: 9x9, 9x9, 1x1, 1x1 convs (64, 64, 64, 3), the
// bicubic-upsampled reference added back as a global residual.
template <typename T>
HeadStack<T> make_sr_head(int n_frames, std::mt19937& rng, int frame_channels = 3) {
    return HeadStack<T>::make(
        n_frames * frame_channels,
        {{64, 9, true}, {64, 9, true}, {64, 1, true}, {frame_channels, 1, false}},
        /*zero_init_last=*/true, rng);
}

template <typename T>
Tensor<T> sr_head(const std::vector<Tensor<T>>& registered_upsampled, int ref_index,
                  const HeadStack<T>& head) {
    auto x = concat_channels(registered_upsampled);
    check(x.dim(0) == head.in_channels(),
          "sr_head: stack has " + std::to_string(x.dim(0)) + " channels, head expects " +
              std::to_string(head.in_channels()));
    return add(registered_upsampled[static_cast<size_t>(ref_index)], head.forward(x));
}

namespace detail {

inline double keys_cubic(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
    if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
    return 0;
}

struct ResampleTap {
    std::vector<int> idx;
    std::vector<double> wgt;
};

// MATLAB-imresize-style taps: half-pixel centers, Keys kernel (a = -0.5),
// kernel width scaled by the ratio when downscaling (antialias prefilter),
// weights normalized, indices clamped at the border.
inline std::vector<ResampleTap> bicubic_taps(int in, int out) {
    std::vector<ResampleTap> taps(static_cast<size_t>(out));
    double ratio = static_cast<double>(in) / out;
    double kscale = std::max(1.0, ratio);
    int support = static_cast<int>(std::ceil(2 * kscale));
    for (int i = 0; i < out; ++i) {
        double src = (i + 0.5) * ratio - 0.5;
        int lo = static_cast<int>(std::floor(src)) - support + 1;
        double wsum = 0;
        ResampleTap t;
        for (int j = lo; j <= lo + 2 * support - 1; ++j) {
            double wv = keys_cubic((src - j) / kscale) / kscale;
            if (wv == 0) continue;
            t.idx.push_back(std::clamp(j, 0, in - 1));
            t.wgt.push_back(wv);
            wsum += wv;
        }
        for (auto& wv : t.wgt) wv /= wsum;
        taps[i] = std::move(t);
    }
    return taps;
}

}  // namespace detail

// Separable bicubic resize (Keys a = -0.5, antialiased when downscaling).
// Pure resampling of values, no autodiff history.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, double factor) {
    check(x.rank() == 3, "bicubic_resize: expected CxHxW");
    if (factor <= 0) throw ConfigError("bicubic_resize: factor must be positive");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    int oh = static_cast<int>(std::llround(h * factor));
    int ow = static_cast<int>(std::llround(w * factor));
    if (oh < 1 || ow < 1) throw ConfigError("bicubic_resize: degenerate output size");
    auto tx = detail::bicubic_taps(w, ow);
    auto ty = detail::bicubic_taps(h, oh);

    // horizontal pass
    std::vector<double> tmp(static_cast<size_t>(c) * h * ow);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            const T* row = x.data().data() + (static_cast<size_t>(ch) * h + y) * w;
            double* orow = tmp.data() + (static_cast<size_t>(ch) * h + y) * ow;
            for (int xo = 0; xo < ow; ++xo) {
                const auto& t = tx[xo];
                double acc = 0;
                for (size_t k = 0; k < t.idx.size(); ++k) acc += t.wgt[k] * row[t.idx[k]];
                orow[xo] = acc;
            }
        }
    // vertical pass
    std::vector<T> out(static_cast<size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch)
        for (int xo = 0; xo < ow; ++xo)
            for (int yo = 0; yo < oh; ++yo) {
                const auto& t = ty[yo];
                double acc = 0;
                for (size_t k = 0; k < t.idx.size(); ++k)
                    acc += t.wgt[k] * tmp[(static_cast<size_t>(ch) * h + t.idx[k]) * ow + xo];
                out[(static_cast<size_t>(ch) * oh + yo) * ow + xo] = static_cast<T>(acc);
            }
    return Tensor<T>::from_data({c, oh, ow}, std::move(out));
}

}  // namespace toflow
