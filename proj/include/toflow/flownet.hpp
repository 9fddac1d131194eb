#pragma once

#include "toflow/conv.hpp"
#include "toflow/ops.hpp"
#include "toflow/params.hpp"
#include "toflow/warp.hpp"

namespace toflow {

// Coarse-to-fine pyramid flow estimator. Each pyramid level runs an
// independent 5-layer conv sub-network that refines the upsampled flow
// from the level below (residual prediction: zero-initialized final
// layers make the whole network emit the zero field).
struct FlowNetConfig {
    int levels = 4;
    int frame_channels = 3;
    int kernel = 7;
    std::vector<int> hidden = {32, 64, 32, 16};  // final layer emits 2 flow channels
    bool prewarp = true;  // warp the non-reference frame by the upsampled flow

    int subnet_in_channels() const { return 2 * frame_channels + 2; }
    int pad_multiple() const { return 1 << (levels - 1); }
};

template <typename T>
struct ConvBlock {
    Tensor<T> weight, bias;
    Tensor<T> gamma, beta;  // defined only for normalized layers
    bool normalized = false;
};

template <typename T>
ConvBlock<T> make_conv_block(int cout, int cin, int k, bool normalized, bool zero_init,
                             std::mt19937& rng) {
    ConvBlock<T> b;
    b.weight = zero_init ? Tensor<T>::zeros({cout, cin, k, k}) : init_conv_weight<T>(cout, cin, k, k, rng);
    b.bias = Tensor<T>::zeros({cout});
    b.normalized = normalized;
    if (normalized) {
        b.gamma = Tensor<T>::filled({cout}, T(1));
        b.beta = Tensor<T>::zeros({cout});
    }
    return b;
}

template <typename T>
Tensor<T> apply_conv_block(const Tensor<T>& x, const ConvBlock<T>& b) {
    auto y = conv2d_same(x, b.weight, b.bias);
    if (b.normalized) y = relu(spatial_norm(y, b.gamma, b.beta));
    return y;
}

template <typename T>
void register_conv_block(ParamSet<T>& ps, const std::string& prefix, ConvBlock<T>& b) {
    ps.add(prefix + ".weight", b.weight);
    ps.add(prefix + ".bias", b.bias);
    if (b.normalized) {
        ps.add(prefix + ".gamma", b.gamma);
        ps.add(prefix + ".beta", b.beta);
    }
}

// One 5-layer sub-network stack: hidden convs are norm+ReLU, the final
// conv is plain so outputs can be negative.
template <typename T>
struct ConvStack {
    std::vector<ConvBlock<T>> layers;

    static ConvStack make(int cin, const std::vector<int>& hidden, int cout, int k,
                          bool zero_init_last, std::mt19937& rng) {
        ConvStack s;
        int prev = cin;
        for (int hc : hidden) {
            s.layers.push_back(make_conv_block<T>(hc, prev, k, true, false, rng));
            prev = hc;
        }
        s.layers.push_back(make_conv_block<T>(cout, prev, k, false, zero_init_last, rng));
        return s;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (const auto& l : layers) h = apply_conv_block(h, l);
        return h;
    }

    void register_params(ParamSet<T>& ps, const std::string& prefix) {
        for (size_t i = 0; i < layers.size(); ++i)
            register_conv_block(ps, prefix + ".conv" + std::to_string(i), layers[i]);
    }
};

template <typename T>
struct FlowNetParams {
    FlowNetConfig cfg;
    std::vector<ConvStack<T>> levels;  // coarsest first

    static FlowNetParams init(const FlowNetConfig& cfg, std::mt19937& rng) {
        FlowNetParams p;
        p.cfg = cfg;
        for (int l = 0; l < cfg.levels; ++l)
            p.levels.push_back(ConvStack<T>::make(cfg.subnet_in_channels(), cfg.hidden, 2,
                                                  cfg.kernel, /*zero_init_last=*/true, rng));
        return p;
    }

    void register_params(ParamSet<T>& ps, const std::string& prefix) {
        for (size_t l = 0; l < levels.size(); ++l)
            levels[l].register_params(ps, prefix + ".level" + std::to_string(l));
    }
};

// Edge-replicating pad so both extents become multiples of m. Returns the
// padded tensor; original content sits at offset (0, 0).
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, int m) {
    check(x.rank() == 3, "pad_to_multiple: expected CxHxW");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    int nh = (h + m - 1) / m * m, nw = (w + m - 1) / m * m;
    if (nh == h && nw == w) return x;
    std::vector<T> out(static_cast<size_t>(c) * nh * nw);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < nh; ++y) {
            int sy = std::min(y, h - 1);
            for (int xx = 0; xx < nw; ++xx)
                out[(static_cast<size_t>(ch) * nh + y) * nw + xx] =
                    x.data()[(static_cast<size_t>(ch) * h + sy) * w + std::min(xx, w - 1)];
        }
    auto xn = x.node();
    return detail::make_result<T>(
        {c, nh, nw}, std::move(out), {xn}, [xn, c, h, w, nh, nw](Node<T>& n) {
            xn->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < nh; ++y) {
                    int sy = std::min(y, h - 1);
                    for (int xx = 0; xx < nw; ++xx)
                        xn->grad[(static_cast<size_t>(ch) * h + sy) * w + std::min(xx, w - 1)] +=
                            n.grad[(static_cast<size_t>(ch) * nh + y) * nw + xx];
                }
        });
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int h, int w) {
    check(x.rank() == 3 && x.dim(1) >= h && x.dim(2) >= w, "crop: target exceeds extents");
    int c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    if (ih == h && iw == w) return x;
    std::vector<T> out(static_cast<size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                out[(static_cast<size_t>(ch) * h + y) * w + xx] =
                    x.data()[(static_cast<size_t>(ch) * ih + y) * iw + xx];
    auto xn = x.node();
    return detail::make_result<T>({c, h, w}, std::move(out), {xn}, [xn, c, h, w, ih, iw](Node<T>& n) {
        xn->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    xn->grad[(static_cast<size_t>(ch) * ih + y) * iw + xx] +=
                        n.grad[(static_cast<size_t>(ch) * h + y) * w + xx];
    });
}

namespace detail {

// Separable binomial blur [1,4,6,4,1]/16 with edge replication.
template <typename T>
std::vector<T> binomial_blur(const T* src, int c, int h, int w) {
    static constexpr double K[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    std::vector<T> tmp(static_cast<size_t>(c) * h * w), out(static_cast<size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch) {
        const T* p = src + static_cast<size_t>(ch) * h * w;
        T* t = tmp.data() + static_cast<size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0;
                for (int k = -2; k <= 2; ++k)
                    acc += K[k + 2] * p[y * w + std::clamp(x + k, 0, w - 1)];
                t[y * w + x] = static_cast<T>(acc);
            }
        T* o = out.data() + static_cast<size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0;
                for (int k = -2; k <= 2; ++k)
                    acc += K[k + 2] * t[std::clamp(y + k, 0, h - 1) * w + x];
                o[y * w + x] = static_cast<T>(acc);
            }
    }
    return out;
}

}  // namespace detail

// Blur-and-subsample image pyramid, coarsest level first. Levels carry no
// autodiff history (frames are network inputs, never parameters).
template <typename T>
std::vector<Tensor<T>> gaussian_pyramid(const Tensor<T>& frame, int levels) {
    if (levels < 1) throw ConfigError("gaussian_pyramid: levels must be >= 1");
    check(frame.rank() == 3, "gaussian_pyramid: expected CxHxW frame");
    int m = 1 << (levels - 1);
    check(frame.dim(1) % m == 0 && frame.dim(2) % m == 0,
          "gaussian_pyramid: extents " + shape_str(frame.shape()) +
              " not divisible by 2^(levels-1) = " + std::to_string(m));
    std::vector<Tensor<T>> pyr(static_cast<size_t>(levels));
    pyr[levels - 1] = frame.detach();
    for (int l = levels - 2; l >= 0; --l) {
        const auto& fine = pyr[l + 1];
        int c = fine.dim(0), h = fine.dim(1), w = fine.dim(2);
        auto blurred = detail::binomial_blur(fine.data().data(), c, h, w);
        int oh = h / 2, ow = w / 2;
        std::vector<T> sub(static_cast<size_t>(c) * oh * ow);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    sub[(static_cast<size_t>(ch) * oh + y) * ow + x] =
                        blurred[(static_cast<size_t>(ch) * h + 2 * y) * w + 2 * x];
        pyr[l] = Tensor<T>::from_data({c, oh, ow}, std::move(sub));
    }
    return pyr;
}

// One refinement step: residual on top of the upsampled coarse flow.
template <typename T>
Tensor<T> flow_subnet(const Tensor<T>& ref_level, const Tensor<T>& other_level,
                      const Tensor<T>& up_flow, const ConvStack<T>& subnet, bool prewarp = true) {
    check(ref_level.dim(1) == other_level.dim(1) && ref_level.dim(2) == other_level.dim(2) &&
              ref_level.dim(1) == up_flow.dim(1) && ref_level.dim(2) == up_flow.dim(2),
          "flow_subnet: extent mismatch between frames and flow");
    Tensor<T> other_in = prewarp ? bilinear_warp(other_level, up_flow) : other_level;
    auto x = concat_channels<T>({ref_level, other_in, up_flow});
    return add(up_flow, subnet.forward(x));
}

// Full coarse-to-fine pass. If per_level is non-null it receives the flow
// estimated at every level (coarsest first), for scale-covariance checks.
template <typename T>
Tensor<T> estimate_flow(const Tensor<T>& ref, const Tensor<T>& other, const FlowNetParams<T>& net,
                        std::vector<Tensor<T>>* per_level = nullptr) {
    check(ref.shape() == other.shape(), "estimate_flow: frames must share extents, got " +
                                            shape_str(ref.shape()) + " vs " +
                                            shape_str(other.shape()));
    auto pyr_ref = gaussian_pyramid(ref, net.cfg.levels);
    auto pyr_other = gaussian_pyramid(other, net.cfg.levels);
    Tensor<T> flow = Tensor<T>::zeros({2, pyr_ref[0].dim(1), pyr_ref[0].dim(2)});
    for (int l = 0; l < net.cfg.levels; ++l) {
        if (l > 0) flow = scale(resize_bilinear(flow, 2.0), T(2));  // pixel units follow resolution
        flow = flow_subnet(pyr_ref[l], pyr_other[l], flow, net.levels[l], net.cfg.prewarp);
        if (per_level) per_level->push_back(flow);
    }
    return flow;
}

// Interpolation variant: two independent networks, both consuming
// (frame1, frame3) in that order, predicting the fields from the missing
// middle frame to frame 1 and frame 3.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> estimate_interp_flows(const Tensor<T>& frame1,
                                                      const Tensor<T>& frame3,
                                                      const FlowNetParams<T>& net21,
                                                      const FlowNetParams<T>& net23) {
    auto v21 = estimate_flow(frame1, frame3, net21);
    auto v23 = estimate_flow(frame1, frame3, net23);
    return {v21, v23};
}

}  // namespace toflow
