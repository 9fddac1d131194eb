#pragma once

#include "toflow/flownet.hpp"

namespace toflow {

// Occlusion-mask pyramid. Level 0 (coarsest) sees the two flow fields
// downsampled to that resolution (4 channels); later levels additionally
// see the bilinear-upsampled masks from the level below (6 channels).
// Every level's 2-channel output is squashed to [0,1] with a logistic so
// the multiplicative mask semantics hold at any depth.
struct MaskNetConfig {
    int levels = 4;
    int kernel = 7;
    std::vector<int> hidden = {32, 64, 32, 16};  // final layer emits the 2 masks
};

template <typename T>
struct MaskNetParams {
    MaskNetConfig cfg;
    std::vector<ConvStack<T>> levels;  // coarsest first

    static MaskNetParams init(const MaskNetConfig& cfg, std::mt19937& rng) {
        MaskNetParams p;
        p.cfg = cfg;
        for (int l = 0; l < cfg.levels; ++l) {
            int cin = l == 0 ? 4 : 6;
            p.levels.push_back(
                ConvStack<T>::make(cin, cfg.hidden, 2, cfg.kernel, /*zero_init_last=*/false, rng));
        }
        return p;
    }

    void register_params(ParamSet<T>& ps, const std::string& prefix) {
        for (size_t l = 0; l < levels.size(); ++l)
            levels[l].register_params(ps, prefix + ".level" + std::to_string(l));
    }
};

// Predict (m21, m23) from (v21, v23). Differentiable back to the flows.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> estimate_masks(const Tensor<T>& v21, const Tensor<T>& v23,
                                               const MaskNetParams<T>& net) {
    check(v21.shape() == v23.shape(), "estimate_masks: flows must share extents, got " +
                                          shape_str(v21.shape()) + " vs " +
                                          shape_str(v23.shape()));
    check(v21.rank() == 3 && v21.dim(0) == 2, "estimate_masks: expected 2xHxW flows");
    int levels = net.cfg.levels;
    int m = 1 << (levels - 1);
    check(v21.dim(1) % m == 0 && v21.dim(2) % m == 0,
          "estimate_masks: extents not divisible by 2^(levels-1)");

    Tensor<T> masks;  // 2 x h x w at the current level
    for (int l = 0; l < levels; ++l) {
        double down = 1.0 / (1 << (levels - 1 - l));
        // flows at this resolution, values rescaled with the grid
        auto f21 = l == levels - 1 ? v21 : scale(resize_bilinear(v21, down), static_cast<T>(down));
        auto f23 = l == levels - 1 ? v23 : scale(resize_bilinear(v23, down), static_cast<T>(down));
        Tensor<T> x;
        if (l == 0) {
            x = concat_channels<T>({f21, f23});
        } else {
            x = concat_channels<T>({f21, f23, resize_bilinear(masks, 2.0)});
        }
        masks = sigmoid(net.levels[l].forward(x));
    }
    return {slice_channels(masks, 0, 1), slice_channels(masks, 1, 1)};
}

// Forward-backward consistency oracle: a pixel of the warped frame is
// valid iff following fwd then bwd flow returns within 0.5 px. Flows are
// sampled with bilinear interpolation at the displaced position.
template <typename T>
Tensor<T> occlusion_oracle(const Tensor<T>& flow_fwd, const Tensor<T>& flow_bwd,
                           T threshold = T(0.5)) {
    check(flow_fwd.shape() == flow_bwd.shape(), "occlusion_oracle: flow shape mismatch");
    check(flow_fwd.rank() == 3 && flow_fwd.dim(0) == 2, "occlusion_oracle: expected 2xHxW flows");
    int h = flow_fwd.dim(1), w = flow_fwd.dim(2);
    size_t plane = static_cast<size_t>(h) * w;
    const T* fu = flow_fwd.data().data();
    const T* fv = fu + plane;
    auto bwd_at = [&](T xs, T ys, int ch) {
        xs = std::clamp(xs, T(0), static_cast<T>(w - 1));
        ys = std::clamp(ys, T(0), static_cast<T>(h - 1));
        int x0 = static_cast<int>(std::floor(xs)), y0 = static_cast<int>(std::floor(ys));
        int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        T fx = xs - x0, fy = ys - y0;
        const T* p = flow_bwd.data().data() + ch * plane;
        T top = p[y0 * w + x0] + (p[y0 * w + x1] - p[y0 * w + x0]) * fx;
        T bot = p[y1 * w + x0] + (p[y1 * w + x1] - p[y1 * w + x0]) * fx;
        return top + (bot - top) * fy;
    };
    std::vector<T> mask(plane);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t i = static_cast<size_t>(y) * w + x;
            T xs = x + fu[i], ys = y + fv[i];
            T rx = fu[i] + bwd_at(xs, ys, 0);
            T ry = fv[i] + bwd_at(xs, ys, 1);
            mask[i] = std::sqrt(rx * rx + ry * ry) < threshold ? T(1) : T(0);
        }
    return Tensor<T>::from_data({1, h, w}, std::move(mask));
}

// Per-pixel multiplicative masking, masks broadcast over color channels.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> apply_masks(const Tensor<T>& i21, const Tensor<T>& i23,
                                            const Tensor<T>& m21, const Tensor<T>& m23) {
    return {mul_mask(i21, m21), mul_mask(i23, m23)};
}

}  // namespace toflow
