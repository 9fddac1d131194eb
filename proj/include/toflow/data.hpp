#pragma once

#include <optional>

#include "toflow/heads.hpp"
#include "toflow/tensor.hpp"

namespace toflow {

// ---------------------------------------------------------------------------
// Clips and degradations
// ---------------------------------------------------------------------------

template <typename T>
struct VideoClip {
    std::vector<Tensor<T>> frames;  // C x H x W each, values in [0,1]
    int ref_index = 0;
    // ground truth, present for synthetic clips
    std::vector<Tensor<T>> gt_flows;  // flow from the reference to each non-ref frame
    std::vector<Tensor<T>> gt_masks;  // validity of each warped non-ref frame
    Tensor<T> gt_target;              // clean / high-resolution reference frame
    std::vector<Tensor<T>> clean_frames;  // originals of degraded clips
    double velocity_x = 0, velocity_y = 0;

    int frame_count() const { return static_cast<int>(frames.size()); }
};

struct DegradationSpec {
    enum class Kind { Gaussian, Mixed, Blocky, Downsample };
    Kind kind = Kind::Gaussian;
    double sigma = 0.1;       // gaussian / mixed
    double salt_pepper = 0.10;  // mixed
    double quant = 20.0;      // blocky quantization strength
    int factor = 4;           // downsample

    void validate() const {
        if (kind == Kind::Gaussian || kind == Kind::Mixed)
            if (sigma < 0) throw ConfigError("degradation: sigma must be non-negative");
        if (kind == Kind::Mixed)
            if (salt_pepper < 0 || salt_pepper > 1)
                throw ConfigError("degradation: salt-and-pepper probability must be in [0,1]");
        if (kind == Kind::Blocky && quant <= 0)
            throw ConfigError("degradation: quantization strength must be positive");
        if (kind == Kind::Downsample && factor < 1)
            throw ConfigError("degradation: downsample factor must be a positive integer");
    }
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Independent random stream for clip `index` of a corpus seeded with `seed`.
inline std::mt19937 clip_rng(uint64_t seed, uint64_t index) {
    return std::mt19937(
        static_cast<uint32_t>(detail::splitmix64(detail::splitmix64(seed) ^ (index + 1))));
}

// ---------------------------------------------------------------------------
// Sprite scenes (triangle toys)
// ---------------------------------------------------------------------------

namespace detail {

// Isosceles triangle, apex down: flat base centered at (ax, ay), apex at
// (ax, ay + size). A flat trailing edge makes the occlusion geometry of a
// purely vertical translation a clean band.
inline bool in_triangle(double px, double py, double ax, double ay, double size) {
    double dy = py - ay;
    if (dy < 0 || dy > size) return false;
    double half = 0.5 * (size - dy);  // width shrinks linearly toward the apex
    return std::abs(px - ax) <= half;
}

// Smooth random background texture in [0,1]: blurred uniform noise.
template <typename T>
std::vector<T> smooth_texture(int c, int h, int w, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<T> noise(static_cast<size_t>(c) * h * w);
    for (auto& v : noise) v = static_cast<T>(u(rng));
    for (int pass = 0; pass < 2; ++pass) noise = binomial_blur(noise.data(), c, h, w);
    // stretch back toward full range after blurring
    for (auto& v : noise) v = static_cast<T>(std::clamp((v - 0.5) * 2.2 + 0.5, 0.05, 0.95));
    return noise;
}

// Render sprite-over-background at a given sprite position.
template <typename T>
Tensor<T> render_scene(const std::vector<T>& background, int h, int w, double ax, double ay,
                       double size, const std::array<T, 3>& color) {
    std::vector<T> img = background;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (in_triangle(x, y, ax, ay, size))
                for (int ch = 0; ch < 3; ++ch)
                    img[static_cast<size_t>(ch) * h * w + y * static_cast<size_t>(w) + x] =
                        color[ch];
    return Tensor<T>::from_data({3, h, w}, std::move(img));
}

}  // namespace detail

struct TriangleToyParams {
    int width = 48, height = 48;
    int sprite_size = 16;
    int max_speed = 8;   // per-frame displacement components drawn from [-max, max]
    int min_speed = 1;   // at least this much total motion
    std::optional<std::array<int, 2>> velocity;  // fixed (vx, vy) override
    bool textured_background = false;
    int count = 100;
    uint64_t seed = 0;
    int frames = 3;  // 3 for interpolation triplets, 7 for septuplets
};

// Synthetic triangle clips with exact linear motion, ground-truth flows
// from the reference frame, and geometric occlusion masks.
template <typename T>
std::vector<VideoClip<T>> gen_triangle_toy(const TriangleToyParams& p) {
    if (p.sprite_size >= std::min(p.width, p.height))
        throw ConfigError("gen_triangle_toy: sprite larger than frame");
    if (p.frames < 3 || p.frames % 2 == 0)
        throw ConfigError("gen_triangle_toy: frame count must be odd and >= 3");
    std::vector<VideoClip<T>> clips;
    clips.reserve(static_cast<size_t>(p.count));
    const std::array<T, 3> green = {T(0.1), T(0.9), T(0.15)};
    int ref = p.frames / 2;
    for (int ci = 0; ci < p.count; ++ci) {
        auto rng = clip_rng(p.seed, static_cast<uint64_t>(ci));
        std::uniform_int_distribution<int> vd(-p.max_speed, p.max_speed);
        int vx = 0, vy = 0;
        if (p.velocity) {
            vx = (*p.velocity)[0];
            vy = (*p.velocity)[1];
        } else {
            do {
                vx = vd(rng);
                vy = vd(rng);
            } while (std::abs(vx) + std::abs(vy) < p.min_speed);
        }
        // sprite must stay fully inside over all frames of this clip
        int reach_x = std::abs(vx) * ref + 1;
        int reach_y = std::abs(vy) * ref + 1;
        int margin_x = p.sprite_size / 2 + 1;
        int px_lo = margin_x + reach_x, px_hi = p.width - margin_x - reach_x - 1;
        int py_lo = reach_y, py_hi = p.height - p.sprite_size - reach_y - 1;
        if (px_lo > px_hi || py_lo > py_hi)
            throw ConfigError("gen_triangle_toy: frame too small for sprite_size " +
                              std::to_string(p.sprite_size) + " moving at (" +
                              std::to_string(vx) + "," + std::to_string(vy) + ")");
        std::uniform_int_distribution<int> px(px_lo, px_hi);
        std::uniform_int_distribution<int> py(py_lo, py_hi);
        double ax = px(rng), ay = py(rng);

        std::vector<T> bg(static_cast<size_t>(3) * p.height * p.width, T(0));
        if (p.textured_background)
            bg = detail::smooth_texture<T>(3, p.height, p.width, rng);

        VideoClip<T> clip;
        clip.ref_index = ref;
        clip.velocity_x = vx;
        clip.velocity_y = vy;
        for (int f = 0; f < p.frames; ++f)
            clip.frames.push_back(detail::render_scene<T>(bg, p.height, p.width,
                                                          ax + (f - ref) * vx,
                                                          ay + (f - ref) * vy, p.sprite_size,
                                                          green));
        clip.gt_target = clip.frames[static_cast<size_t>(ref)].detach();
        size_t plane = static_cast<size_t>(p.height) * p.width;
        for (int f = 0; f < p.frames; ++f) {
            if (f == ref) continue;
            int dx = (f - ref) * vx, dy = (f - ref) * vy;
            std::vector<T> flow(2 * plane, T(0));
            std::vector<T> mask(plane, T(1));
            for (int y = 0; y < p.height; ++y)
                for (int x = 0; x < p.width; ++x) {
                    size_t i = static_cast<size_t>(y) * p.width + x;
                    bool in_ref = detail::in_triangle(x, y, ax, ay, p.sprite_size);
                    bool in_f = detail::in_triangle(x, y, ax + dx, ay + dy, p.sprite_size);
                    if (in_ref) {
                        flow[i] = static_cast<T>(dx);
                        flow[plane + i] = static_cast<T>(dy);
                    } else if (in_f) {
                        mask[i] = T(0);  // background hidden behind the sprite in frame f
                    }
                }
            clip.gt_flows.push_back(Tensor<T>::from_data({2, p.height, p.width}, std::move(flow)));
            clip.gt_masks.push_back(Tensor<T>::from_data({1, p.height, p.width}, std::move(mask)));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

struct BoxNoiseToyParams {
    TriangleToyParams scene;  // scene.frames defaults make a triplet; set 7 for septuplets
    double box_density = 0.10;  // expected corrupted-pixel fraction per frame
    int box_size = 4;

    BoxNoiseToyParams() {
        scene.frames = 7;
        scene.max_speed = 2;
        scene.textured_background = true;
    }
};

// Septuplets with per-frame random opaque boxes; the clean clip (and the
// clean reference as gt_target) is retained.
template <typename T>
std::vector<VideoClip<T>> gen_boxnoise_toy(const BoxNoiseToyParams& p) {
    if (p.box_density < 0 || p.box_density >= 1)
        throw ConfigError("gen_boxnoise_toy: box density must be in [0, 1)");
    auto clips = gen_triangle_toy<T>(p.scene);
    int h = p.scene.height, w = p.scene.width;
    size_t plane = static_cast<size_t>(h) * w;
    // box count chosen so that expected union coverage (overlaps included
    // once) matches the configured density: n = log(1-d) / log(1-a/WH)
    double box_area_frac = static_cast<double>(p.box_size) * p.box_size / (h * w);
    int boxes_per_frame =
        p.box_density == 0
            ? 0
            : static_cast<int>(std::llround(std::log1p(-p.box_density) /
                                            std::log1p(-box_area_frac)));
    for (size_t ci = 0; ci < clips.size(); ++ci) {
        auto& clip = clips[ci];
        auto rng = clip_rng(p.scene.seed ^ 0x626f786eULL, static_cast<uint64_t>(ci));
        std::uniform_int_distribution<int> bx(0, w - p.box_size);
        std::uniform_int_distribution<int> by(0, h - p.box_size);
        std::uniform_real_distribution<double> shade(0.0, 1.0);
        clip.clean_frames.clear();
        for (auto& frame : clip.frames) {
            clip.clean_frames.push_back(frame.detach());
            auto d = frame.mutable_data();
            for (int b = 0; b < boxes_per_frame; ++b) {
                int x0 = bx(rng), y0 = by(rng);
                std::array<T, 3> col = {static_cast<T>(shade(rng)), static_cast<T>(shade(rng)),
                                        static_cast<T>(shade(rng))};
                for (int ch = 0; ch < 3; ++ch)
                    for (int y = y0; y < y0 + p.box_size; ++y)
                        for (int x = x0; x < x0 + p.box_size; ++x)
                            d[ch * plane + static_cast<size_t>(y) * w + x] = col[ch];
            }
        }
    }
    return clips;
}

// ---------------------------------------------------------------------------
// Degradation operators
// ---------------------------------------------------------------------------

namespace detail {

// Orthonormal 8x8 DCT-II basis.
inline const std::array<double, 64>& dct8_basis() {
    static const std::array<double, 64> m = [] {
        std::array<double, 64> b{};
        for (int k = 0; k < 8; ++k) {
            double s = k == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
            for (int n = 0; n < 8; ++n) b[k * 8 + n] = s * std::cos(M_PI * (n + 0.5) * k / 8);
        }
        return b;
    }();
    return m;
}

// Block-DCT quantization: AC coefficients are snapped to a q-scaled
// frequency-ramp table; DC passes through, so flat blocks are preserved.
template <typename T>
void blocky_plane(T* p, int h, int w, double q) {
    const auto& B = dct8_basis();
    for (int by = 0; by < h; by += 8)
        for (int bx = 0; bx < w; bx += 8) {
            double blk[64], tmp[64], coef[64];
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    int sy = std::min(by + y, h - 1), sx = std::min(bx + x, w - 1);
                    blk[y * 8 + x] = p[static_cast<size_t>(sy) * w + sx];
                }
            for (int k = 0; k < 8; ++k)
                for (int x = 0; x < 8; ++x) {
                    double a = 0;
                    for (int n = 0; n < 8; ++n) a += B[k * 8 + n] * blk[n * 8 + x];
                    tmp[k * 8 + x] = a;
                }
            for (int k = 0; k < 8; ++k)
                for (int l = 0; l < 8; ++l) {
                    double a = 0;
                    for (int n = 0; n < 8; ++n) a += B[l * 8 + n] * tmp[k * 8 + n];
                    coef[k * 8 + l] = a;
                }
            for (int k = 0; k < 8; ++k)
                for (int l = 0; l < 8; ++l) {
                    if (k == 0 && l == 0) continue;
                    double step = q * (1.0 + k + l) / 255.0;
                    coef[k * 8 + l] = std::round(coef[k * 8 + l] / step) * step;
                }
            for (int k = 0; k < 8; ++k)
                for (int x = 0; x < 8; ++x) {
                    double a = 0;
                    for (int n = 0; n < 8; ++n) a += B[n * 8 + k] * coef[n * 8 + x];
                    tmp[k * 8 + x] = a;
                }
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    if (by + y >= h || bx + x >= w) continue;
                    double a = 0;
                    for (int n = 0; n < 8; ++n) a += B[n * 8 + x] * tmp[y * 8 + n];
                    p[static_cast<size_t>(by + y) * w + bx + x] =
                        static_cast<T>(std::clamp(a, 0.0, 1.0));
                }
        }
}

}  // namespace detail

// Apply a degradation to every frame; clean originals move to clean_frames
// and gt_target keeps pointing at the clean reference.
template <typename T>
VideoClip<T> degrade(const VideoClip<T>& clip, const DegradationSpec& spec, uint64_t seed) {
    spec.validate();
    VideoClip<T> out = clip;
    out.clean_frames.clear();
    auto rng = clip_rng(seed, 0x646567ULL);
    std::normal_distribution<double> gauss(0.0, spec.sigma > 0 ? spec.sigma : 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& frame : out.frames) {
        out.clean_frames.push_back(frame);
        frame = frame.detach();  // private copy: the input clip stays clean
        switch (spec.kind) {
            case DegradationSpec::Kind::Gaussian:
            case DegradationSpec::Kind::Mixed: {
                auto d = frame.mutable_data();
                if (spec.sigma > 0)
                    for (auto& v : d)
                        v = static_cast<T>(
                            std::clamp(static_cast<double>(v) + gauss(rng), 0.0, 1.0));
                if (spec.kind == DegradationSpec::Kind::Mixed) {
                    int c = frame.dim(0);
                    size_t plane = static_cast<size_t>(frame.dim(1)) * frame.dim(2);
                    for (size_t i = 0; i < plane; ++i) {
                        if (u01(rng) >= spec.salt_pepper) continue;
                        T v = u01(rng) < 0.5 ? T(0) : T(1);
                        for (int ch = 0; ch < c; ++ch) d[ch * plane + i] = v;
                    }
                }
                break;
            }
            case DegradationSpec::Kind::Blocky: {
                auto d = frame.mutable_data();
                size_t plane = static_cast<size_t>(frame.dim(1)) * frame.dim(2);
                for (int ch = 0; ch < frame.dim(0); ++ch)
                    detail::blocky_plane(d.data() + ch * plane, frame.dim(1), frame.dim(2),
                                         spec.quant);
                break;
            }
            case DegradationSpec::Kind::Downsample: {
                frame = bicubic_resize(frame, 1.0 / spec.factor);
                auto d = frame.mutable_data();
                for (auto& v : d) v = std::clamp(v, T(0), T(1));
                break;
            }
        }
    }
    if (!clip.gt_target.defined() && spec.kind != DegradationSpec::Kind::Downsample)
        out.gt_target = clip.frames[static_cast<size_t>(clip.ref_index)].detach();
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark selection filters
// ---------------------------------------------------------------------------

struct FilterResult {
    bool accepted = true;
    char reason = 0;  // 'a' | 'b' | 'c' when rejected
    std::string detail;
};

namespace detail {

template <typename T>
double fraction_above(const std::vector<const Tensor<T>*>& flows, double px_threshold) {
    int64_t above = 0, total = 0;
    for (const auto* f : flows) {
        size_t plane = static_cast<size_t>(f->dim(1)) * f->dim(2);
        const T* u = f->data().data();
        const T* v = u + plane;
        for (size_t i = 0; i < plane; ++i) {
            double mag = std::hypot(static_cast<double>(u[i]), static_cast<double>(v[i]));
            if (mag > px_threshold) ++above;
            ++total;
        }
    }
    return static_cast<double>(above) / static_cast<double>(total);
}

}  // namespace detail

// Interpolation benchmark criteria:
//   (a) more than 5% of pixels move by more than 3 px
//   (b) mean L1 between the reference and each warped frame <= 15/255
//   (c) mean |v21 + v23| < 1 px (linear-motion test)
template <typename T>
FilterResult filter_interp_triplet(const VideoClip<T>& clip, const Tensor<T>& v21,
                                   const Tensor<T>& v23) {
    check(clip.frame_count() == 3, "filter_interp_triplet: expected a triplet");
    FilterResult r;
    double moving = detail::fraction_above<T>({&v21, &v23}, 3.0);
    if (moving <= 0.05) {
        r.accepted = false;
        r.reason = 'a';
        r.detail = "only " + std::to_string(moving * 100) + "% of pixels move more than 3 px";
        return r;
    }
    const auto& ref = clip.frames[1];
    auto i21 = bilinear_warp(clip.frames[0], v21);
    auto i23 = bilinear_warp(clip.frames[2], v23);
    double resid = std::max(l1_loss(i21, ref).item(), l1_loss(i23, ref).item());
    if (resid > 15.0 / 255.0) {
        r.accepted = false;
        r.reason = 'b';
        r.detail = "warp residual " + std::to_string(resid * 255) + "/255 exceeds 15/255";
        return r;
    }
    size_t plane = static_cast<size_t>(v21.dim(1)) * v21.dim(2);
    double acc = 0;
    for (size_t i = 0; i < plane; ++i) {
        double du = static_cast<double>(v21.data()[i]) + v23.data()[i];
        double dv = static_cast<double>(v21.data()[plane + i]) + v23.data()[plane + i];
        acc += std::hypot(du, dv);
    }
    acc /= static_cast<double>(plane);
    if (acc >= 1.0) {
        r.accepted = false;
        r.reason = 'c';
        r.detail = "mean |v21 + v23| = " + std::to_string(acc) + " px indicates non-linear motion";
        return r;
    }
    return r;
}

// Denoising/SR benchmark: criteria (a) and (b) only, over all ref->other flows.
template <typename T>
FilterResult filter_septuplet(const VideoClip<T>& clip, const std::vector<Tensor<T>>& flows) {
    check(static_cast<int>(flows.size()) == clip.frame_count() - 1,
          "filter_septuplet: need one flow per non-reference frame");
    FilterResult r;
    std::vector<const Tensor<T>*> fp;
    for (const auto& f : flows) fp.push_back(&f);
    double moving = detail::fraction_above<T>(fp, 3.0);
    if (moving <= 0.05) {
        r.accepted = false;
        r.reason = 'a';
        r.detail = "only " + std::to_string(moving * 100) + "% of pixels move more than 3 px";
        return r;
    }
    const auto& ref = clip.frames[static_cast<size_t>(clip.ref_index)];
    size_t fi = 0;
    double worst = 0;
    for (int f = 0; f < clip.frame_count(); ++f) {
        if (f == clip.ref_index) continue;
        auto warped = bilinear_warp(clip.frames[static_cast<size_t>(f)], flows[fi++]);
        worst = std::max(worst, static_cast<double>(l1_loss(warped, ref).item()));
    }
    if (worst > 15.0 / 255.0) {
        r.accepted = false;
        r.reason = 'b';
        r.detail = "warp residual " + std::to_string(worst * 255) + "/255 exceeds 15/255";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Shot detection and flow statistics
// ---------------------------------------------------------------------------

// Boundary at index i means a cut between frames i-1 and i.
template <typename T>
std::vector<int> shot_detect(const std::vector<Tensor<T>>& frames, double threshold) {
    if (threshold <= 0 || threshold > 1)
        throw ConfigError("shot_detect: threshold must be in (0, 1]");
    if (frames.size() < 2) throw ConfigError("shot_detect: need at least 2 frames");
    std::vector<int> cuts;
    for (size_t i = 1; i < frames.size(); ++i) {
        double d = l1_loss(frames[i], frames[i - 1]).item();
        if (d > threshold) cuts.push_back(static_cast<int>(i));
    }
    return cuts;
}

struct FlowHistogram {
    double bin_width = 0.25;
    std::vector<int64_t> pixel_bins;   // magnitude histogram over all pixels
    std::vector<double> image_means;   // mean magnitude per flow field

    bool all_means_in_range(double lo = 1.0, double hi = 8.0) const {
        for (double m : image_means)
            if (m < lo || m > hi) return false;
        return true;
    }
};

template <typename T>
FlowHistogram flow_histogram(const std::vector<Tensor<T>>& flows, double bin_width = 0.25) {
    FlowHistogram hist;
    hist.bin_width = bin_width;
    for (const auto& f : flows) {
        check(f.rank() == 3 && f.dim(0) == 2, "flow_histogram: expected 2xHxW flows");
        size_t plane = static_cast<size_t>(f.dim(1)) * f.dim(2);
        const T* u = f.data().data();
        const T* v = u + plane;
        double acc = 0;
        for (size_t i = 0; i < plane; ++i) {
            double mag = std::hypot(static_cast<double>(u[i]), static_cast<double>(v[i]));
            acc += mag;
            auto bin = static_cast<size_t>(mag / bin_width);
            if (hist.pixel_bins.size() <= bin) hist.pixel_bins.resize(bin + 1, 0);
            ++hist.pixel_bins[bin];
        }
        hist.image_means.push_back(acc / static_cast<double>(plane));
    }
    return hist;
}

}  // namespace toflow
