#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"
#include "toflow/data.hpp"
#include "toflow/masknet.hpp"

using namespace toflow;

namespace {

MaskNetConfig small_cfg() {
    MaskNetConfig cfg;
    cfg.levels = 2;
    cfg.kernel = 3;
    cfg.hidden = {4};
    return cfg;
}

// Constant flow field (u, v).
Tensorf const_flow(int h, int w, float u, float v) {
    std::vector<float> d(static_cast<size_t>(2) * h * w);
    size_t plane = static_cast<size_t>(h) * w;
    std::fill(d.begin(), d.begin() + plane, u);
    std::fill(d.begin() + plane, d.end(), v);
    return Tensorf::from_data({2, h, w}, std::move(d));
}

}  // namespace

TEST_CASE("estimate_masks emits two 1xHxW tensors in [0,1]") {
    std::mt19937 rng(21);
    auto net = MaskNetParams<float>::init(small_cfg(), rng);
    auto v21 = const_flow(16, 16, -100.0f, 40.0f);
    auto v23 = const_flow(16, 16, 100.0f, -40.0f);
    auto [m21, m23] = estimate_masks(v21, v23, net);
    REQUIRE(m21.shape() == Shape{1, 16, 16});
    REQUIRE(m23.shape() == Shape{1, 16, 16});
    for (float v : m21.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    for (float v : m23.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("mask net level input channels: 4 at the coarsest, 6 above") {
    std::mt19937 rng(23);
    auto net = MaskNetParams<float>::init(small_cfg(), rng);
    REQUIRE(net.levels[0].layers[0].weight.dim(1) == 4);
    REQUIRE(net.levels[1].layers[0].weight.dim(1) == 6);
}

TEST_CASE("estimate_masks validates flow extents") {
    std::mt19937 rng(25);
    auto net = MaskNetParams<float>::init(small_cfg(), rng);
    auto good = const_flow(16, 16, 0, 0);
    REQUIRE_THROWS_AS(estimate_masks(good, const_flow(16, 8, 0, 0), net), ShapeError);
    REQUIRE_THROWS_AS(estimate_masks(const_flow(15, 15, 0, 0), const_flow(15, 15, 0, 0), net),
                      ShapeError);
}

TEST_CASE("estimate_masks is differentiable back to the flows") {
    MaskNetConfig cfg = small_cfg();
    std::mt19937 rng(27);
    auto net = MaskNetParams<double>::init(cfg, rng);
    auto flows = gradcheck::random_vec<double>(2 * 8 * 8, rng, -0.5, 0.5);
    auto v21 = Tensord::param({2, 8, 8}, std::vector<double>(flows));
    auto v23 = Tensord::param({2, 8, 8}, gradcheck::random_vec<double>(2 * 8 * 8, rng, -0.5, 0.5));
    auto proj = Tensord::from_data({1, 8, 8}, gradcheck::random_vec<double>(64, rng, -1.0, 1.0));
    auto worst = gradcheck::check_gradients<double>(
        [&](std::vector<Tensord>& in) {
            auto [m21, m23] = estimate_masks(in[0], in[1], net);
            return sum(mul(add(m21, m23), proj));
        },
        {v21, v23}, 1e-6);
    REQUIRE(worst < 1e-5);
}

TEST_CASE("occlusion_oracle: static scene is fully valid") {
    auto zero = const_flow(12, 12, 0, 0);
    auto mask = occlusion_oracle(zero, zero);
    REQUIRE(mask.shape() == Shape{1, 12, 12});
    for (float v : mask.data()) REQUIRE(v == 1.0f);
}

TEST_CASE("occlusion_oracle: inconsistent constant flows give an all-zero mask") {
    auto fwd = const_flow(10, 10, 2.0f, 0.0f);
    auto bwd = const_flow(10, 10, 0.0f, 0.0f);
    auto mask = occlusion_oracle(fwd, bwd);
    for (float v : mask.data()) REQUIRE(v == 0.0f);
}

TEST_CASE("occlusion_oracle matches the geometric mask for a 4 px downward translation") {
    // sprite at frame 2: base at (24, 20); at frame 1 it sat 4 px higher.
    const int h = 48, w = 48, size = 16;
    const double ax = 24, ay2 = 20, ay1 = 16;
    std::vector<float> fwd(2 * h * w, 0.0f), bwd(2 * h * w, 0.0f), expect(h * w, 1.0f);
    size_t plane = static_cast<size_t>(h) * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t i = static_cast<size_t>(y) * w + x;
            bool in2 = detail::in_triangle(x, y, ax, ay2, size);
            bool in1 = detail::in_triangle(x, y, ax, ay1, size);
            if (in2) fwd[plane + i] = -4.0f;  // frame2 -> frame1 motion
            if (in1) bwd[plane + i] = 4.0f;   // frame1 -> frame2 motion
            if (!in2 && in1) expect[i] = 0.0f;  // background hidden in frame 1
        }
    auto mask = occlusion_oracle(Tensorf::from_data({2, h, w}, fwd),
                                 Tensorf::from_data({2, h, w}, bwd));
    for (size_t i = 0; i < plane; ++i) REQUIRE(mask.data()[i] == expect[i]);
    // occluded region is a band of height 4 at the trailing (top) edge
    int occluded = 0, min_y = h, max_y = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.data()[y * w + x] == 0.0f) {
                ++occluded;
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    REQUIRE(occluded > 0);
    REQUIRE(min_y == static_cast<int>(ay1));
    REQUIRE(max_y - min_y + 1 == 4);
}

TEST_CASE("occlusion_oracle agrees with generated ground-truth masks") {
    TriangleToyParams p;
    p.count = 2;
    p.seed = 99;
    p.velocity = {{3, -2}};
    auto clips = gen_triangle_toy<float>(p);
    for (const auto& clip : clips) {
        // flows: v21 = -(u) on sprite(ref), its inverse lives on sprite(frame1)
        const auto& v21 = clip.gt_flows[0];
        // backward flow: shift the support by the motion and negate
        size_t plane = static_cast<size_t>(v21.dim(1)) * v21.dim(2);
        std::vector<float> v12(2 * plane, 0.0f);
        int wdt = v21.dim(2);
        for (int y = 0; y < v21.dim(1); ++y)
            for (int x = 0; x < wdt; ++x) {
                size_t i = static_cast<size_t>(y) * wdt + x;
                if (v21.data()[i] == 0.0f && v21.data()[plane + i] == 0.0f) continue;
                int tx = x + static_cast<int>(v21.data()[i]);
                int ty = y + static_cast<int>(v21.data()[plane + i]);
                size_t j = static_cast<size_t>(ty) * wdt + tx;
                v12[j] = -v21.data()[i];
                v12[plane + j] = -v21.data()[plane + i];
            }
        auto oracle =
            occlusion_oracle(v21, Tensorf::from_data(v21.shape(), std::move(v12)));
        const auto& gt = clip.gt_masks[0];
        for (size_t i = 0; i < plane; ++i) REQUIRE(oracle.data()[i] == gt.data()[i]);
    }
}

TEST_CASE("apply_masks: identity, annihilation, halving") {
    std::mt19937 rng(31);
    auto i21 = Tensorf::from_data({3, 4, 4}, gradcheck::random_vec<float>(48, rng, 0.0f, 1.0f));
    auto i23 = Tensorf::from_data({3, 4, 4}, gradcheck::random_vec<float>(48, rng, 0.0f, 1.0f));
    auto ones = Tensorf::filled({1, 4, 4}, 1.0f);
    auto zeros = Tensorf::zeros({1, 4, 4});
    auto half = Tensorf::filled({1, 4, 4}, 0.5f);

    auto [a, b] = apply_masks(i21, i23, ones, ones);
    for (int64_t i = 0; i < a.numel(); ++i) REQUIRE(a.data()[i] == i21.data()[i]);
    for (int64_t i = 0; i < b.numel(); ++i) REQUIRE(b.data()[i] == i23.data()[i]);

    auto [c, d] = apply_masks(i21, i23, zeros, zeros);
    for (float v : c.data()) REQUIRE(v == 0.0f);
    for (float v : d.data()) REQUIRE(v == 0.0f);

    auto [e, f] = apply_masks(i21, i23, half, half);
    for (int64_t i = 0; i < e.numel(); ++i)
        REQUIRE(e.data()[i] == Catch::Approx(0.5f * i21.data()[i]));
    (void)f;
}
