#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"
#include "toflow/ops.hpp"
#include "toflow/warp.hpp"

using namespace toflow;

namespace {

Tensorf constant_flow(int h, int w, float u, float v) {
    std::vector<float> d(static_cast<size_t>(2) * h * w);
    std::fill(d.begin(), d.begin() + h * w, u);
    std::fill(d.begin() + h * w, d.end(), v);
    return Tensorf::from_data({2, h, w}, d);
}

Tensorf ramp_image(int h, int w) {
    std::vector<float> d(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d[y * w + x] = static_cast<float>(x) / w;
    return Tensorf::from_data({1, h, w}, d);
}

}  // namespace

TEST_CASE("zero flow is a bitwise identity") {
    std::mt19937 rng(1);
    auto img = Tensorf::from_data({3, 7, 9}, gradcheck::random_vec<float>(3 * 7 * 9, rng, 0.f, 1.f));
    auto out = bilinear_warp(img, constant_flow(7, 9, 0.f, 0.f));
    REQUIRE(std::equal(out.data().begin(), out.data().end(), img.data().begin()));
}

TEST_CASE("horizontal ramp shifted by one pixel with border clamp") {
    const int h = 6, w = 8;
    auto img = ramp_image(h, w);
    auto out = bilinear_warp(img, constant_flow(h, w, 1.f, 0.f));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            REQUIRE(out.data()[y * w + x] ==
                    Catch::Approx(static_cast<float>(std::min(x + 1, w - 1)) / w));
}

TEST_CASE("constant in-bounds flow on bilinear images is analytic") {
    // image that is a bilinear (here: affine) function of (x, y)
    const int h = 8, w = 8;
    std::vector<float> d(h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d[y * w + x] = 0.1f * x + 0.05f * y + 0.2f;
    auto img = Tensorf::from_data({1, h, w}, d);
    float u = 1.25f, v = 2.5f;
    auto out = bilinear_warp(img, constant_flow(h, w, u, v));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + u > w - 1 || y + v > h - 1) continue;  // clamped region
            REQUIRE(out.data()[y * w + x] ==
                    Catch::Approx(0.1f * (x + u) + 0.05f * (y + v) + 0.2f).margin(1e-6));
        }
}

TEST_CASE("warp output stays within the input range") {
    std::mt19937 rng(2);
    auto img = Tensorf::from_data({1, 8, 8}, gradcheck::random_vec<float>(64, rng, 0.2f, 0.9f));
    auto flow = Tensorf::from_data({2, 8, 8}, gradcheck::random_vec<float>(128, rng, -5.f, 5.f));
    auto out = bilinear_warp(img, flow);
    float lo = *std::min_element(img.data().begin(), img.data().end());
    float hi = *std::max_element(img.data().begin(), img.data().end());
    for (float vv : out.data()) {
        REQUIRE(vv >= lo - 1e-6f);
        REQUIRE(vv <= hi + 1e-6f);
    }
}

TEST_CASE("warp composition is exact on constant images") {
    auto img = Tensorf::filled({2, 6, 6}, 0.42f);
    auto f = constant_flow(6, 6, 1.5f, -0.5f);
    auto g = constant_flow(6, 6, -2.0f, 1.0f);
    auto fg = constant_flow(6, 6, -0.5f, 0.5f);
    auto two_step = bilinear_warp(bilinear_warp(img, f), g);
    auto one_step = bilinear_warp(img, fg);
    for (int64_t i = 0; i < img.numel(); ++i)
        REQUIRE(two_step.data()[i] == Catch::Approx(one_step.data()[i]));
}

TEST_CASE("warp rejects extent mismatch and non-finite flow") {
    auto img = Tensorf::zeros({1, 4, 4});
    REQUIRE_THROWS_AS(bilinear_warp(img, Tensorf::zeros({2, 5, 4})), ShapeError);
    auto flow = Tensorf::zeros({2, 4, 4});
    flow.mutable_data()[3] = std::numeric_limits<float>::infinity();
    REQUIRE_THROWS(bilinear_warp(img, flow));
}

TEST_CASE("flow gradient matches finite differences at non-integer samples") {
    std::mt19937 rng(3);
    auto img = Tensord::from_data({2, 7, 7}, gradcheck::random_vec<double>(98, rng, 0.0, 1.0));
    auto target = Tensord::from_data({2, 7, 7}, gradcheck::random_vec<double>(98, rng, 0.0, 1.0));
    // keep sample points well inside pixels and inside the image
    auto fv = gradcheck::random_vec<double>(98, rng, 0.15, 1.85);
    for (auto& x : fv)
        if (std::abs(x - std::round(x)) < 0.05) x += 0.07;
    auto flow = Tensord::param({2, 7, 7}, fv);
    auto worst = gradcheck::check_gradients<double>(
        [&](std::vector<Tensord>& in) { return l1_loss(bilinear_warp(img, in[0]), target); },
        {flow});
    REQUIRE(worst < 1e-3);
}

TEST_CASE("image gradient through warp matches finite differences") {
    std::mt19937 rng(4);
    auto img = Tensord::param({1, 6, 6}, gradcheck::random_vec<double>(36, rng, 0.0, 1.0));
    auto fv = gradcheck::random_vec<double>(72, rng, 0.2, 1.3);
    for (auto& x : fv)
        if (std::abs(x - std::round(x)) < 0.05) x += 0.07;
    auto flow = Tensord::from_data({2, 6, 6}, fv);
    auto target = Tensord::from_data({1, 6, 6}, gradcheck::random_vec<double>(36, rng, 0.0, 1.0));
    auto worst = gradcheck::check_gradients<double>(
        [&](std::vector<Tensord>& in) { return l1_loss(bilinear_warp(in[0], flow), target); },
        {img});
    REQUIRE(worst < 1e-3);
}
