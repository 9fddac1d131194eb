#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"
#include "toflow/heads.hpp"
#include "toflow/metrics.hpp"

using namespace toflow;

namespace {

Tensorf random_image(int c, int h, int w, std::mt19937& rng) {
    return Tensorf::from_data({c, h, w},
                              gradcheck::random_vec<float>(static_cast<size_t>(c) * h * w, rng,
                                                           0.0f, 1.0f));
}

}  // namespace

TEST_CASE("interp_head with zero-initialized residual returns the average") {
    std::mt19937 rng(41);
    auto head = make_interp_head<float>(/*use_mask=*/false, rng);
    auto i21 = random_image(3, 12, 12, rng);
    auto i23 = random_image(3, 12, 12, rng);
    const Tensorf* none = nullptr;
    auto out = interp_head(i21, i23, none, none, head, false);
    REQUIRE(out.shape() == Shape{3, 12, 12});
    for (int64_t i = 0; i < out.numel(); ++i)
        REQUIRE(out.data()[i] == 0.5f * (i21.data()[i] + i23.data()[i]));
}

TEST_CASE("interp_head channel arithmetic: masked variant consumes 12 channels") {
    std::mt19937 rng(43);
    auto masked = make_interp_head<float>(true, rng);
    auto plain = make_interp_head<float>(false, rng);
    REQUIRE(masked.in_channels() == 12);
    REQUIRE(plain.in_channels() == 6);
    // layer plan: 9x9, 1x1, 1x1 with 64, 64, 3 channels
    REQUIRE(masked.layers.size() == 3);
    REQUIRE(masked.layers[0].weight.dim(0) == 64);
    REQUIRE(masked.layers[0].weight.dim(2) == 9);
    REQUIRE(masked.layers[1].weight.dim(2) == 1);
    REQUIRE(masked.layers[2].weight.dim(0) == 3);
}

TEST_CASE("interp_head rejects mask-argument mismatches") {
    std::mt19937 rng(45);
    auto head = make_interp_head<float>(true, rng);
    auto img = random_image(3, 8, 8, rng);
    const Tensorf* none = nullptr;
    REQUIRE_THROWS_AS(interp_head(img, img, none, none, head, true), ConfigError);
    auto plain = make_interp_head<float>(false, rng);
    REQUIRE_THROWS_AS(interp_head(img, img, &img, &img, plain, false), ConfigError);
}

TEST_CASE("denoise_head: N=7 RGB stack consumes 21 channels, emits 3xHxW") {
    std::mt19937 rng(47);
    auto head = make_denoise_head<float>(7, rng);
    REQUIRE(head.in_channels() == 21);
    std::vector<Tensorf> registered;
    for (int i = 0; i < 7; ++i) registered.push_back(random_image(3, 16, 16, rng));
    auto out = denoise_head(registered, head);
    REQUIRE(out.shape() == Shape{3, 16, 16});
    // channel mismatch is named
    registered.pop_back();
    REQUIRE_THROWS_AS(denoise_head(registered, head), ShapeError);
}

TEST_CASE("sr_head with zero-initialized residual returns the upsampled reference") {
    std::mt19937 rng(49);
    auto head = make_sr_head<float>(3, rng);
    REQUIRE(head.in_channels() == 9);
    REQUIRE(head.layers.size() == 4);
    REQUIRE(head.layers[1].weight.dim(2) == 9);
    std::vector<Tensorf> up;
    for (int i = 0; i < 3; ++i) up.push_back(random_image(3, 16, 16, rng));
    auto out = sr_head(up, 1, head);
    REQUIRE(out.shape() == Shape{3, 16, 16});
    for (int64_t i = 0; i < out.numel(); ++i) REQUIRE(out.data()[i] == up[1].data()[i]);
}

TEST_CASE("bicubic_resize: factor 1 is the identity") {
    std::mt19937 rng(51);
    auto img = random_image(3, 10, 14, rng);
    auto out = bicubic_resize(img, 1.0);
    REQUIRE(out.shape() == img.shape());
    for (int64_t i = 0; i < out.numel(); ++i)
        REQUIRE(out.data()[i] == Catch::Approx(img.data()[i]).margin(1e-6));
}

TEST_CASE("bicubic_resize keeps constants constant at any factor") {
    auto img = Tensorf::filled({1, 16, 16}, 0.37f);
    for (double f : {0.25, 0.5, 2.0, 4.0}) {
        auto out = bicubic_resize(img, f);
        for (float v : out.data()) REQUIRE(v == Catch::Approx(0.37f).margin(1e-6));
    }
}

TEST_CASE("bicubic_resize maps 112x64 to 448x256 at factor 4") {
    auto img = Tensorf::zeros({3, 64, 112});
    auto out = bicubic_resize(img, 4.0);
    REQUIRE(out.shape() == Shape{3, 256, 448});
}

TEST_CASE("bicubic down-then-up round trip of a smooth image exceeds 40 dB") {
    const int h = 64, w = 64;
    std::vector<float> img(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img[static_cast<size_t>(y) * w + x] = static_cast<float>(
                0.5 + 0.25 * std::sin(2 * M_PI * x / w) + 0.2 * std::cos(2 * M_PI * y / h));
    auto t = Tensorf::from_data({1, h, w}, std::move(img));
    auto rt = bicubic_resize(bicubic_resize(t, 0.25), 4.0);
    REQUIRE(psnr(rt, t) > 40.0);
}

TEST_CASE("bicubic_resize rejects invalid factors") {
    auto img = Tensorf::zeros({1, 8, 8});
    REQUIRE_THROWS_AS(bicubic_resize(img, 0.0), ConfigError);
    REQUIRE_THROWS_AS(bicubic_resize(img, 0.01), ConfigError);
}

TEST_CASE("heads are differentiable end to end") {
    std::mt19937 rng(53);
    auto head = HeadStack<double>::make(
        6, {{4, 3, true}, {3, 1, false}}, /*zero_init_last=*/false, rng);
    auto i21 = Tensord::param({3, 6, 6}, gradcheck::random_vec<double>(108, rng, 0.0, 1.0));
    auto i23 = Tensord::param({3, 6, 6}, gradcheck::random_vec<double>(108, rng, 0.0, 1.0));
    auto proj = Tensord::from_data({3, 6, 6}, gradcheck::random_vec<double>(108, rng, -1.0, 1.0));
    const Tensord* none = nullptr;
    auto worst = gradcheck::check_gradients<double>(
        [&](std::vector<Tensord>& in) {
            return sum(mul(interp_head(in[0], in[1], none, none, head, false), proj));
        },
        {i21, i23}, 1e-6);
    REQUIRE(worst < 1e-6);
}
