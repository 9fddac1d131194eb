#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "gradcheck.hpp"
#include "toflow/io.hpp"

using namespace toflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("toflow-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ParamSet<float> sample_params(std::mt19937& rng) {
    ParamSet<float> ps;
    ps.add("head.w", Tensorf::from_data({2, 3}, gradcheck::random_vec<float>(6, rng)));
    ps.add("head.b", Tensorf::from_data({2}, gradcheck::random_vec<float>(2, rng)));
    ps.add("flow.level0.conv0.weight",
           Tensorf::from_data({4, 2, 3, 3}, gradcheck::random_vec<float>(72, rng)));
    return ps;
}

}  // namespace

TEST_CASE("png round-trips 8-bit content exactly") {
    TempDir tmp;
    std::mt19937 rng(71);
    // start from values already on the 8-bit grid so the trip is lossless
    std::vector<float> vals(3 * 10 * 7);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : vals) v = static_cast<float>(byte(rng)) / 255.0f;
    auto img = Tensorf::from_data({3, 10, 7}, vals);
    write_png(tmp.path / "x.png", img);
    auto back = read_png(tmp.path / "x.png");
    REQUIRE(back.shape() == img.shape());
    for (int64_t i = 0; i < img.numel(); ++i) REQUIRE(back.data()[i] == img.data()[i]);
}

TEST_CASE("png quantizes off-grid values to the nearest 8-bit level") {
    TempDir tmp;
    auto img = Tensorf::filled({1, 4, 4}, 0.5f);  // 127.5 rounds to 128
    write_png(tmp.path / "g.png", img);
    auto back = read_png(tmp.path / "g.png");
    for (float v : back.data()) REQUIRE(v == Catch::Approx(128.0f / 255.0f));
}

TEST_CASE("png rejects unsupported channel counts and bad files") {
    TempDir tmp;
    REQUIRE_THROWS_AS(write_png(tmp.path / "y.png", Tensorf::zeros({2, 4, 4})), FormatError);
    write_bytes(tmp.path / "junk.png", {1, 2, 3, 4});
    REQUIRE_THROWS_AS(read_png(tmp.path / "junk.png"), FormatError);
    REQUIRE_THROWS_AS(read_png(tmp.path / "missing.png"), FormatError);
}

TEST_CASE("flo files round-trip bit-exactly and start with the magic") {
    TempDir tmp;
    std::mt19937 rng(73);
    auto flow = Tensorf::from_data({2, 6, 9},
                                   gradcheck::random_vec<float>(2 * 6 * 9, rng, -20.0f, 20.0f));
    write_flo(tmp.path / "f.flo", flow);
    auto bytes = read_bytes(tmp.path / "f.flo");
    float magic;
    std::memcpy(&magic, bytes.data(), 4);
    REQUIRE(magic == 202021.25f);
    auto back = read_flo(tmp.path / "f.flo");
    REQUIRE(back.shape() == flow.shape());
    for (int64_t i = 0; i < flow.numel(); ++i) REQUIRE(back.data()[i] == flow.data()[i]);
}

TEST_CASE("flo reader rejects corrupt headers") {
    TempDir tmp;
    write_bytes(tmp.path / "bad.flo", std::vector<uint8_t>(12, 0));
    REQUIRE_THROWS_AS(read_flo(tmp.path / "bad.flo"), FormatError);
    // valid magic, truncated payload
    auto flow = Tensorf::zeros({2, 4, 4});
    write_flo(tmp.path / "t.flo", flow);
    auto bytes = read_bytes(tmp.path / "t.flo");
    bytes.resize(bytes.size() - 8);
    write_bytes(tmp.path / "t.flo", bytes);
    REQUIRE_THROWS_AS(read_flo(tmp.path / "t.flo"), FormatError);
}

TEST_CASE("checkpoint save-load-save is byte-identical") {
    std::mt19937 rng(75);
    auto ps = sample_params(rng);
    auto bytes = save_checkpoint(ps);

    auto ps2 = sample_params(rng);  // different values, same structure
    load_checkpoint(bytes, ps2);
    auto bytes2 = save_checkpoint(ps2);
    REQUIRE(bytes == bytes2);
    for (size_t i = 0; i < ps.size(); ++i)
        for (int64_t k = 0; k < ps.tensor(i).numel(); ++k)
            REQUIRE(ps2.tensor(i).data()[k] == ps.tensor(i).data()[k]);
}

TEST_CASE("checkpoint rejects corruption and mismatched models") {
    std::mt19937 rng(77);
    auto ps = sample_params(rng);
    auto bytes = save_checkpoint(ps);

    SECTION("corrupted magic") {
        bytes[0] = 'X';
        REQUIRE_THROWS_AS(load_checkpoint(bytes, ps), FormatError);
    }
    SECTION("unsupported version") {
        bytes[4] = 99;
        REQUIRE_THROWS_AS(load_checkpoint(bytes, ps), FormatError);
    }
    SECTION("truncated payload") {
        bytes.resize(bytes.size() - 4);
        REQUIRE_THROWS_AS(load_checkpoint(bytes, ps), FormatError);
    }
    SECTION("arity mismatch names the offending tensor") {
        ParamSet<float> other;
        other.add("head.w", Tensorf::zeros({2, 3}));
        other.add("head.b", Tensorf::zeros({2}));
        other.add("mask.level0.conv0.weight", Tensorf::zeros({4, 2, 3, 3}));
        try {
            load_checkpoint(bytes, other);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            REQUIRE(std::string(e.what()).find("flow.level0.conv0.weight") != std::string::npos);
        }
    }
    SECTION("shape mismatch names the offending tensor") {
        ParamSet<float> other;
        other.add("head.w", Tensorf::zeros({3, 2}));
        other.add("head.b", Tensorf::zeros({2}));
        other.add("flow.level0.conv0.weight", Tensorf::zeros({4, 2, 3, 3}));
        try {
            load_checkpoint(bytes, other);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            REQUIRE(std::string(e.what()).find("head.w") != std::string::npos);
        }
    }
    SECTION("wrong tensor count") {
        ParamSet<float> other;
        other.add("head.w", Tensorf::zeros({2, 3}));
        REQUIRE_THROWS_AS(load_checkpoint(bytes, other), FormatError);
    }
}

TEST_CASE("directory hashing is stable and content-sensitive") {
    TempDir tmp;
    fs::create_directories(tmp.path / "a");
    write_bytes(tmp.path / "a" / "one.bin", {1, 2, 3});
    write_bytes(tmp.path / "two.bin", {4, 5});
    auto h1 = hash_directory(tmp.path);
    auto h2 = hash_directory(tmp.path);
    REQUIRE(h1 == h2);
    write_bytes(tmp.path / "two.bin", {4, 6});
    REQUIRE(hash_directory(tmp.path) != h1);
    REQUIRE(fnv1a64("abc", 3) != fnv1a64("abd", 3));
}
