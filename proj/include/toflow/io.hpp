#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "toflow/params.hpp"
#include "toflow/tensor.hpp"

namespace toflow {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)
// ---------------------------------------------------------------------------

namespace detail {

struct PngCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace detail

// Write a CxHxW tensor (values in [0,1], C = 1 or 3) as an 8-bit PNG.
template <typename T>
void write_png(const std::filesystem::path& path, const Tensor<T>& img) {
    check(img.rank() == 3, "write_png: expected CxHxW");
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (c != 1 && c != 3) throw FormatError("write_png: channel count must be 1 or 3");
    std::unique_ptr<std::FILE, detail::PngCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw FormatError("write_png: cannot open " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("write_png: encode failure for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    size_t plane = static_cast<size_t>(h) * w;
    std::vector<png_byte> row(static_cast<size_t>(w) * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double v = img.data()[ch * plane + static_cast<size_t>(y) * w + x];
                row[static_cast<size_t>(x) * c + ch] =
                    static_cast<png_byte>(std::clamp(std::lround(v * 255.0), 0L, 255L));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Read an 8-bit PNG as a CxHxW float tensor in [0,1]. Palette/alpha/16-bit
// inputs are normalized to gray or RGB.
inline Tensorf read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::PngCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw FormatError("read_png: cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("read_png: not a valid PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    int w = static_cast<int>(png_get_image_width(png, info));
    int h = static_cast<int>(png_get_image_height(png, info));
    int c = png_get_channels(png, info);
    if (c != 1 && c != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("read_png: unsupported channel count in " + path.string());
    }
    std::vector<png_byte> row(static_cast<size_t>(w) * c);
    size_t plane = static_cast<size_t>(h) * w;
    std::vector<float> data(static_cast<size_t>(c) * plane);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                data[ch * plane + static_cast<size_t>(y) * w + x] =
                    static_cast<float>(row[static_cast<size_t>(x) * c + ch]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return Tensorf::from_data({c, h, w}, std::move(data));
}

// ---------------------------------------------------------------------------
// Flow files (.flo): f32 magic 202021.25, i32 width, i32 height,
// interleaved (u, v) f32 pairs, little-endian, row-major.
// ---------------------------------------------------------------------------

inline constexpr float kFloMagic = 202021.25f;

template <typename T>
void write_flo(const std::filesystem::path& path, const Tensor<T>& flow) {
    check(flow.rank() == 3 && flow.dim(0) == 2, "write_flo: expected 2xHxW flow");
    int h = flow.dim(1), w = flow.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_flo: cannot open " + path.string());
    auto put = [&](const void* p, size_t n) { out.write(static_cast<const char*>(p), n); };
    int32_t wi = w, hi = h;
    put(&kFloMagic, 4);
    put(&wi, 4);
    put(&hi, 4);
    size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i) {
        float u = static_cast<float>(flow.data()[i]);
        float v = static_cast<float>(flow.data()[plane + i]);
        put(&u, 4);
        put(&v, 4);
    }
    if (!out) throw FormatError("write_flo: short write to " + path.string());
}

inline Tensorf read_flo(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("read_flo: cannot open " + path.string());
    float magic = 0;
    int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || magic != kFloMagic)
        throw FormatError("read_flo: bad magic in " + path.string());
    if (w <= 0 || h <= 0) throw FormatError("read_flo: bad extents in " + path.string());
    size_t plane = static_cast<size_t>(h) * w;
    std::vector<float> data(2 * plane);
    for (size_t i = 0; i < plane; ++i) {
        float uv[2];
        in.read(reinterpret_cast<char*>(uv), 8);
        data[i] = uv[0];
        data[plane + i] = uv[1];
    }
    if (!in) throw FormatError("read_flo: truncated payload in " + path.string());
    return Tensorf::from_data({2, h, w}, std::move(data));
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "TOFW", u32 version, u32 tensor count; per tensor
// u16 name length, name bytes, u8 rank, u32 dims, f32 little-endian data.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void append(std::vector<uint8_t>& buf, const void* p, size_t n) {
    auto* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
}

struct ByteReader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;
    void read(void* p, size_t n, const char* what) {
        if (pos + n > buf.size())
            throw FormatError(std::string("checkpoint: truncated payload reading ") + what);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
};

}  // namespace detail

template <typename T>
std::vector<uint8_t> save_checkpoint(const ParamSet<T>& params) {
    std::vector<uint8_t> buf;
    detail::append(buf, "TOFW", 4);
    uint32_t version = kCheckpointVersion;
    uint32_t count = static_cast<uint32_t>(params.size());
    detail::append(buf, &version, 4);
    detail::append(buf, &count, 4);
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& name = params.name(i);
        const auto& t = params.tensor(i);
        if (name.size() > 0xffff) throw FormatError("checkpoint: parameter name too long");
        uint16_t len = static_cast<uint16_t>(name.size());
        detail::append(buf, &len, 2);
        detail::append(buf, name.data(), name.size());
        uint8_t rank = static_cast<uint8_t>(t.rank());
        detail::append(buf, &rank, 1);
        for (int d = 0; d < t.rank(); ++d) {
            uint32_t dim = static_cast<uint32_t>(t.dim(d));
            detail::append(buf, &dim, 4);
        }
        for (int64_t k = 0; k < t.numel(); ++k) {
            float v = static_cast<float>(t.data()[k]);
            detail::append(buf, &v, 4);
        }
    }
    return buf;
}

// Load a checkpoint into an existing parameter set; names, order, and
// shapes must match the model the set was built for.
template <typename T>
void load_checkpoint(const std::vector<uint8_t>& bytes, ParamSet<T>& params) {
    detail::ByteReader r{bytes};
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, "TOFW", 4) != 0) throw FormatError("checkpoint: bad magic");
    uint32_t version = 0, count = 0;
    r.read(&version, 4, "version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    r.read(&count, 4, "tensor count");
    if (count != params.size())
        throw FormatError("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size()));
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = 0;
        r.read(&len, 2, "name length");
        std::string name(len, '\0');
        r.read(name.data(), len, "name");
        if (name != params.name(i))
            throw FormatError("checkpoint: tensor '" + name + "' does not match model parameter '" +
                              params.name(i) + "'");
        auto& t = params.tensor(i);
        uint8_t rank = 0;
        r.read(&rank, 1, name.c_str());
        Shape shape(rank);
        for (int d = 0; d < rank; ++d) {
            uint32_t dim = 0;
            r.read(&dim, 4, name.c_str());
            shape[d] = dim;
        }
        if (shape != t.shape())
            throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(t.shape()));
        auto dst = t.mutable_data();
        for (int64_t k = 0; k < t.numel(); ++k) {
            float v = 0;
            r.read(&v, 4, name.c_str());
            dst[k] = static_cast<T>(v);
        }
    }
    if (r.pos != bytes.size()) throw FormatError("checkpoint: trailing bytes after payload");
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

inline std::vector<uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open: " + path.string());
    auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw FormatError("short read from " + path.string());
    return bytes;
}

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64) for corpus manifests and determinism checks
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const uint8_t*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t hash_file(const std::filesystem::path& path) {
    auto bytes = read_bytes(path);
    return fnv1a64(bytes.data(), bytes.size());
}

// Order-independent-of-traversal hash of a directory tree: relative paths
// sorted lexicographically, each path and its content folded in sequence.
inline uint64_t hash_directory(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), root));
    std::sort(files.begin(), files.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& rel : files) {
        auto s = rel.generic_string();
        h = fnv1a64(s.data(), s.size(), h);
        auto bytes = read_bytes(root / rel);
        h = fnv1a64(bytes.data(), bytes.size(), h);
    }
    return h;
}

}  // namespace toflow
