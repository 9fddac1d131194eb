#pragma once

// On-disk corpus layout:
//   <root>/<split>/<clip-id>/frame_%02d.png     input frames
//                            flow_RF.flo        gt flow, R = ref frame, F = other
//                            mask_RF.png        gt validity mask for frame F
//                            target.png         clean / high-resolution reference
//                            clean_%02d.png     originals of degraded frames
//                            meta.json          indices, velocities, provenance

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "toflow/data.hpp"
#include "toflow/io.hpp"

namespace toflow {

inline std::string clip_id(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05zu", index);
    return buf;
}

namespace detail {

inline std::string frame_name(const char* stem, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02d.png", stem, i);
    return buf;
}

// flow_21.flo names frames 1-based: reference first, then the other frame.
inline std::string pair_stem(const char* stem, int ref, int other, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%d%d%s", stem, ref + 1, other + 1, ext);
    return buf;
}

}  // namespace detail

template <typename T>
void save_clip(const std::filesystem::path& dir, const VideoClip<T>& clip,
               const nlohmann::json& provenance = {}) {
    if (clip.frame_count() > 9)
        throw ConfigError("save_clip: layout supports at most 9 frames per clip");
    std::filesystem::create_directories(dir);
    for (int f = 0; f < clip.frame_count(); ++f)
        write_png(dir / detail::frame_name("frame", f), clip.frames[static_cast<size_t>(f)]);
    size_t fi = 0;
    for (int f = 0; f < clip.frame_count(); ++f) {
        if (f == clip.ref_index) continue;
        if (fi < clip.gt_flows.size())
            write_flo(dir / detail::pair_stem("flow", clip.ref_index, f, ".flo"),
                      clip.gt_flows[fi]);
        if (fi < clip.gt_masks.size())
            write_png(dir / detail::pair_stem("mask", clip.ref_index, f, ".png"),
                      clip.gt_masks[fi]);
        ++fi;
    }
    if (clip.gt_target.defined()) write_png(dir / "target.png", clip.gt_target);
    for (size_t f = 0; f < clip.clean_frames.size(); ++f)
        write_png(dir / detail::frame_name("clean", static_cast<int>(f)), clip.clean_frames[f]);

    nlohmann::json meta;
    meta["ref_index"] = clip.ref_index;
    meta["frame_count"] = clip.frame_count();
    meta["velocity_x"] = clip.velocity_x;
    meta["velocity_y"] = clip.velocity_y;
    if (!provenance.is_null() && !provenance.empty()) meta["provenance"] = provenance;
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
}

inline VideoClip<float> load_clip(const std::filesystem::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw FormatError("load_clip: missing meta.json in " + dir.string());
    nlohmann::json meta = nlohmann::json::parse(in);
    VideoClip<float> clip;
    clip.ref_index = meta.at("ref_index").get<int>();
    clip.velocity_x = meta.value("velocity_x", 0.0);
    clip.velocity_y = meta.value("velocity_y", 0.0);
    int frames = meta.at("frame_count").get<int>();
    for (int f = 0; f < frames; ++f)
        clip.frames.push_back(read_png(dir / detail::frame_name("frame", f)));
    for (int f = 0; f < frames; ++f) {
        if (f == clip.ref_index) continue;
        auto flo = dir / detail::pair_stem("flow", clip.ref_index, f, ".flo");
        if (std::filesystem::exists(flo)) clip.gt_flows.push_back(read_flo(flo));
        auto msk = dir / detail::pair_stem("mask", clip.ref_index, f, ".png");
        if (std::filesystem::exists(msk)) clip.gt_masks.push_back(read_png(msk));
    }
    if (std::filesystem::exists(dir / "target.png"))
        clip.gt_target = read_png(dir / "target.png");
    for (int f = 0; f < frames; ++f) {
        auto p = dir / detail::frame_name("clean", f);
        if (!std::filesystem::exists(p)) break;
        clip.clean_frames.push_back(read_png(p));
    }
    return clip;
}

template <typename T>
void save_corpus(const std::filesystem::path& split_dir,
                 const std::vector<VideoClip<T>>& clips,
                 const nlohmann::json& provenance = {}) {
    for (size_t i = 0; i < clips.size(); ++i) {
        nlohmann::json p = provenance;
        p["clip_index"] = i;
        save_clip(split_dir / clip_id(i), clips[i], p);
    }
}

// Clips in lexicographic clip-id order (generation order by construction).
inline std::vector<VideoClip<float>> load_corpus(const std::filesystem::path& split_dir) {
    if (!std::filesystem::is_directory(split_dir))
        throw ConfigError("load_corpus: not a directory: " + split_dir.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(split_dir))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ConfigError("load_corpus: no clips under " + split_dir.string());
    std::vector<VideoClip<float>> clips;
    clips.reserve(dirs.size());
    for (const auto& d : dirs) clips.push_back(load_clip(d));
    return clips;
}

}  // namespace toflow
