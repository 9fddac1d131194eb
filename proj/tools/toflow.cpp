// toflow: command-line front end tying corpus generation, degradation,
// benchmark filtering, the three training stages, inference, evaluation,
// and flow statistics into reproducible runs.
//
// Every run validates its configuration before any side effect, writes
// artifacts only under --out, and leaves behind config.json (the effective
// configuration) plus manifest.json (seed and content hashes).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "toflow/corpus.hpp"
#include "toflow/metrics.hpp"
#include "toflow/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace toflow;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: JSON document with defaults for every field.
// ---------------------------------------------------------------------------

struct RunConfig {
    TaskConfig task = TaskConfig::defaults(Task::Interpolation);
    TriangleToyParams toy;    // scene parameters for gen-toy
    double box_density = 0.10;  // box-noise corruption (denoising corpora)
    int box_size = 4;
    DegradationSpec deg;
    std::string in, out, checkpoint, val;
    std::string split = "train";
};

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& scope) {
    for (const auto& [k, _] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ConfigError("config: unknown key '" + scope + k + "'");
    }
}

template <typename V>
void get_if(const json& j, const char* key, V& v) {
    if (j.contains(key)) v = j.at(key).get<V>();
}

DegradationSpec::Kind parse_kind(const std::string& s) {
    if (s == "gaussian") return DegradationSpec::Kind::Gaussian;
    if (s == "mixed") return DegradationSpec::Kind::Mixed;
    if (s == "blocky") return DegradationSpec::Kind::Blocky;
    if (s == "downsample") return DegradationSpec::Kind::Downsample;
    throw ConfigError("config: unknown degradation kind '" + s +
                      "' (gaussian|mixed|blocky|downsample)");
}

std::string kind_name(DegradationSpec::Kind k) {
    switch (k) {
        case DegradationSpec::Kind::Gaussian: return "gaussian";
        case DegradationSpec::Kind::Mixed: return "mixed";
        case DegradationSpec::Kind::Blocky: return "blocky";
        case DegradationSpec::Kind::Downsample: return "downsample";
    }
    return "?";
}

RunConfig parse_config(const json& j) {
    reject_unknown(j,
                   {"task", "n_frames", "learning_rate", "epochs", "batch_size",
                    "weight_decay", "seed", "use_mask", "freeze_flow", "sr_factor",
                    "max_steps", "flow", "mask", "toy", "degrade", "in", "out",
                    "checkpoint", "val", "split"},
                   "");
    RunConfig rc;
    Task task = Task::Interpolation;
    if (j.contains("task")) task = parse_task(j.at("task").get<std::string>());
    rc.task = TaskConfig::defaults(task);
    get_if(j, "n_frames", rc.task.n_frames);
    get_if(j, "learning_rate", rc.task.learning_rate);
    get_if(j, "epochs", rc.task.epochs);
    get_if(j, "batch_size", rc.task.batch_size);
    get_if(j, "weight_decay", rc.task.weight_decay);
    get_if(j, "seed", rc.task.seed);
    get_if(j, "use_mask", rc.task.use_mask);
    get_if(j, "freeze_flow", rc.task.freeze_flow);
    get_if(j, "sr_factor", rc.task.sr_factor);
    get_if(j, "max_steps", rc.task.max_steps);
    if (j.contains("flow")) {
        const auto& f = j.at("flow");
        reject_unknown(f, {"levels", "frame_channels", "kernel", "hidden", "prewarp"}, "flow.");
        get_if(f, "levels", rc.task.flow.levels);
        get_if(f, "frame_channels", rc.task.flow.frame_channels);
        get_if(f, "kernel", rc.task.flow.kernel);
        get_if(f, "hidden", rc.task.flow.hidden);
        get_if(f, "prewarp", rc.task.flow.prewarp);
    }
    if (j.contains("mask")) {
        const auto& m = j.at("mask");
        reject_unknown(m, {"levels", "kernel", "hidden"}, "mask.");
        get_if(m, "levels", rc.task.mask.levels);
        get_if(m, "kernel", rc.task.mask.kernel);
        get_if(m, "hidden", rc.task.mask.hidden);
    }
    if (j.contains("toy")) {
        const auto& t = j.at("toy");
        reject_unknown(t,
                       {"width", "height", "sprite_size", "max_speed", "min_speed",
                        "textured_background", "count", "frames", "box_density", "box_size"},
                       "toy.");
        get_if(t, "width", rc.toy.width);
        get_if(t, "height", rc.toy.height);
        get_if(t, "sprite_size", rc.toy.sprite_size);
        get_if(t, "max_speed", rc.toy.max_speed);
        get_if(t, "min_speed", rc.toy.min_speed);
        get_if(t, "textured_background", rc.toy.textured_background);
        get_if(t, "count", rc.toy.count);
        get_if(t, "frames", rc.toy.frames);
        get_if(t, "box_density", rc.box_density);
        get_if(t, "box_size", rc.box_size);
    }
    if (j.contains("degrade")) {
        const auto& d = j.at("degrade");
        reject_unknown(d, {"kind", "sigma", "salt_pepper", "quant", "factor"}, "degrade.");
        if (d.contains("kind")) rc.deg.kind = parse_kind(d.at("kind").get<std::string>());
        get_if(d, "sigma", rc.deg.sigma);
        get_if(d, "salt_pepper", rc.deg.salt_pepper);
        get_if(d, "quant", rc.deg.quant);
        get_if(d, "factor", rc.deg.factor);
    }
    get_if(j, "in", rc.in);
    get_if(j, "out", rc.out);
    get_if(j, "checkpoint", rc.checkpoint);
    get_if(j, "val", rc.val);
    get_if(j, "split", rc.split);
    return rc;
}

json effective_config(const RunConfig& rc) {
    json j;
    j["task"] = task_name(rc.task.task);
    j["n_frames"] = rc.task.n_frames;
    j["learning_rate"] = rc.task.learning_rate;
    j["epochs"] = rc.task.epochs;
    j["batch_size"] = rc.task.batch_size;
    j["weight_decay"] = rc.task.weight_decay;
    j["seed"] = rc.task.seed;
    j["use_mask"] = rc.task.use_mask;
    j["freeze_flow"] = rc.task.freeze_flow;
    j["sr_factor"] = rc.task.sr_factor;
    j["max_steps"] = rc.task.max_steps;
    j["flow"] = {{"levels", rc.task.flow.levels},
                 {"frame_channels", rc.task.flow.frame_channels},
                 {"kernel", rc.task.flow.kernel},
                 {"hidden", rc.task.flow.hidden},
                 {"prewarp", rc.task.flow.prewarp}};
    j["mask"] = {{"levels", rc.task.mask.levels},
                 {"kernel", rc.task.mask.kernel},
                 {"hidden", rc.task.mask.hidden}};
    j["toy"] = {{"width", rc.toy.width},
                {"height", rc.toy.height},
                {"sprite_size", rc.toy.sprite_size},
                {"max_speed", rc.toy.max_speed},
                {"min_speed", rc.toy.min_speed},
                {"textured_background", rc.toy.textured_background},
                {"count", rc.toy.count},
                {"frames", rc.toy.frames},
                {"box_density", rc.box_density},
                {"box_size", rc.box_size}};
    j["degrade"] = {{"kind", kind_name(rc.deg.kind)},
                    {"sigma", rc.deg.sigma},
                    {"salt_pepper", rc.deg.salt_pepper},
                    {"quant", rc.deg.quant},
                    {"factor", rc.deg.factor}};
    j["in"] = rc.in;
    j["out"] = rc.out;
    j["checkpoint"] = rc.checkpoint;
    j["val"] = rc.val;
    j["split"] = rc.split;
    return j;
}

void require_field(const std::string& value, const char* name) {
    if (value.empty())
        throw ConfigError(std::string("config: missing required field '") + name + "'");
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Runs `body`, then writes config.json + manifest.json under rc.out.
// Everything the command produces lives under rc.out and is hashed.
int run_command(const std::string& command, const RunConfig& rc,
                const std::function<json()>& body) {
    require_field(rc.out, "out");
    fs::create_directories(rc.out);
    {
        std::ofstream cfg(fs::path(rc.out) / "config.json");
        cfg << effective_config(rc).dump(2) << '\n';
    }
    json extra = body();
    json manifest;
    manifest["command"] = command;
    manifest["seed"] = rc.task.seed;
    manifest["config"] = effective_config(rc);
    json inputs = json::object();
    if (!rc.in.empty()) inputs[rc.in] = hex64(hash_directory(rc.in));
    if (!rc.checkpoint.empty()) inputs[rc.checkpoint] = hex64(hash_file(rc.checkpoint));
    manifest["inputs"] = inputs;
    // hash of the produced artifacts; the config echo and the manifest are
    // excluded so runs into differently named directories compare equal
    uint64_t oh = 0;
    {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(rc.out))
            if (e.is_regular_file()) {
                auto name = e.path().filename();
                if (name == "config.json" || name == "manifest.json") continue;
                files.push_back(e.path());
            }
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            auto rel = fs::relative(p, rc.out).generic_string();
            oh = fnv1a64(rel.data(), rel.size(), oh ? oh : 0xcbf29ce484222325ULL);
            oh = detail::splitmix64(oh ^ hash_file(p));
        }
    }
    manifest["output_hash"] = hex64(oh);
    if (!extra.is_null()) manifest["result"] = extra;
    std::ofstream mf(fs::path(rc.out) / "manifest.json");
    mf << manifest.dump(2) << '\n';
    return 0;
}

void write_metrics(const fs::path& path, const std::vector<StepRecord>& log) {
    std::ofstream out(path);
    for (const auto& r : log) {
        json line = {{"step", r.step}, {"phase", r.phase}, {"loss", r.loss}};
        out << line.dump() << '\n';
    }
}

TaskModel<float> make_model(const RunConfig& rc, bool need_checkpoint) {
    auto model = TaskModel<float>::init(rc.task);
    if (!rc.checkpoint.empty())
        load_checkpoint(read_bytes(rc.checkpoint), model.params);
    else if (need_checkpoint)
        throw ConfigError("config: missing required field 'checkpoint'");
    return model;
}

void save_model(const RunConfig& rc, const TaskModel<float>& model) {
    write_bytes(fs::path(rc.out) / "checkpoint.bin", save_checkpoint(model.params));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen_toy(const RunConfig& rc) {
    return run_command("gen-toy", rc, [&] {
        TriangleToyParams toy = rc.toy;
        toy.seed = rc.task.seed;
        std::vector<VideoClip<float>> clips;
        json prov = {{"seed", rc.task.seed}, {"task", task_name(rc.task.task)}};
        switch (rc.task.task) {
            case Task::Interpolation:
                toy.frames = 3;
                clips = gen_triangle_toy<float>(toy);
                prov["generator"] = "triangle-toy";
                break;
            case Task::Denoising: {
                BoxNoiseToyParams bp;
                bp.scene = toy;
                bp.scene.frames = rc.task.n_frames;
                bp.scene.textured_background = true;
                bp.box_density = rc.box_density;
                bp.box_size = rc.box_size;
                clips = gen_boxnoise_toy<float>(bp);
                prov["generator"] = "boxnoise-toy";
                break;
            }
            case Task::SuperResolution:
                toy.frames = rc.task.n_frames;
                toy.textured_background = true;
                clips = gen_triangle_toy<float>(toy);
                prov["generator"] = "triangle-toy";
                break;
        }
        save_corpus(fs::path(rc.out) / rc.split, clips, prov);
        return json{{"clips", clips.size()}, {"split", rc.split}};
    });
}

int cmd_degrade(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("degrade", rc, [&] {
        auto clips = load_corpus(rc.in);
        json prov = {{"degradation", kind_name(rc.deg.kind)}, {"seed", rc.task.seed}};
        std::vector<VideoClip<float>> out;
        out.reserve(clips.size());
        for (size_t i = 0; i < clips.size(); ++i)
            out.push_back(degrade(clips[i], rc.deg, rc.task.seed + i));
        save_corpus(fs::path(rc.out) / rc.split, out, prov);
        return json{{"clips", out.size()}, {"split", rc.split}};
    });
}

int cmd_filter(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("filter", rc, [&] {
        auto clips = load_corpus(rc.in);
        std::ofstream rep(fs::path(rc.out) / "filter.jsonl");
        size_t accepted = 0;
        for (size_t i = 0; i < clips.size(); ++i) {
            const auto& clip = clips[i];
            if (clip.gt_flows.size() != static_cast<size_t>(clip.frame_count() - 1))
                throw ConfigError("filter: clip " + clip_id(i) + " lacks ground-truth flows");
            FilterResult r = clip.frame_count() == 3
                                 ? filter_interp_triplet(clip, clip.gt_flows[0],
                                                         clip.gt_flows[1])
                                 : filter_septuplet(clip, clip.gt_flows);
            json line = {{"clip", clip_id(i)}, {"accepted", r.accepted}};
            if (!r.accepted) {
                line["reason"] = std::string(1, r.reason);
                line["detail"] = r.detail;
            } else {
                ++accepted;
            }
            rep << line.dump() << '\n';
        }
        return json{{"clips", clips.size()}, {"accepted", accepted}};
    });
}

int cmd_pretrain_flow(const RunConfig& rc, bool degraded_inputs) {
    require_field(rc.in, "in");
    return run_command("pretrain-flow", rc, [&] {
        auto corpus = load_corpus(rc.in);
        auto model = make_model(rc, false);
        auto log = pretrain_flow(model, corpus, degraded_inputs);
        write_metrics(fs::path(rc.out) / "metrics.jsonl", log);
        save_model(rc, model);
        double epe = mean_epe(model, corpus, degraded_inputs);
        return json{{"steps", log.size()},
                    {"final_loss", log.empty() ? 0.0 : log.back().loss},
                    {"train_epe", epe}};
    });
}

int cmd_pretrain_mask(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("pretrain-mask", rc, [&] {
        auto corpus = load_corpus(rc.in);
        auto model = make_model(rc, true);
        auto log = pretrain_mask(model, corpus);
        write_metrics(fs::path(rc.out) / "metrics.jsonl", log);
        save_model(rc, model);
        return json{{"steps", log.size()},
                    {"final_loss", log.empty() ? 0.0 : log.back().loss}};
    });
}

int cmd_train(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("train", rc, [&] {
        auto corpus = load_corpus(rc.in);
        auto model = make_model(rc, false);
        auto log = train_joint(model, corpus);
        write_metrics(fs::path(rc.out) / "metrics.jsonl", log);
        save_model(rc, model);
        json result = {{"steps", log.size()},
                       {"final_loss", log.empty() ? 0.0 : log.back().loss}};
        if (!rc.val.empty()) {
            auto summary = evaluate(model, load_corpus(rc.val));
            json s = {{"psnr_mean", summary.psnr_mean},
                      {"ssim_mean", summary.ssim_mean},
                      {"clips", summary.psnr_per_clip.size()}};
            std::ofstream sf(fs::path(rc.out) / "summary.json");
            sf << s.dump(2) << '\n';
            result["val"] = s;
        }
        return result;
    });
}

int cmd_infer(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("infer", rc, [&] {
        auto corpus = load_corpus(rc.in);
        auto model = make_model(rc, true);
        for (size_t i = 0; i < corpus.size(); ++i) {
            auto out = infer(model, corpus[i]);
            fs::path dir = fs::path(rc.out) / clip_id(i);
            fs::create_directories(dir);
            write_png(dir / "output.png", out);
        }
        return json{{"clips", corpus.size()}};
    });
}

int cmd_eval(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("eval", rc, [&] {
        auto corpus = load_corpus(rc.in);
        auto model = make_model(rc, true);
        auto summary = evaluate(model, corpus);
        std::ofstream rep(fs::path(rc.out) / "metrics.jsonl");
        for (size_t i = 0; i < corpus.size(); ++i) {
            json line = {{"clip", clip_id(i)},
                         {"psnr", summary.psnr_per_clip[i]},
                         {"ssim", summary.ssim_per_clip[i]}};
            rep << line.dump() << '\n';
        }
        json s = {{"psnr_mean", summary.psnr_mean},
                  {"ssim_mean", summary.ssim_mean},
                  {"clips", summary.psnr_per_clip.size()}};
        std::ofstream sf(fs::path(rc.out) / "summary.json");
        sf << s.dump(2) << '\n';
        return s;
    });
}

int cmd_flow_stats(const RunConfig& rc) {
    require_field(rc.in, "in");
    return run_command("flow-stats", rc, [&] {
        auto corpus = load_corpus(rc.in);
        std::vector<Tensorf> flows;
        for (const auto& clip : corpus)
            for (const auto& f : clip.gt_flows) flows.push_back(f);
        if (flows.empty()) throw ConfigError("flow-stats: corpus has no ground-truth flows");
        auto hist = flow_histogram(flows);
        json s = {{"bin_width", hist.bin_width},
                  {"pixel_bins", hist.pixel_bins},
                  {"image_means", hist.image_means},
                  {"all_means_in_range_1_8", hist.all_means_in_range()}};
        std::ofstream sf(fs::path(rc.out) / "flow_stats.json");
        sf << s.dump(2) << '\n';
        return s;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toflow: task-oriented flow for video enhancement (toy scale)"};
    app.require_subcommand(1);

    // Flag values shadow the config file; only flags the user actually
    // passed override it.
    std::string config_path, task_s, in_s, out_s, ckpt_s, val_s, split_s, kind_s;
    uint64_t seed_v = 0;
    int count_v = 0, epochs_v = 0, max_steps_v = 0, factor_v = 0, frames_v = 0;
    double lr_v = 0, sigma_v = 0, sp_v = 0, quant_v = 0;
    bool use_mask_v = false, freeze_v = false, degraded_v = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "JSON run configuration");
        c->add_option("--task", task_s, "interpolation|denoising|super-resolution");
        c->add_option("--seed", seed_v, "random seed");
        c->add_option("--in", in_s, "input corpus split directory");
        c->add_option("--out", out_s, "output directory (all artifacts live here)");
        c->add_option("--checkpoint", ckpt_s, "checkpoint to load");
        c->add_option("--split", split_s, "corpus split name to write");
        c->add_option("--epochs", epochs_v, "training epochs");
        c->add_option("--max-steps", max_steps_v, "hard cap on optimizer steps");
        c->add_option("--lr", lr_v, "learning rate");
        return c;
    };

    auto* gen = add_common(app.add_subcommand("gen-toy", "generate a synthetic corpus"));
    gen->add_option("--count", count_v, "number of clips");
    gen->add_option("--frames", frames_v, "frames per clip");
    auto* deg = add_common(app.add_subcommand("degrade", "apply a degradation to a corpus"));
    deg->add_option("--kind", kind_s, "gaussian|mixed|blocky|downsample");
    deg->add_option("--sigma", sigma_v, "gaussian noise std dev");
    deg->add_option("--salt-pepper", sp_v, "salt-and-pepper probability");
    deg->add_option("--quant", quant_v, "blocky quantization strength");
    deg->add_option("--factor", factor_v, "downsample factor");
    auto* fil = add_common(app.add_subcommand("filter", "benchmark selection filters"));
    auto* pf = add_common(app.add_subcommand("pretrain-flow", "stage 1: supervised flow"));
    pf->add_flag("--degraded", degraded_v, "fine-tune on degraded inputs");
    pf->add_flag("--use-mask", use_mask_v, "enable the mask network");
    auto* pm = add_common(app.add_subcommand("pretrain-mask", "stage 2: occlusion masks"));
    pm->add_flag("--use-mask", use_mask_v, "enable the mask network");
    auto* tr = add_common(app.add_subcommand("train", "stage 3: joint end-to-end"));
    tr->add_flag("--use-mask", use_mask_v, "enable the mask network");
    tr->add_flag("--freeze-flow", freeze_v, "fixed-flow ablation");
    tr->add_option("--val", val_s, "validation split to evaluate after training");
    auto* inf = add_common(app.add_subcommand("infer", "run a checkpoint on a corpus"));
    auto* ev = add_common(app.add_subcommand("eval", "PSNR/SSIM over a corpus"));
    auto* fstat = add_common(app.add_subcommand("flow-stats", "ground-truth flow histogram"));
    (void)fil;
    (void)inf;
    (void)ev;
    (void)fstat;

    try {
        app.parse(argc, argv);
        CLI::App* sub = app.get_subcommands().front();

        json doc = json::object();
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("config: cannot open '" + config_path + "'");
            doc = json::parse(f);
        }
        // flags override file values
        auto passed = [&](const char* name) {
            const auto* o = sub->get_option_no_throw(name);
            return o != nullptr && o->count() > 0;
        };
        if (passed("--task")) doc["task"] = task_s;
        if (passed("--seed")) doc["seed"] = seed_v;
        if (passed("--in")) doc["in"] = in_s;
        if (passed("--out")) doc["out"] = out_s;
        if (passed("--checkpoint")) doc["checkpoint"] = ckpt_s;
        if (passed("--split")) doc["split"] = split_s;
        if (passed("--epochs")) doc["epochs"] = epochs_v;
        if (passed("--max-steps")) doc["max_steps"] = max_steps_v;
        if (passed("--lr")) doc["learning_rate"] = lr_v;
        if (passed("--count")) doc["toy"]["count"] = count_v;
        if (passed("--frames")) doc["toy"]["frames"] = frames_v;
        if (passed("--kind")) doc["degrade"]["kind"] = kind_s;
        if (passed("--sigma")) doc["degrade"]["sigma"] = sigma_v;
        if (passed("--salt-pepper")) doc["degrade"]["salt_pepper"] = sp_v;
        if (passed("--quant")) doc["degrade"]["quant"] = quant_v;
        if (passed("--factor")) doc["degrade"]["factor"] = factor_v;
        if (passed("--use-mask")) doc["use_mask"] = use_mask_v;
        if (passed("--freeze-flow")) doc["freeze_flow"] = freeze_v;
        if (passed("--val")) doc["val"] = val_s;

        RunConfig rc = parse_config(doc);
        rc.task.validate();
        rc.deg.validate();

        const std::string& name = sub->get_name();
        if (name == "gen-toy") return cmd_gen_toy(rc);
        if (name == "degrade") return cmd_degrade(rc);
        if (name == "filter") return cmd_filter(rc);
        if (name == "pretrain-flow") return cmd_pretrain_flow(rc, degraded_v);
        if (name == "pretrain-mask") return cmd_pretrain_mask(rc);
        if (name == "train") return cmd_train(rc);
        if (name == "infer") return cmd_infer(rc);
        if (name == "eval") return cmd_eval(rc);
        if (name == "flow-stats") return cmd_flow_stats(rc);
        throw ConfigError("unknown command " + name);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
