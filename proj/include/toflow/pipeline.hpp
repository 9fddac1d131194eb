#pragma once

#include "toflow/adam.hpp"
#include "toflow/data.hpp"
#include "toflow/heads.hpp"
#include "toflow/io.hpp"
#include "toflow/masknet.hpp"
#include "toflow/metrics.hpp"

namespace toflow {

// ---------------------------------------------------------------------------
// Task configuration
// ---------------------------------------------------------------------------

enum class Task { Interpolation, Denoising, SuperResolution };

inline std::string task_name(Task t) {
    switch (t) {
        case Task::Interpolation: return "interpolation";
        case Task::Denoising: return "denoising";
        case Task::SuperResolution: return "super-resolution";
    }
    throw ConfigError("unknown task tag");
}

inline Task parse_task(const std::string& s) {
    if (s == "interpolation") return Task::Interpolation;
    if (s == "denoising" || s == "deblocking") return Task::Denoising;
    if (s == "super-resolution" || s == "sr") return Task::SuperResolution;
    throw ConfigError("unknown task: " + s);
}

struct TaskConfig {
    Task task = Task::Interpolation;
    int n_frames = 3;
    double learning_rate = 3e-4;
    int epochs = 15;
    int batch_size = 1;
    double weight_decay = 1e-4;
    uint64_t seed = 0;
    bool use_mask = false;
    bool freeze_flow = false;  // "fixed flow" ablation
    int sr_factor = 4;
    int max_steps = 0;  // 0: bounded by epochs only (toy-scale override)
    FlowNetConfig flow;
    MaskNetConfig mask;

    int ref_index() const { return n_frames / 2; }

    static TaskConfig defaults(Task t) {
        TaskConfig c;
        c.task = t;
        if (t == Task::Interpolation) {
            c.n_frames = 3;
            c.learning_rate = 3e-4;
        } else {
            c.n_frames = 7;
            c.learning_rate = 1e-4;
        }
        return c;
    }

    void validate() const {
        if (n_frames < 3 || n_frames % 2 == 0)
            throw ConfigError("config: n_frames must be odd and >= 3");
        if (task == Task::Interpolation && n_frames != 3)
            throw ConfigError("config: interpolation uses n_frames = 3");
        if (use_mask && task != Task::Interpolation)
            throw ConfigError("config: use_mask applies to interpolation only");
        if (learning_rate <= 0) throw ConfigError("config: learning_rate must be positive");
        if (epochs <= 0) throw ConfigError("config: epochs must be positive");
        if (batch_size != 1) throw ConfigError("config: batch_size must be 1");
        if (weight_decay < 0) throw ConfigError("config: weight_decay must be non-negative");
        if (task == Task::SuperResolution && sr_factor < 2)
            throw ConfigError("config: sr_factor must be >= 2");
        if (max_steps < 0) throw ConfigError("config: max_steps must be non-negative");
        if (flow.levels < 1 || flow.kernel % 2 == 0)
            throw ConfigError("config: flow net needs >= 1 level and an odd kernel");
    }
};

// ---------------------------------------------------------------------------
// Task model: flow net(s) + optional mask net + processing head
// ---------------------------------------------------------------------------

template <typename T>
struct TaskModel {
    TaskConfig cfg;
    FlowNetParams<T> flow_a;                  // interpolation: v21 net; else the shared net
    std::optional<FlowNetParams<T>> flow_b;   // interpolation: v23 net
    std::optional<MaskNetParams<T>> mask;
    HeadStack<T> head;
    ParamSet<T> flow_params, mask_params, head_params;
    ParamSet<T> params;  // all of the above, stable order

    static TaskModel init(const TaskConfig& cfg) {
        cfg.validate();
        TaskModel m;
        m.cfg = cfg;
        std::mt19937 rng(
            static_cast<uint32_t>(detail::splitmix64(cfg.seed ^ 0x746f666cULL)));
        m.flow_a = FlowNetParams<T>::init(cfg.flow, rng);
        switch (cfg.task) {
            case Task::Interpolation:
                m.flow_b = FlowNetParams<T>::init(cfg.flow, rng);
                if (cfg.use_mask) m.mask = MaskNetParams<T>::init(cfg.mask, rng);
                m.head = make_interp_head<T>(cfg.use_mask, rng, cfg.flow.frame_channels);
                m.flow_a.register_params(m.flow_params, "flow21");
                m.flow_b->register_params(m.flow_params, "flow23");
                break;
            case Task::Denoising:
                m.head = make_denoise_head<T>(cfg.n_frames, rng, cfg.flow.frame_channels);
                m.flow_a.register_params(m.flow_params, "flow");
                break;
            case Task::SuperResolution:
                m.head = make_sr_head<T>(cfg.n_frames, rng, cfg.flow.frame_channels);
                m.flow_a.register_params(m.flow_params, "flow");
                break;
        }
        if (m.mask) m.mask->register_params(m.mask_params, "mask");
        m.head.register_params(m.head_params, "head");
        m.params.merge(m.flow_params, "");
        m.params.merge(m.mask_params, "");
        m.params.merge(m.head_params, "");
        return m;
    }
};

// ---------------------------------------------------------------------------
// Forward pass / inference
// ---------------------------------------------------------------------------

namespace detail {

// Pad all frames so extents divide the pyramid stride; remembers the crop.
template <typename T>
std::vector<Tensor<T>> pad_frames(const std::vector<Tensor<T>>& frames, int m, int& h, int& w) {
    h = frames.front().dim(1);
    w = frames.front().dim(2);
    std::vector<Tensor<T>> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        check(f.dim(1) == h && f.dim(2) == w, "forward: frames must share extents");
        out.push_back(pad_to_multiple(f, m));
    }
    return out;
}

}  // namespace detail

// Run the task model on input frames (degraded domain). Interpolation uses
// the first and last frame; denoising consumes all N; super-resolution
// receives low-resolution frames and returns the upscaled reference.
template <typename T>
Tensor<T> forward_model(const TaskModel<T>& model, const std::vector<Tensor<T>>& frames) {
    const auto& cfg = model.cfg;
    if (cfg.task == Task::Interpolation) {
        check(frames.size() == 2 || frames.size() == 3,
              "forward: interpolation expects 2 or 3 frames, got " +
                  std::to_string(frames.size()));
    } else {
        check(static_cast<int>(frames.size()) == cfg.n_frames,
              "forward: expected " + std::to_string(cfg.n_frames) + " frames, got " +
                  std::to_string(frames.size()));
    }
    int stride = cfg.flow.pad_multiple();

    if (cfg.task == Task::Interpolation) {
        int h = 0, w = 0;
        auto padded = detail::pad_frames<T>({frames.front(), frames.back()}, stride, h, w);
        auto [v21, v23] = estimate_interp_flows(padded[0], padded[1], model.flow_a,
                                                *model.flow_b);
        auto i21 = bilinear_warp(padded[0], v21);
        auto i23 = bilinear_warp(padded[1], v23);
        Tensor<T> out;
        if (cfg.use_mask) {
            auto [m21, m23] = estimate_masks(v21, v23, *model.mask);
            auto [p21, p23] = apply_masks(i21, i23, m21, m23);
            out = interp_head(i21, i23, &p21, &p23, model.head, true);
        } else {
            const Tensor<T>* none = nullptr;
            out = interp_head(i21, i23, none, none, model.head, false);
        }
        return crop(out, h, w);
    }

    // Denoising / super-resolution: register every non-reference frame to
    // the reference with the shared flow net.
    std::vector<Tensor<T>> inputs = frames;
    if (cfg.task == Task::SuperResolution)
        for (auto& f : inputs) f = bicubic_resize(f, static_cast<double>(cfg.sr_factor));
    int h = 0, w = 0;
    auto padded = detail::pad_frames(inputs, stride, h, w);
    const auto& ref = padded[static_cast<size_t>(cfg.ref_index())];
    std::vector<Tensor<T>> registered;
    registered.reserve(padded.size());
    for (int k = 0; k < static_cast<int>(padded.size()); ++k) {
        if (k == cfg.ref_index()) {
            registered.push_back(ref);
        } else {
            auto flow = estimate_flow(ref, padded[static_cast<size_t>(k)], model.flow_a);
            registered.push_back(bilinear_warp(padded[static_cast<size_t>(k)], flow));
        }
    }
    auto out = cfg.task == Task::Denoising
                   ? denoise_head(registered, model.head)
                   : sr_head(registered, cfg.ref_index(), model.head);
    return crop(out, h, w);
}

// Pure inference: no graph, output clamped to the image range.
template <typename T>
Tensor<T> infer(const TaskModel<T>& model, const VideoClip<T>& clip) {
    NoGradGuard guard;
    auto out = forward_model(model, clip.frames).detach();
    auto d = out.mutable_data();
    for (auto& v : d) v = std::clamp(v, T(0), T(1));
    return out;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct StepRecord {
    int64_t step = 0;
    std::string phase;
    double loss = 0;
};

using StepCallback = std::function<void(const StepRecord&)>;

namespace detail {

inline std::vector<size_t> epoch_order(size_t n, uint64_t seed, int64_t epoch) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937 rng(static_cast<uint32_t>(
        splitmix64(splitmix64(seed ^ 0x65706f63ULL) + static_cast<uint64_t>(epoch))));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

template <typename T>
void record_step(std::vector<StepRecord>& log, const StepCallback& cb, int64_t step,
                 const char* phase, T loss) {
    StepRecord r{step, phase, static_cast<double>(loss)};
    log.push_back(r);
    if (cb) cb(r);
}

// Frames feeding the flow net during pretraining. Phase 1 uses the clean
// frames; phase 2 the degraded inputs (upsampled for super-resolution so
// they live on the ground-truth flow grid).
template <typename T>
std::vector<Tensor<T>> flow_input_frames(const TaskModel<T>& model, const VideoClip<T>& clip,
                                         bool degraded) {
    if (!degraded && !clip.clean_frames.empty()) return clip.clean_frames;
    if (model.cfg.task == Task::SuperResolution && degraded) {
        std::vector<Tensor<T>> up;
        up.reserve(clip.frames.size());
        for (const auto& f : clip.frames)
            up.push_back(bicubic_resize(f, static_cast<double>(model.cfg.sr_factor)));
        return up;
    }
    return clip.frames;
}

}  // namespace detail

// Stage 1: supervised flow pretraining on ground-truth flows (L1).
// `degraded_inputs` selects the second fine-tuning phase for denoising and
// super-resolution; interpolation trains on its clean triplets directly.
template <typename T>
std::vector<StepRecord> pretrain_flow(TaskModel<T>& model, const std::vector<VideoClip<T>>& corpus,
                                      bool degraded_inputs = false,
                                      const StepCallback& cb = {}) {
    if (corpus.empty()) throw ConfigError("pretrain_flow: empty corpus");
    for (const auto& clip : corpus)
        if (clip.gt_flows.size() != static_cast<size_t>(clip.frame_count() - 1))
            throw ConfigError("pretrain_flow: corpus lacks ground-truth flows");
    AdamState<T> opt;
    opt.lr = static_cast<T>(model.cfg.learning_rate);
    opt.weight_decay = static_cast<T>(model.cfg.weight_decay);
    std::vector<StepRecord> log;
    const char* phase = degraded_inputs ? "pretrain-flow-degraded" : "pretrain-flow";
    int64_t step = 0;
    for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
        for (size_t ci : detail::epoch_order(corpus.size(), model.cfg.seed, epoch)) {
            const auto& clip = corpus[ci];
            auto inputs = detail::flow_input_frames(model, clip, degraded_inputs);
            const auto& ref = inputs[static_cast<size_t>(clip.ref_index)];
            Tensor<T> loss;
            size_t fi = 0;
            for (int k = 0; k < clip.frame_count(); ++k) {
                if (k == clip.ref_index) continue;
                Tensor<T> pred;
                if (model.cfg.task == Task::Interpolation) {
                    auto& net = k < clip.ref_index ? model.flow_a : *model.flow_b;
                    pred = estimate_flow(inputs.front(), inputs.back(), net);
                } else {
                    pred = estimate_flow(ref, inputs[static_cast<size_t>(k)], model.flow_a);
                }
                auto term = l1_loss(pred, clip.gt_flows[fi++]);
                loss = loss.defined() ? add(loss, term) : term;
            }
            loss = scale(loss, static_cast<T>(1.0 / (clip.frame_count() - 1)));
            model.params.zero_grad();
            backward(loss);
            adam_step(model.flow_params, opt);
            detail::record_step(log, cb, step, phase, loss.item());
            if (++step == model.cfg.max_steps && model.cfg.max_steps > 0) return log;
        }
    }
    return log;
}

// Stage 2: fit the mask net to the corpus occlusion masks with flows from
// the frozen flow net.
template <typename T>
std::vector<StepRecord> pretrain_mask(TaskModel<T>& model, const std::vector<VideoClip<T>>& corpus,
                                      const StepCallback& cb = {}) {
    if (!model.mask) throw ConfigError("pretrain_mask: model has no mask network");
    if (corpus.empty()) throw ConfigError("pretrain_mask: empty corpus");
    for (const auto& clip : corpus)
        if (clip.gt_masks.size() < 2)
            throw ConfigError("pretrain_mask: corpus lacks occlusion masks");
    AdamState<T> opt;
    opt.lr = static_cast<T>(model.cfg.learning_rate);
    opt.weight_decay = static_cast<T>(model.cfg.weight_decay);
    std::vector<StepRecord> log;
    int64_t step = 0;
    for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
        for (size_t ci : detail::epoch_order(corpus.size(), model.cfg.seed + 1, epoch)) {
            const auto& clip = corpus[ci];
            Tensor<T> v21, v23;
            {
                NoGradGuard guard;  // flow net is frozen in this stage
                std::tie(v21, v23) = estimate_interp_flows(clip.frames.front(),
                                                           clip.frames.back(), model.flow_a,
                                                           *model.flow_b);
            }
            auto [m21, m23] = estimate_masks(v21, v23, *model.mask);
            auto loss = scale(add(l1_loss(m21, clip.gt_masks[0]), l1_loss(m23, clip.gt_masks[1])),
                              T(0.5));
            model.params.zero_grad();
            backward(loss);
            adam_step(model.mask_params, opt);
            detail::record_step(log, cb, step, "pretrain-mask", loss.item());
            if (++step == model.cfg.max_steps && model.cfg.max_steps > 0) return log;
        }
    }
    return log;
}

// Stage 3: joint end-to-end training on the task L1 loss. No ground-truth
// flow is read here — supervision is the clean target frame only. With
// cfg.freeze_flow the flow parameters are excluded from the graph and the
// optimizer (the "fixed flow" ablation).
template <typename T>
std::vector<StepRecord> train_joint(TaskModel<T>& model, const std::vector<VideoClip<T>>& corpus,
                                    const StepCallback& cb = {}) {
    if (corpus.empty()) throw ConfigError("train_joint: empty corpus");
    for (const auto& clip : corpus)
        if (!clip.gt_target.defined())
            throw ConfigError("train_joint: corpus lacks clean target frames");
    ParamSet<T> trainable;
    if (!model.cfg.freeze_flow) trainable.merge(model.flow_params, "");
    trainable.merge(model.mask_params, "");
    trainable.merge(model.head_params, "");
    if (model.cfg.freeze_flow)
        for (size_t i = 0; i < model.flow_params.size(); ++i)
            model.flow_params.tensor(i).set_requires_grad(false);
    AdamState<T> opt;
    opt.lr = static_cast<T>(model.cfg.learning_rate);
    opt.weight_decay = static_cast<T>(model.cfg.weight_decay);
    std::vector<StepRecord> log;
    int64_t step = 0;
    for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
        for (size_t ci : detail::epoch_order(corpus.size(), model.cfg.seed + 2, epoch)) {
            const auto& clip = corpus[ci];
            auto out = forward_model(model, clip.frames);
            auto loss = l1_loss(out, clip.gt_target);
            model.params.zero_grad();
            backward(loss);
            adam_step(trainable, opt);
            detail::record_step(log, cb, step, "train-joint", loss.item());
            if (++step == model.cfg.max_steps && model.cfg.max_steps > 0) return log;
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Evaluation helpers and analytic baselines
// ---------------------------------------------------------------------------

struct EvalSummary {
    double psnr_mean = 0;
    double ssim_mean = 0;
    std::vector<double> psnr_per_clip;
    std::vector<double> ssim_per_clip;
};

template <typename T>
EvalSummary evaluate(const TaskModel<T>& model, const std::vector<VideoClip<T>>& corpus) {
    if (corpus.empty()) throw ConfigError("evaluate: empty corpus");
    EvalSummary s;
    for (const auto& clip : corpus) {
        if (!clip.gt_target.defined()) throw ConfigError("evaluate: clip lacks a target frame");
        auto out = infer(model, clip);
        s.psnr_per_clip.push_back(psnr(out, clip.gt_target));
        s.ssim_per_clip.push_back(ssim(out, clip.gt_target));
    }
    for (double v : s.psnr_per_clip) s.psnr_mean += v;
    for (double v : s.ssim_per_clip) s.ssim_mean += v;
    s.psnr_mean /= static_cast<double>(s.psnr_per_clip.size());
    s.ssim_mean /= static_cast<double>(s.ssim_per_clip.size());
    return s;
}

// Mean end-point error of the flow net against ground truth.
template <typename T>
double mean_epe(const TaskModel<T>& model, const std::vector<VideoClip<T>>& corpus,
                bool degraded_inputs = false) {
    NoGradGuard guard;
    double total = 0;
    int64_t count = 0;
    for (const auto& clip : corpus) {
        auto inputs = detail::flow_input_frames(model, clip, degraded_inputs);
        const auto& ref = inputs[static_cast<size_t>(clip.ref_index)];
        size_t fi = 0;
        for (int k = 0; k < clip.frame_count(); ++k) {
            if (k == clip.ref_index) continue;
            Tensor<T> pred;
            if (model.cfg.task == Task::Interpolation) {
                auto& net = k < clip.ref_index ? model.flow_a : *model.flow_b;
                pred = estimate_flow(inputs.front(), inputs.back(), net);
            } else {
                pred = estimate_flow(ref, inputs[static_cast<size_t>(k)], model.flow_a);
            }
            const auto& gt = clip.gt_flows[fi++];
            size_t plane = static_cast<size_t>(gt.dim(1)) * gt.dim(2);
            for (size_t i = 0; i < plane; ++i) {
                double du = static_cast<double>(pred.data()[i]) - gt.data()[i];
                double dv = static_cast<double>(pred.data()[plane + i]) - gt.data()[plane + i];
                total += std::hypot(du, dv);
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

// Ground-truth-flow baselines, built from the same warp/average primitives
// as the model: warp the neighbors by the true flows and average.
template <typename T>
Tensor<T> gt_flow_baseline(const VideoClip<T>& clip) {
    check(!clip.gt_flows.empty(), "gt_flow_baseline: clip lacks ground-truth flows");
    NoGradGuard guard;
    Tensor<T> acc;
    size_t fi = 0;
    int terms = 0;
    for (int k = 0; k < clip.frame_count(); ++k) {
        if (k == clip.ref_index) continue;
        auto warped = bilinear_warp(clip.frames[static_cast<size_t>(k)], clip.gt_flows[fi++]);
        acc = acc.defined() ? add(acc, warped) : warped;
        ++terms;
    }
    auto out = scale(acc, static_cast<T>(1.0 / terms)).detach();
    auto d = out.mutable_data();
    for (auto& v : d) v = std::clamp(v, T(0), T(1));
    return out;
}

}  // namespace toflow
