#include <catch2/catch_amalgamated.hpp>

#include "toflow/pipeline.hpp"

using namespace toflow;

namespace {

// Small-but-real configuration: 2-level pyramid, 3x3 kernels, thin stacks.
TaskConfig tiny_config(Task task, bool use_mask = false) {
    TaskConfig cfg = TaskConfig::defaults(task);
    cfg.flow.levels = 2;
    cfg.flow.kernel = 3;
    cfg.flow.hidden = {6};
    cfg.mask.levels = 2;
    cfg.mask.kernel = 3;
    cfg.mask.hidden = {6};
    cfg.use_mask = use_mask;
    cfg.seed = 7;
    return cfg;
}

std::vector<VideoClip<float>> tiny_interp_corpus(int count, uint64_t seed, int speed = 2) {
    TriangleToyParams p;
    p.width = 32;
    p.height = 32;
    p.sprite_size = 12;
    p.max_speed = speed;
    p.count = count;
    p.seed = seed;
    return gen_triangle_toy<float>(p);
}

bool same_bits(const Tensorf& a, const Tensorf& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("TaskConfig defaults follow the task") {
    auto interp = TaskConfig::defaults(Task::Interpolation);
    REQUIRE(interp.n_frames == 3);
    REQUIRE(interp.learning_rate == 3e-4);
    REQUIRE(interp.epochs == 15);
    REQUIRE(interp.batch_size == 1);
    REQUIRE(interp.weight_decay == 1e-4);
    auto den = TaskConfig::defaults(Task::Denoising);
    REQUIRE(den.n_frames == 7);
    REQUIRE(den.learning_rate == 1e-4);
    REQUIRE(den.ref_index() == 3);
}

TEST_CASE("TaskConfig validation rejects bad settings") {
    auto cfg = TaskConfig::defaults(Task::Interpolation);
    cfg.n_frames = 4;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TaskConfig::defaults(Task::Denoising);
    cfg.use_mask = true;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TaskConfig::defaults(Task::Interpolation);
    cfg.batch_size = 2;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TaskConfig::defaults(Task::SuperResolution);
    cfg.sr_factor = 1;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("model assembly registers the expected parameter groups") {
    auto model = TaskModel<float>::init(tiny_config(Task::Interpolation, true));
    REQUIRE(model.params.contains("flow21.level0.conv0.weight"));
    REQUIRE(model.params.contains("flow23.level1.conv1.bias"));
    REQUIRE(model.params.contains("mask.level0.conv0.weight"));
    REQUIRE(model.params.contains("head.conv0.weight"));
    REQUIRE(model.params.size() ==
            model.flow_params.size() + model.mask_params.size() + model.head_params.size());

    auto den = TaskModel<float>::init(tiny_config(Task::Denoising));
    REQUIRE(den.head.in_channels() == 21);
    REQUIRE_FALSE(den.flow_b.has_value());
    REQUIRE(den.params.contains("flow.level0.conv0.weight"));
}

TEST_CASE("untrained interpolation model outputs the frame average") {
    auto model = TaskModel<float>::init(tiny_config(Task::Interpolation));
    auto clips = tiny_interp_corpus(1, 3);
    const auto& clip = clips[0];
    auto out = infer(model, clip);
    REQUIRE(out.shape() == clip.frames[1].shape());
    // zero-init flows and head residual: output = (frame1 + frame3) / 2
    for (int64_t i = 0; i < out.numel(); ++i)
        REQUIRE(out.data()[i] ==
                0.5f * (clip.frames[0].data()[i] + clip.frames[2].data()[i]));
}

TEST_CASE("inference pads odd resolutions and is bit-deterministic") {
    auto cfg = tiny_config(Task::Interpolation);
    auto model = TaskModel<float>::init(cfg);
    VideoClip<float> clip;
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (int f = 0; f < 3; ++f) {
        std::vector<float> d(static_cast<size_t>(3) * 17 * 23);
        for (auto& v : d) v = u(rng);
        clip.frames.push_back(Tensorf::from_data({3, 17, 23}, std::move(d)));
    }
    clip.ref_index = 1;
    auto a = infer(model, clip);
    auto b = infer(model, clip);
    REQUIRE(a.shape() == Shape{3, 17, 23});
    REQUIRE(same_bits(a, b));
}

TEST_CASE("forward_model rejects arity mismatches") {
    auto model = TaskModel<float>::init(tiny_config(Task::Denoising));
    std::vector<Tensorf> frames(3, Tensorf::zeros({3, 16, 16}));
    REQUIRE_THROWS_AS(forward_model(model, frames), ShapeError);
}

TEST_CASE("pretrain_flow first-step loss equals the mean ground-truth magnitude") {
    auto cfg = tiny_config(Task::Interpolation);
    cfg.max_steps = 1;
    auto model = TaskModel<float>::init(cfg);
    auto corpus = tiny_interp_corpus(3, 11);
    auto log = pretrain_flow(model, corpus);
    REQUIRE(log.size() == 1);
    // zero-init network predicts the zero field on the first step
    size_t first = detail::epoch_order(corpus.size(), cfg.seed, 0)[0];
    double expect = 0;
    for (const auto& f : corpus[first].gt_flows) {
        double m = 0;
        for (float v : f.data()) m += std::abs(v);
        expect += m / static_cast<double>(f.numel());
    }
    expect /= 2.0;
    REQUIRE(log[0].loss == Catch::Approx(expect).margin(1e-6));
}

TEST_CASE("pretrain_flow is deterministic and reduces the loss") {
    auto cfg = tiny_config(Task::Interpolation);
    cfg.max_steps = 60;
    cfg.learning_rate = 2e-3;
    auto corpus = tiny_interp_corpus(6, 13);

    auto m1 = TaskModel<float>::init(cfg);
    auto log1 = pretrain_flow(m1, corpus);
    auto m2 = TaskModel<float>::init(cfg);
    auto log2 = pretrain_flow(m2, corpus);
    REQUIRE(log1.size() == log2.size());
    for (size_t i = 0; i < log1.size(); ++i) REQUIRE(log1[i].loss == log2[i].loss);
    bool same_params = save_checkpoint(m1.params) == save_checkpoint(m2.params);
    REQUIRE(same_params);

    double early = 0, late = 0;
    for (size_t i = 0; i < 10; ++i) early += log1[i].loss;
    for (size_t i = log1.size() - 10; i < log1.size(); ++i) late += log1[i].loss;
    REQUIRE(late < early);
}

TEST_CASE("pretrain_flow rejects corpora without ground truth") {
    auto model = TaskModel<float>::init(tiny_config(Task::Interpolation));
    auto corpus = tiny_interp_corpus(1, 15);
    corpus[0].gt_flows.clear();
    REQUIRE_THROWS_AS(pretrain_flow(model, corpus), ConfigError);
}

TEST_CASE("pretrain_mask fits a degenerate all-ones oracle corpus") {
    auto cfg = tiny_config(Task::Interpolation, true);
    cfg.learning_rate = 1e-2;
    cfg.max_steps = 500;
    cfg.epochs = 1000;
    auto model = TaskModel<float>::init(cfg);
    auto corpus = tiny_interp_corpus(2, 17);
    for (auto& clip : corpus)
        for (auto& m : clip.gt_masks) m = Tensorf::filled(m.shape(), 1.0f);
    auto log = pretrain_mask(model, corpus);
    REQUIRE(log.back().loss < 0.05);  // L1 against all-ones = MAE
    // trend: mean of the last quarter below the first quarter
    double head = 0, tail = 0;
    size_t q = log.size() / 4;
    for (size_t i = 0; i < q; ++i) head += log[i].loss;
    for (size_t i = log.size() - q; i < log.size(); ++i) tail += log[i].loss;
    REQUIRE(tail < head);
}

TEST_CASE("pretrain_mask requires an enabled mask network") {
    auto model = TaskModel<float>::init(tiny_config(Task::Interpolation, false));
    auto corpus = tiny_interp_corpus(1, 19);
    REQUIRE_THROWS_AS(pretrain_mask(model, corpus), ConfigError);
}

TEST_CASE("joint training moves flow parameters unless frozen") {
    auto cfg = tiny_config(Task::Interpolation);
    cfg.max_steps = 4;
    auto corpus = tiny_interp_corpus(2, 21);

    auto model = TaskModel<float>::init(cfg);
    auto before = save_checkpoint(model.flow_params);
    train_joint(model, corpus);
    REQUIRE(save_checkpoint(model.flow_params) != before);

    cfg.freeze_flow = true;
    auto frozen = TaskModel<float>::init(cfg);
    auto fbefore = save_checkpoint(frozen.flow_params);
    auto hbefore = save_checkpoint(frozen.head_params);
    train_joint(frozen, corpus);
    REQUIRE(save_checkpoint(frozen.flow_params) == fbefore);
    REQUIRE(save_checkpoint(frozen.head_params) != hbefore);
}

TEST_CASE("joint training is deterministic under a fixed seed") {
    auto cfg = tiny_config(Task::Interpolation);
    cfg.max_steps = 6;
    auto corpus = tiny_interp_corpus(2, 23);
    auto a = TaskModel<float>::init(cfg);
    auto b = TaskModel<float>::init(cfg);
    auto la = train_joint(a, corpus);
    auto lb = train_joint(b, corpus);
    for (size_t i = 0; i < la.size(); ++i) REQUIRE(la[i].loss == lb[i].loss);
    bool same_params = save_checkpoint(a.params) == save_checkpoint(b.params);
    REQUIRE(same_params);
}

TEST_CASE("checkpoints restore a model exactly; wrong task is rejected by name") {
    auto cfg = tiny_config(Task::Interpolation);
    cfg.max_steps = 3;
    auto corpus = tiny_interp_corpus(2, 25);
    auto model = TaskModel<float>::init(cfg);
    train_joint(model, corpus);
    auto bytes = save_checkpoint(model.params);

    auto restored = TaskModel<float>::init(cfg);
    load_checkpoint(bytes, restored.params);
    REQUIRE(same_bits(infer(model, corpus[0]), infer(restored, corpus[0])));

    auto cfg2 = tiny_config(Task::Denoising);
    auto other = TaskModel<float>::init(cfg2);
    REQUIRE_THROWS_AS(load_checkpoint(bytes, other.params), FormatError);
}

TEST_CASE("evaluate aggregates per-clip metrics; gt baseline is exact on static clips") {
    auto cfg = tiny_config(Task::Interpolation);
    auto model = TaskModel<float>::init(cfg);
    auto corpus = tiny_interp_corpus(3, 27);
    auto summary = evaluate(model, corpus);
    REQUIRE(summary.psnr_per_clip.size() == 3);
    REQUIRE(summary.ssim_per_clip.size() == 3);
    REQUIRE(summary.psnr_mean > 0);

    TriangleToyParams p;
    p.width = 32;
    p.height = 32;
    p.sprite_size = 12;
    p.count = 1;
    p.velocity = {{0, 0}};
    auto still = gen_triangle_toy<float>(p)[0];
    auto base = gt_flow_baseline(still);
    REQUIRE(same_bits(base, still.frames[1]));
}

TEST_CASE("denoising and super-resolution forwards produce target-shaped output") {
    auto dcfg = tiny_config(Task::Denoising);
    auto dmodel = TaskModel<float>::init(dcfg);
    BoxNoiseToyParams bp;
    bp.scene.width = 20;
    bp.scene.height = 20;
    bp.scene.sprite_size = 6;
    bp.scene.max_speed = 1;
    bp.scene.count = 1;
    auto dclip = gen_boxnoise_toy<float>(bp)[0];
    auto dout = infer(dmodel, dclip);
    REQUIRE(dout.shape() == dclip.gt_target.shape());

    auto scfg = tiny_config(Task::SuperResolution);
    scfg.n_frames = 3;
    scfg.sr_factor = 2;
    auto smodel = TaskModel<float>::init(scfg);
    TriangleToyParams p;
    p.width = 32;
    p.height = 32;
    p.sprite_size = 12;
    p.max_speed = 2;
    p.count = 1;
    p.textured_background = true;
    auto hr = gen_triangle_toy<float>(p)[0];
    DegradationSpec spec;
    spec.kind = DegradationSpec::Kind::Downsample;
    spec.factor = 2;
    auto lr_clip = degrade(hr, spec, 0);
    auto sout = infer(smodel, lr_clip);
    REQUIRE(sout.shape() == Shape{3, 32, 32});
    // zero-init SR model: output = clamped bicubic upsample of the reference
    auto up = bicubic_resize(lr_clip.frames[1], 2.0);
    auto ud = up.mutable_data();
    for (auto& v : ud) v = std::clamp(v, 0.0f, 1.0f);
    REQUIRE(same_bits(sout, up));
}
