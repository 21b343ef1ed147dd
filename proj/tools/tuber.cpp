// Command-line entry point: dataset generation, training, evaluation,
// single-clip inference, gradient diagnostics, and attention benchmarks.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tuber/attention.hpp"
#include "tuber/boxes.hpp"
#include "tuber/checkpoint.hpp"
#include "tuber/config.hpp"
#include "tuber/dataset_io.hpp"
#include "tuber/errors.hpp"
#include "tuber/eval.hpp"
#include "tuber/grad_check.hpp"
#include "tuber/heads.hpp"
#include "tuber/inference.hpp"
#include "tuber/matching.hpp"
#include "tuber/model.hpp"
#include "tuber/ops.hpp"
#include "tuber/postprocess.hpp"
#include "tuber/runconfig.hpp"
#include "tuber/synth.hpp"
#include "tuber/trainer.hpp"
#include "tuber/transformer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tuber;

namespace {

// TUBER_SEED overrides both the run seed and the generator seed so a whole
// pipeline can be re-seeded from the environment.
void apply_seed_override(RunConfig& cfg) {
    const char* text = std::getenv("TUBER_SEED");
    if (!text || !*text) return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text, &end, 10);
    if (!end || *end != '\0') throw ConfigError(std::string("TUBER_SEED is not an integer: ") + text);
    cfg.seed = v;
    cfg.data.seed = v;
}

json report_json(const EvalReport& rep) {
    json per = json::array();
    for (const auto& c : rep.per_class) {
        per.push_back({{"class_id", c.class_id},
                       {"ap", c.ap},
                       {"gt_count", c.gt_count},
                       {"tp", c.tp},
                       {"fp", c.fp},
                       {"fn", c.fn}});
    }
    return {{"iou_threshold", rep.iou_threshold}, {"map", rep.map}, {"per_class", per}};
}

TubeRModelT<float> model_from_checkpoint(const Checkpoint& ckpt, RunConfig& cfg_out) {
    cfg_out = run_config_from_json(ckpt.config_json);
    TubeRModelT<float> model(cfg_out.model, 0);
    restore_params(model.params(), ckpt);
    return model;
}

void check_dataset_compat(const TubeRConfig& model_cfg, const SynthConfig& data_cfg) {
    if (model_cfg.label_count != data_cfg.class_count + 1) {
        throw DataError("label space mismatch: checkpoint has " +
                        std::to_string(model_cfg.label_count) + " labels, dataset needs " +
                        std::to_string(data_cfg.class_count + 1));
    }
    if (model_cfg.t_in != data_cfg.t_in || model_cfg.t_out != data_cfg.t_out) {
        throw DataError("clip geometry mismatch between checkpoint and dataset");
    }
}

// ---------------------------------------------------------------- commands

struct GenerateArgs {
    std::string config, out;
    int64_t count = 0;
    bool force = false;
    int workers = 1;
};

int cmd_generate_data(const GenerateArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    apply_seed_override(cfg);
    if (fs::exists(a.out) && !fs::is_empty(a.out) && !a.force) {
        throw DataError("output directory not empty: " + a.out + " (pass --force to overwrite)");
    }
    write_dataset(cfg.data, a.count, a.out, a.workers);

    // The histogram is recounted from the files just written, not from
    // in-memory state.
    const Dataset ds = load_dataset(a.out);
    std::map<int64_t, int64_t> histogram;
    for (int64_t c = 0; c < cfg.data.class_count; ++c) histogram[c] = 0;
    for (int64_t i = 0; i < ds.size(); ++i) {
        for (const auto& tube : ds.sample(i).tubes) ++histogram[tube.class_id];
    }
    std::printf("wrote %lld samples to %s\n", static_cast<long long>(ds.size()), a.out.c_str());
    std::printf("seed %llu  config hash %llu\n", static_cast<unsigned long long>(cfg.data.seed),
                static_cast<unsigned long long>(synth_config_hash(cfg.data)));
    for (const auto& [cls, n] : histogram) {
        std::printf("class %lld: %lld tubes\n", static_cast<long long>(cls),
                    static_cast<long long>(n));
    }
    return 0;
}

struct TrainArgs {
    std::string config, data, out, resume;
};

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    apply_seed_override(cfg);
    const Dataset ds = load_dataset(a.data);
    Trainer trainer(cfg, ds, a.out);
    trainer.set_epoch_callback([](const EpochLog& row) {
        std::printf("epoch %lld  step %lld  train_loss %.6f  val_frame_map %.4f  lr %.3g\n",
                    static_cast<long long>(row.epoch), static_cast<long long>(row.step),
                    row.train_loss, row.val_frame_map, row.lr);
        std::fflush(stdout);
    });
    if (!a.resume.empty()) trainer.resume(a.resume);
    trainer.train();
    std::printf("done: best val frame-mAP %.4f, checkpoints in %s\n",
                trainer.state().best_val_map, a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, report;
    double iou = 0.5;
    double link_iou = 0.5;
    bool no_switch = false;
    int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    RunConfig cfg;
    const TubeRModelT<float> model = model_from_checkpoint(ckpt, cfg);
    const Dataset ds = load_dataset(a.data);
    check_dataset_compat(cfg.model, ds.config());

    const DatasetEval ev = evaluate_dataset(model, ds, 0, ds.size(), !a.no_switch, a.iou,
                                            a.link_iou, a.workers);
    std::printf("clips %lld  detections %lld  switch %s\n",
                static_cast<long long>(ev.clip_count), static_cast<long long>(ev.detection_count),
                a.no_switch ? "off" : "on");
    std::printf("frame-mAP@%.2f %.4f\n", a.iou, ev.frame.map);
    std::printf("video-mAP@0.2 %.4f  @0.5 %.4f  avg[0.5:0.95] %.4f\n", ev.video.at_02.map,
                ev.video.at_05.map, ev.video.avg_05_095);

    if (!a.report.empty()) {
        const json doc = {{"clip_count", ev.clip_count},
                          {"detection_count", ev.detection_count},
                          {"use_switch", !a.no_switch},
                          {"frame_map", report_json(ev.frame)},
                          {"video_map",
                           {{"at_02", report_json(ev.video.at_02)},
                            {"at_05", report_json(ev.video.at_05)},
                            {"avg_05_095", ev.video.avg_05_095}}}};
        std::ofstream out(a.report, std::ios::trunc);
        if (!out) throw DataError("cannot write report file: " + a.report);
        out << doc.dump(2) << "\n";
        std::printf("report written to %s\n", a.report.c_str());
    }
    return 0;
}

json detections_json(const std::vector<TubeletDetection>& dets, int64_t video_id) {
    json tubelets = json::array();
    for (const auto& d : dets) {
        json frames = json::array();
        for (size_t k = 0; k < d.frames.size(); ++k) {
            frames.push_back({{"t", d.frames[k] - d.clip_index * static_cast<int64_t>(d.frames.size())},
                              {"box", d.boxes[k]},
                              {"active", static_cast<bool>(d.active[k])}});
        }
        tubelets.push_back(
            {{"class_id", d.class_id}, {"score", d.score}, {"frames", std::move(frames)}});
    }
    return {{"video_id", video_id},
            {"clips", json::array({{{"clip_index", 0}, {"tubelets", std::move(tubelets)}}})}};
}

// 8-bit P6 with 1px box outlines burned in; one image per annotated frame.
void dump_frames(const Tensor& clip, const std::vector<TubeletDetection>& dets,
                 const TubeRConfig& cfg, const std::string& dir) {
    static const uint8_t palette[6][3] = {{230, 60, 60},  {60, 200, 60},  {60, 90, 230},
                                          {230, 200, 50}, {200, 60, 200}, {60, 220, 220}};
    fs::create_directories(dir);
    const int64_t height = clip.dim(1);
    const int64_t width = clip.dim(2);
    const int64_t stride = cfg.temporal_stride();
    const auto vals = clip.values();
    for (int64_t k = 0; k < cfg.t_out; ++k) {
        const int64_t frame = k * stride;
        std::vector<uint8_t> rgb(static_cast<size_t>(height * width * 3));
        const size_t base = static_cast<size_t>(frame * height * width * 3);
        for (size_t p = 0; p < rgb.size(); ++p) {
            const float v = std::min(1.0f, std::max(0.0f, vals[base + p]));
            rgb[p] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
        auto draw = [&](int64_t x, int64_t y, const uint8_t* color) {
            if (x < 0 || x >= width || y < 0 || y >= height) return;
            const size_t at = static_cast<size_t>((y * width + x) * 3);
            rgb[at] = color[0];
            rgb[at + 1] = color[1];
            rgb[at + 2] = color[2];
        };
        for (const auto& d : dets) {
            if (k >= static_cast<int64_t>(d.active.size()) || !d.active[k]) continue;
            const uint8_t* color = palette[d.class_id % 6];
            const auto& b = d.boxes[k];
            const int64_t x0 = std::llround((b[0] - b[2] / 2) * static_cast<double>(width));
            const int64_t x1 = std::llround((b[0] + b[2] / 2) * static_cast<double>(width));
            const int64_t y0 = std::llround((b[1] - b[3] / 2) * static_cast<double>(height));
            const int64_t y1 = std::llround((b[1] + b[3] / 2) * static_cast<double>(height));
            for (int64_t x = x0; x <= x1; ++x) {
                draw(x, y0, color);
                draw(x, y1, color);
            }
            for (int64_t y = y0; y <= y1; ++y) {
                draw(x0, y, color);
                draw(x1, y, color);
            }
        }
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03lld.ppm", static_cast<long long>(k));
        std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write frame image in " + dir);
        out << "P6\n" << width << " " << height << "\n255\n";
        out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    }
}

struct InferArgs {
    std::string ckpt, clip, out, dump_dir;
};

int cmd_infer(const InferArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    RunConfig cfg;
    const TubeRModelT<float> model = model_from_checkpoint(ckpt, cfg);
    const Tensor clip = read_clip_file(a.clip);
    if (clip.ndim() != 4 || clip.dim(0) != cfg.model.t_in || clip.dim(3) != 3) {
        throw DataError("clip dims incompatible with checkpoint: expected [" +
                        std::to_string(cfg.model.t_in) + ", H, W, 3]");
    }
    const auto out = infer_clip(model, clip);
    const auto dets = extract_tubelets(out.final, cfg.model, true, 0, 0);

    std::ofstream file(a.out, std::ios::trunc);
    if (!file) throw DataError("cannot write detections file: " + a.out);
    file << detections_json(dets, 0).dump(2) << "\n";
    std::printf("wrote %zu tubelets to %s\n", dets.size(), a.out.c_str());

    if (!a.dump_dir.empty()) {
        dump_frames(clip, dets, cfg.model, a.dump_dir);
        std::printf("frame images in %s\n", a.dump_dir.c_str());
    }
    return 0;
}

// ------------------------------------------------------------- grad check

struct GradTarget {
    std::string name;
    std::function<GradCheckReport()> run;
};

Tensor64 weighted_sum(const Tensor64& x, Rng& rng) {
    const Tensor64 r = Tensor64::randn(x.shape(), rng);
    return sum_all(mul(x, r));
}

std::vector<GradTarget> primitive_targets() {
    std::vector<GradTarget> targets;
    auto push = [&](const std::string& name, std::function<GradCheckReport()> run) {
        targets.push_back({name, std::move(run)});
    };
    push("matmul", [] {
        Rng rng(11);
        Tensor64 a = Tensor64::randn({3, 4}, rng);
        Tensor64 b = Tensor64::randn({4, 2}, rng);
        Tensor64 r = Tensor64::randn({3, 2}, rng);
        auto fn = [&] { return sum_all(mul(matmul(a, b), r)); };
        return grad_check<double>(fn, {a, b});
    });
    push("elementwise add/mul/sub", [] {
        Rng rng(12);
        Tensor64 a = Tensor64::randn({2, 5}, rng);
        Tensor64 b = Tensor64::randn({2, 5}, rng);
        auto fn = [&] { return sum_all(mul(add(a, b), sub(a, b))); };
        return grad_check<double>(fn, {a, b});
    });
    push("div", [] {
        Rng rng(13);
        Tensor64 a = Tensor64::randn({6}, rng);
        Tensor64 b = Tensor64::randn({6}, rng);
        auto fn = [&] { return sum_all(div(a, add_scalar(sigmoid(b), 1.0))); };
        return grad_check<double>(fn, {a, b});
    });
    push("softmax", [] {
        Rng rng(14);
        Tensor64 a = Tensor64::randn({3, 7}, rng);
        Tensor64 r = Tensor64::randn({3, 7}, rng);
        auto fn = [&] { return sum_all(mul(softmax(a, -1), r)); };
        return grad_check<double>(fn, {a});
    });
    push("log_softmax", [] {
        Rng rng(15);
        Tensor64 a = Tensor64::randn({4, 5}, rng);
        Tensor64 r = Tensor64::randn({4, 5}, rng);
        auto fn = [&] { return sum_all(mul(log_softmax(a, -1), r)); };
        return grad_check<double>(fn, {a});
    });
    push("layer_norm", [] {
        Rng rng(16);
        Tensor64 x = Tensor64::randn({4, 6}, rng);
        Tensor64 gamma = Tensor64::randn({6}, rng);
        Tensor64 beta = Tensor64::randn({6}, rng);
        Tensor64 r = Tensor64::randn({4, 6}, rng);
        auto fn = [&] { return sum_all(mul(layer_norm(x, gamma, beta), r)); };
        return grad_check<double>(fn, {x, gamma, beta});
    });
    push("sigmoid/gelu/relu", [] {
        Rng rng(17);
        Tensor64 x = Tensor64::randn({3, 8}, rng);
        Tensor64 r = Tensor64::randn({3, 8}, rng);
        auto fn = [&] { return sum_all(mul(add(relu(x), add(sigmoid(x), gelu(x))), r)); };
        return grad_check<double>(fn, {x});
    });
    push("reshape/permute/slice/concat", [] {
        Rng rng(18);
        Tensor64 x = Tensor64::randn({2, 3, 4}, rng);
        Tensor64 y = Tensor64::randn({3, 2, 4}, rng);
        Tensor64 r = Tensor64::randn({3, 2, 8}, rng);
        auto fn = [&] {
            const Tensor64 p = permute(x, {1, 0, 2});
            const Tensor64 c = concat(std::vector<Tensor64>{p, y}, 2);
            return sum_all(mul(slice(c, 2, 0, 8), r));
        };
        return grad_check<double>(fn, {x, y});
    });
    push("reductions sum/mean", [] {
        Rng rng(19);
        Tensor64 x = Tensor64::randn({3, 5}, rng);
        Tensor64 r = Tensor64::randn({3}, rng);
        auto fn = [&] { return sum_all(mul(add(sum(x, 1), mean(x, 1)), r)); };
        return grad_check<double>(fn, {x});
    });
    push("conv3d", [] {
        Rng rng(20);
        Tensor64 x = Tensor64::randn({3, 5, 5, 2}, rng);
        Tensor64 w = Tensor64::randn({3, 3, 3, 2, 3}, rng, 0.4);
        Tensor64 bias = Tensor64::randn({3}, rng);
        auto fn = [&] {
            const Tensor64 y = conv3d(x, w, bias, {1, 2, 2}, {1, 1, 1});
            return sum_all(mul(y, y));
        };
        return grad_check<double>(fn, {x, w, bias});
    });
    push("pool_time avg/max", [] {
        Rng rng(21);
        Tensor64 x = Tensor64::randn({6, 4}, rng);
        Tensor64 r = Tensor64::randn({3, 4}, rng);
        auto fn = [&] {
            return sum_all(mul(add(avg_pool_time(x, 2, 2), max_pool_time(x, 2, 2)), r));
        };
        return grad_check<double>(fn, {x});
    });
    push("bce_with_logits", [] {
        Rng rng(22);
        Tensor64 z = Tensor64::randn({7}, rng);
        Tensor64 y = sigmoid(Tensor64::randn({7}, rng)).detached();
        auto fn = [&] { return mean_all(bce_with_logits(z, y)); };
        return grad_check<double>(fn, {z});
    });
    push("embedding", [] {
        Rng rng(23);
        Tensor64 table = Tensor64::randn({5, 3}, rng);
        Tensor64 r = Tensor64::randn({4, 3}, rng);
        auto fn = [&] { return sum_all(mul(embedding(table, {0, 2, 2, 4}), r)); };
        return grad_check<double>(fn, {table});
    });
    push("giou_pairwise", [] {
        Rng rng(24);
        Tensor64 a = sigmoid(Tensor64::randn({3, 4}, rng)).detached();
        Tensor64 b = sigmoid(Tensor64::randn({3, 4}, rng)).detached();
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        Tensor64 r = Tensor64::randn({3}, rng);
        auto fn = [&] { return sum_all(mul(giou_pairwise(a, b), r)); };
        return grad_check<double>(fn, {a, b});
    });
    return targets;
}

// Collects a block's parameters plus its inputs and checks the whole set.
std::vector<GradTarget> block_targets() {
    std::vector<GradTarget> targets;
    auto push = [&](const std::string& name, std::function<GradCheckReport()> run) {
        targets.push_back({name, std::move(run)});
    };
    push("multi-head self-attention", [] {
        Rng rng(31);
        MultiHeadSelfAttentionT<double> sa(8, 2, rng);
        Tensor64 x = Tensor64::randn({2, 5, 8}, rng);
        Tensor64 pos = Tensor64::randn({5, 8}, rng);
        Tensor64 r = Tensor64::randn({2, 5, 8}, rng);
        ParamMapT<double> pm;
        sa.collect("sa", pm);
        pm.set_requires_grad(true);
        x.set_requires_grad(true);
        std::vector<Tensor64> wrt{x};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] { return sum_all(mul(sa.forward(x, pos, ForwardCtx{}), r)); };
        return grad_check<double>(fn, wrt);
    });
    push("cross-attention", [] {
        Rng rng(32);
        CrossAttentionT<double> ca(8, rng);
        Tensor64 q = Tensor64::randn({4, 8}, rng);
        Tensor64 kv = Tensor64::randn({6, 8}, rng);
        Tensor64 pos = Tensor64::randn({6, 8}, rng);
        Tensor64 r = Tensor64::randn({4, 8}, rng);
        ParamMapT<double> pm;
        ca.collect("ca", pm);
        pm.set_requires_grad(true);
        q.set_requires_grad(true);
        kv.set_requires_grad(true);
        std::vector<Tensor64> wrt{q, kv};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] { return sum_all(mul(ca.forward(q, kv, pos), r)); };
        return grad_check<double>(fn, wrt);
    });
    push("factorized tubelet attention", [] {
        Rng rng(33);
        TubeletAttentionT<double> ta(8, 2, rng);
        Tensor64 q = Tensor64::randn({3, 4, 8}, rng);
        Tensor64 r = Tensor64::randn({3, 4, 8}, rng);
        ParamMapT<double> pm;
        ta.collect("ta", pm);
        pm.set_requires_grad(true);
        q.set_requires_grad(true);
        std::vector<Tensor64> wrt{q};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] { return sum_all(mul(ta.forward(q, ForwardCtx{}), r)); };
        return grad_check<double>(fn, wrt);
    });
    push("encoder layer", [] {
        Rng rng(34);
        EncoderLayerT<double> layer(8, 2, 0.0, rng, false);
        Tensor64 x = Tensor64::randn({6, 8}, rng);
        Tensor64 pos = Tensor64::randn({6, 8}, rng);
        Tensor64 r = Tensor64::randn({6, 8}, rng);
        ParamMapT<double> pm;
        layer.collect("en", pm);
        pm.set_requires_grad(true);
        x.set_requires_grad(true);
        std::vector<Tensor64> wrt{x};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] { return sum_all(mul(layer.forward(x, pos, ForwardCtx{}), r)); };
        return grad_check<double>(fn, wrt);
    });
    push("decoder layer", [] {
        Rng rng(35);
        DecoderLayerT<double> layer(8, 2, 0.0, rng, false);
        Tensor64 q = Tensor64::randn({2, 3, 8}, rng);
        Tensor64 f_en = Tensor64::randn({6, 8}, rng);
        Tensor64 pos = Tensor64::randn({6, 8}, rng);
        Tensor64 r = Tensor64::randn({2, 3, 8}, rng);
        ParamMapT<double> pm;
        layer.collect("de", pm, true);
        pm.set_requires_grad(true);
        q.set_requires_grad(true);
        f_en.set_requires_grad(true);
        std::vector<Tensor64> wrt{q, f_en};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] { return sum_all(mul(layer.forward(q, f_en, pos, ForwardCtx{}), r)); };
        return grad_check<double>(fn, wrt);
    });
    push("box and switch heads", [] {
        Rng rng(36);
        BoxHeadT<double> box(8, rng);
        SwitchHeadT<double> sw(8, rng);
        Tensor64 f = Tensor64::randn({2, 3, 8}, rng);
        Tensor64 rb = Tensor64::randn({2, 3, 4}, rng);
        Tensor64 rs = Tensor64::randn({2, 3}, rng);
        ParamMapT<double> pm;
        box.collect("box", pm);
        sw.collect("switch", pm);
        pm.set_requires_grad(true);
        f.set_requires_grad(true);
        std::vector<Tensor64> wrt{f};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] {
            return add(sum_all(mul(box.forward(f), rb)), sum_all(mul(sw.logits(f), rs)));
        };
        return grad_check<double>(fn, wrt);
    });
    push("short-term classification head", [] {
        Rng rng(37);
        ClassificationHeadT<double> head(ClassHeadKind::short_term, 8, 4, 2, 6, 3, rng);
        Tensor64 f_tub = Tensor64::randn({2, 3, 8}, rng);
        Tensor64 f_b = Tensor64::randn({12, 8}, rng);
        Tensor64 pos = Tensor64::randn({12, 8}, rng);
        Tensor64 r = Tensor64::randn({2, 4}, rng);
        ParamMapT<double> pm;
        head.collect("cls", pm);
        pm.set_requires_grad(true);
        f_tub.set_requires_grad(true);
        std::vector<Tensor64> wrt{f_tub};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] {
            return sum_all(mul(head.forward(f_tub, f_b, pos, Tensor64(), ForwardCtx{}), r));
        };
        return grad_check<double>(fn, wrt);
    });
    push("plain classification head", [] {
        Rng rng(38);
        ClassificationHeadT<double> head(ClassHeadKind::plain, 8, 4, 2, 6, 3, rng);
        Tensor64 f_tub = Tensor64::randn({2, 3, 8}, rng);
        Tensor64 r = Tensor64::randn({2, 4}, rng);
        ParamMapT<double> pm;
        head.collect("cls", pm);
        pm.set_requires_grad(true);
        f_tub.set_requires_grad(true);
        std::vector<Tensor64> wrt{f_tub};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] {
            return sum_all(
                mul(head.forward(f_tub, Tensor64(), Tensor64(), Tensor64(), ForwardCtx{}), r));
        };
        return grad_check<double>(fn, wrt);
    });
    push("long-term classification head", [] {
        Rng rng(39);
        ClassificationHeadT<double> head(ClassHeadKind::long_term, 8, 4, 2, 6, 3, rng);
        Tensor64 f_tub = Tensor64::randn({2, 3, 8}, rng);
        Tensor64 f_b = Tensor64::randn({12, 8}, rng);
        Tensor64 pos = Tensor64::randn({12, 8}, rng);
        Tensor64 f_long = Tensor64::randn({36, 8}, rng);
        Tensor64 r = Tensor64::randn({2, 4}, rng);
        ParamMapT<double> pm;
        head.collect("cls", pm);
        pm.set_requires_grad(true);
        f_tub.set_requires_grad(true);
        std::vector<Tensor64> wrt{f_tub};
        for (const auto& [name, t] : pm.items()) wrt.push_back(t);
        auto fn = [&] {
            return sum_all(mul(head.forward(f_tub, f_b, pos, f_long, ForwardCtx{}), r));
        };
        return grad_check<double>(fn, wrt);
    });
    return targets;
}

std::vector<GradTarget> end2end_targets() {
    std::vector<GradTarget> targets;
    // Shared setup per target keeps each run independent and deterministic.
    auto make = [](const char* param_name) {
        return [param_name]() {
            TubeRConfig cfg;
            cfg.tubelet_count = 3;
            cfg.t_in = 8;
            cfg.t_out = 4;
            cfg.label_count = 4;
            cfg.model_dim = 12;
            cfg.encoder_layers = 1;
            cfg.decoder_layers = 1;
            cfg.head_count = 2;
            cfg.backbone_channels = {2, 3};
            cfg.compress_tokens0 = 6;
            cfg.compress_tokens1 = 3;
            TubeRModelT<double> model(cfg, 47);
            Rng rng(47);
            const Tensor64 clip = Tensor64::randn({8, 8, 8, 3}, rng, 0.3);

            GroundTruthTube t0;
            t0.class_id = 0;
            t0.boxes = {{0.3, 0.3, 0.2, 0.2},
                        {0.35, 0.3, 0.2, 0.2},
                        {0.4, 0.3, 0.2, 0.2},
                        {0.45, 0.3, 0.2, 0.2}};
            t0.visible = {true, true, true, false};
            GroundTruthTube t1;
            t1.class_id = 2;
            t1.boxes = {{0.7, 0.6, 0.25, 0.3},
                        {0.7, 0.6, 0.25, 0.3},
                        {0.7, 0.65, 0.25, 0.3},
                        {0.7, 0.7, 0.25, 0.3}};
            t1.visible = {false, true, true, true};
            const std::vector<GroundTruthTube> gts{t0, t1};
            // The assignment is held fixed so the objective stays smooth
            // under parameter perturbations.
            const std::vector<int64_t> assignment{0, 2};

            auto fn = [&] {
                const auto out = model.forward(clip, ForwardCtx{});
                return total_loss(out.final, gts, assignment, cfg).total;
            };
            Tensor64* p = model.params().find(param_name);
            if (!p) throw ConfigError(std::string("unknown parameter: ") + param_name);
            return grad_check<double>(fn, {*p});
        };
    };
    targets.push_back({"loss wrt queries.embeddings", make("queries.embeddings")});
    targets.push_back({"loss wrt backbone.conv0.weight", make("backbone.conv0.weight")});
    targets.push_back({"loss wrt box_head.lin.bias", make("box_head.lin.bias")});
    targets.push_back({"loss wrt switch_head.lin.bias", make("switch_head.lin.bias")});
    return targets;
}

int cmd_grad_check(const std::string& scope) {
    std::vector<GradTarget> targets;
    double tolerance = 0;
    if (scope == "primitives") {
        targets = primitive_targets();
        tolerance = 1e-6;
    } else if (scope == "blocks") {
        targets = block_targets();
        tolerance = 1e-5;
    } else {
        targets = end2end_targets();
        tolerance = 1e-4;
    }
    bool ok = true;
    for (const auto& target : targets) {
        const GradCheckReport report = target.run();
        const bool pass = report.max_rel_error < tolerance;
        ok = ok && pass;
        std::printf("%-34s max rel error %.3e  %s\n", target.name.c_str(), report.max_rel_error,
                    pass ? "ok" : "FAIL");
    }
    if (!ok) {
        std::fprintf(stderr, "gradient check failed at tolerance %.0e\n", tolerance);
        return 3;
    }
    std::printf("all %zu targets within %.0e\n", targets.size(), tolerance);
    return 0;
}

// -------------------------------------------------------------- benchmark

struct BenchArgs {
    int64_t n = 15;
    int64_t t = 32;
    int64_t c = 64;
    int64_t heads = 4;
};

int cmd_bench_attention(const BenchArgs& a) {
    if (a.n < 1 || a.t < 1 || a.c < 1 || a.heads < 1 || a.c % a.heads != 0) {
        throw ConfigError("bench-attention requires positive N, T, C with heads dividing C");
    }
    Rng rng(0);
    TubeletAttentionT<float> factorized(a.c, a.heads, rng);
    MultiHeadSelfAttentionT<float> full(a.c, a.heads, rng);
    const Tensor x = Tensor::randn({a.n, a.t, a.c}, rng);
    const Tensor x_flat = reshape(x, {a.n * a.t, a.c});
    const Tensor no_pos;

    auto time_ms = [](const std::function<void()>& fn) {
        fn();  // warmup
        const int iters = 5;
        const auto start = std::chrono::steady_clock::now();
        for (int i = 0; i < iters; ++i) fn();
        const auto stop = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(stop - start).count() / iters;
    };
    const double ms_fact =
        time_ms([&] { factorized.forward(x, ForwardCtx{}); });
    const double ms_full =
        time_ms([&] { full.forward(x_flat, no_pos, ForwardCtx{}); });

    const auto [count_fact, count_full] = interaction_count(a.n, a.t);
    // Largest score matrix materialized at once, per head.
    const int64_t peak_fact =
        std::max(a.t * a.n * a.n, a.n * a.t * a.t) * a.heads * static_cast<int64_t>(sizeof(float));
    const int64_t peak_full = a.n * a.t * a.n * a.t * a.heads * static_cast<int64_t>(sizeof(float));

    std::printf("tokens %lld (N=%lld T=%lld C=%lld heads=%lld)\n",
                static_cast<long long>(a.n * a.t), static_cast<long long>(a.n),
                static_cast<long long>(a.t), static_cast<long long>(a.c),
                static_cast<long long>(a.heads));
    std::printf("score elements: factorized %lld  full %lld\n",
                static_cast<long long>(count_fact), static_cast<long long>(count_full));
    std::printf("peak score buffer: factorized %lld B  full %lld B\n",
                static_cast<long long>(peak_fact), static_cast<long long>(peak_full));
    std::printf("time per forward: factorized %.3f ms  full %.3f ms\n", ms_fact, ms_full);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tubelet transformer for spatio-temporal action detection"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* cmd_gen = app.add_subcommand("generate-data", "write a synthetic dataset");
    cmd_gen->add_option("--config", gen.config, "run config JSON")->required();
    cmd_gen->add_option("--count", gen.count, "number of samples")->required()
        ->check(CLI::PositiveNumber);
    cmd_gen->add_option("--out", gen.out, "output directory")->required();
    cmd_gen->add_flag("--force", gen.force, "overwrite a non-empty directory");
    cmd_gen->add_option("--workers", gen.workers, "parallel sample writers")
        ->check(CLI::PositiveNumber);

    TrainArgs tr;
    auto* cmd_tr = app.add_subcommand("train", "train a model on a generated dataset");
    cmd_tr->add_option("--config", tr.config, "run config JSON")->required();
    cmd_tr->add_option("--data", tr.data, "dataset directory")->required();
    cmd_tr->add_option("--out", tr.out, "output directory")->required();
    cmd_tr->add_option("--resume", tr.resume, "checkpoint to continue from");

    EvalArgs ev;
    auto* cmd_ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
    cmd_ev->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
    cmd_ev->add_option("--data", ev.data, "dataset directory")->required();
    cmd_ev->add_option("--iou", ev.iou, "frame IoU threshold");
    cmd_ev->add_option("--link-iou", ev.link_iou, "tubelet linking threshold");
    cmd_ev->add_option("--report", ev.report, "write the full report JSON here");
    cmd_ev->add_flag("--no-switch", ev.no_switch, "keep every frame active");
    cmd_ev->add_option("--workers", ev.workers, "parallel per-class AP")
        ->check(CLI::PositiveNumber);

    InferArgs in;
    auto* cmd_in = app.add_subcommand("infer", "run one clip through a checkpoint");
    cmd_in->add_option("--ckpt", in.ckpt, "checkpoint file")->required();
    cmd_in->add_option("--clip", in.clip, "clip tensor file")->required();
    cmd_in->add_option("--out", in.out, "detections JSON path")->required();
    cmd_in->add_option("--dump-frames", in.dump_dir, "write annotated P6 images here");

    std::string scope;
    auto* cmd_gc = app.add_subcommand("grad-check", "finite-difference gradient audit");
    cmd_gc->add_option("--scope", scope, "primitives, blocks, or end2end")
        ->required()
        ->check(CLI::IsMember({"primitives", "blocks", "end2end"}));

    BenchArgs bench;
    auto* cmd_ba = app.add_subcommand("bench-attention", "factorized vs full attention cost");
    cmd_ba->add_option("--N", bench.n, "tubelet queries");
    cmd_ba->add_option("--T", bench.t, "frames per tubelet");
    cmd_ba->add_option("--C", bench.c, "model width");
    cmd_ba->add_option("--heads", bench.heads, "attention heads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_gen->parsed()) return cmd_generate_data(gen);
        if (cmd_tr->parsed()) return cmd_train(tr);
        if (cmd_ev->parsed()) return cmd_eval(ev);
        if (cmd_in->parsed()) return cmd_infer(in);
        if (cmd_gc->parsed()) return cmd_grad_check(scope);
        if (cmd_ba->parsed()) return cmd_bench_attention(bench);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
