#include "tuber/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tuber/errors.hpp"
#include "tuber/rng.hpp"

namespace tuber {

namespace {

constexpr double kMargin = 0.02;
constexpr int kPlacementRetries = 200;

double color_mean(const std::array<double, 3>& c) { return (c[0] + c[1] + c[2]) / 3.0; }

struct Actor {
    Motion motion{};
    int64_t color = 0;
    int64_t start = 0;  // active input-frame interval, inclusive
    int64_t stop = 0;
    // Base geometry plus per-step deltas; a frame's box is computed fresh
    // from the step count so inactive axes stay bit-identical across frames.
    double cx = 0, cy = 0, w = 0, h = 0;
    double dcx = 0, dcy = 0, dw = 0, dh = 0;

    std::array<double, 4> box(int64_t frame) const {
        const double p = static_cast<double>(std::clamp(frame - start, int64_t{0}, stop - start));
        return {cx + dcx * p, cy + dcy * p, w + dw * p, h + dh * p};
    }
};

Actor sample_actor(const SynthConfig& cfg, Rng& rng) {
    const int64_t stride = cfg.t_in / cfg.t_out;
    const int64_t len = rng.uniform_int(cfg.min_active, std::min(cfg.max_active, cfg.t_in));
    // The interval must start before the last sampled frame so the net
    // displacement is visible at annotation granularity.
    const int64_t s_max = std::min(cfg.t_in - len, cfg.t_in - stride - 1);
    Actor a;
    a.motion = static_cast<Motion>(rng.uniform_int(0, cfg.class_count - 1));
    a.color = rng.uniform_int(0, static_cast<int64_t>(cfg.palette.size()) - 1);
    a.start = rng.uniform_int(0, s_max);
    a.stop = a.start + len - 1;
    const double steps = static_cast<double>(len - 1);

    switch (a.motion) {
        case Motion::move_right: {
            a.w = rng.uniform(0.12, 0.28);
            a.h = rng.uniform(0.12, 0.28);
            const double d = rng.uniform(0.2, 0.35);
            a.cx = rng.uniform(a.w / 2 + kMargin, 1.0 - a.w / 2 - d - kMargin);
            a.cy = rng.uniform(a.h / 2 + kMargin, 1.0 - a.h / 2 - kMargin);
            a.dcx = d / steps;
            break;
        }
        case Motion::move_diagonal: {
            a.w = rng.uniform(0.12, 0.28);
            a.h = rng.uniform(0.12, 0.28);
            const double d = rng.uniform(0.15, 0.28);
            a.cx = rng.uniform(a.w / 2 + kMargin, 1.0 - a.w / 2 - d - kMargin);
            a.cy = rng.uniform(a.h / 2 + kMargin, 1.0 - a.h / 2 - d - kMargin);
            a.dcx = d / steps;
            a.dcy = d / steps;
            break;
        }
        case Motion::grow: {
            a.w = rng.uniform(0.12, 0.22);
            a.h = rng.uniform(0.12, 0.22);
            const double g = rng.uniform(0.12, 0.2);
            const double wf = a.w + g, hf = a.h + g;
            a.cx = rng.uniform(wf / 2 + kMargin, 1.0 - wf / 2 - kMargin);
            a.cy = rng.uniform(hf / 2 + kMargin, 1.0 - hf / 2 - kMargin);
            a.dw = g / steps;
            a.dh = g / steps;
            break;
        }
        case Motion::shrink: {
            a.w = rng.uniform(0.24, 0.34);
            a.h = rng.uniform(0.24, 0.34);
            const double g = rng.uniform(0.12, 0.2);
            a.cx = rng.uniform(a.w / 2 + kMargin, 1.0 - a.w / 2 - kMargin);
            a.cy = rng.uniform(a.h / 2 + kMargin, 1.0 - a.h / 2 - kMargin);
            a.dw = -g / steps;
            a.dh = -g / steps;
            break;
        }
    }
    return a;
}

bool placement_ok(const SynthConfig& cfg, const std::vector<Actor>& placed, const Actor& cand) {
    for (int64_t f = 0; f < cfg.t_in; ++f) {
        const Box cb = center_to_corner(cand.box(f));
        for (const Actor& p : placed)
            if (box_iou(cb, center_to_corner(p.box(f))) >= 0.5) return false;
    }
    return true;
}

}  // namespace

void SynthConfig::validate() const {
    if (height < 8 || width < 8) throw ConfigError("synth: image size below 8x8");
    if (t_out < 2) throw ConfigError("synth: t_out must be at least 2");
    if (t_in < t_out || t_in % t_out != 0)
        throw ConfigError("synth: t_out must divide t_in");
    if (min_actors < 1 || max_actors < min_actors || max_actors > 3)
        throw ConfigError("synth: actor count must lie in 1..3");
    if (class_count < 2 || class_count > 4)
        throw ConfigError("synth: class count must lie in 2..4");
    const int64_t stride = t_in / t_out;
    if (min_active < 2) throw ConfigError("synth: active interval shorter than 2 frames");
    if (min_active < stride)
        throw ConfigError("synth: active interval shorter than the temporal stride");
    if (max_active < min_active || max_active > t_in)
        throw ConfigError("synth: bad active interval bounds");
    if (noise < 0 || background_level < 0 || contrast <= 0)
        throw ConfigError("synth: noise, background and contrast must be non-negative");
    if (background_level + noise > 1.0) throw ConfigError("synth: background exceeds 1");
    if (palette.empty()) throw ConfigError("synth: empty palette");
    for (const auto& c : palette) {
        for (double ch : c)
            if (ch < 0 || ch + noise > 1.0) throw ConfigError("synth: palette channel out of range");
        if (color_mean(c) < background_level + contrast)
            throw ConfigError("synth: palette color too dim for the configured contrast");
    }
}

SynthSample generate_sample(const SynthConfig& cfg, int64_t index) {
    cfg.validate();
    SynthSample sample;
    sample.seed = mix_seed(cfg.seed, static_cast<uint64_t>(index));
    Rng rng(sample.seed);

    const int64_t actors = rng.uniform_int(cfg.min_actors, cfg.max_actors);
    sample.actor_count = actors;
    std::vector<Actor> placed;
    for (int64_t i = 0; i < actors; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
            Actor cand = sample_actor(cfg, rng);
            if (placement_ok(cfg, placed, cand)) {
                placed.push_back(cand);
                ok = true;
            }
        }
        if (!ok)
            throw DataError("synth: actor placement infeasible after " +
                            std::to_string(kPlacementRetries) + " retries");
    }

    const int64_t stride = cfg.t_in / cfg.t_out;
    for (const Actor& a : placed) {
        GroundTruthTube tube;
        tube.class_id = static_cast<int64_t>(a.motion);
        for (int64_t k = 0; k < cfg.t_out; ++k) {
            const int64_t f = k * stride;
            tube.boxes.push_back(a.box(f));
            tube.visible.push_back(f >= a.start && f <= a.stop);
        }
        sample.tubes.push_back(std::move(tube));
    }

    sample.clip = Tensor::zeros({cfg.t_in, cfg.height, cfg.width, 3});
    auto px = sample.clip.values_mut();
    const auto h = static_cast<double>(cfg.height);
    const auto w = static_cast<double>(cfg.width);
    std::vector<std::array<int64_t, 4>> rects(placed.size());
    for (int64_t f = 0; f < cfg.t_in; ++f) {
        for (size_t i = 0; i < placed.size(); ++i) {
            const Box b = center_to_corner(placed[i].box(f));
            const auto snap = [](double v, int64_t hi) {
                return std::clamp(static_cast<int64_t>(std::llround(v)), int64_t{0}, hi);
            };
            rects[i] = {snap(b.x0 * w, cfg.width), snap(b.x1 * w, cfg.width),
                        snap(b.y0 * h, cfg.height), snap(b.y1 * h, cfg.height)};
        }
        for (int64_t y = 0; y < cfg.height; ++y) {
            for (int64_t x = 0; x < cfg.width; ++x) {
                // Later actors paint over earlier ones.
                const std::array<double, 3>* color = nullptr;
                for (size_t i = 0; i < placed.size(); ++i) {
                    const auto& r = rects[i];
                    if (x >= r[0] && x < r[1] && y >= r[2] && y < r[3])
                        color = &cfg.palette[static_cast<size_t>(placed[i].color)];
                }
                const size_t base = static_cast<size_t>(((f * cfg.height + y) * cfg.width + x) * 3);
                for (int64_t c = 0; c < 3; ++c) {
                    const double level = color ? (*color)[static_cast<size_t>(c)]
                                               : cfg.background_level;
                    px[base + static_cast<size_t>(c)] =
                        static_cast<float>(level + cfg.noise * rng.uniform());
                }
            }
        }
    }
    return sample;
}

int64_t classify_trajectory(const GroundTruthTube& tube) {
    if (tube.boxes.size() < 2) throw DataError("classify_trajectory: fewer than two frames");
    const auto& first = tube.boxes.front();
    const auto& last = tube.boxes.back();
    const double tol = 1e-9;
    const double dcx = last[0] - first[0];
    const double dcy = last[1] - first[1];
    const double dw = last[2] - first[2];
    if (dw > tol) return static_cast<int64_t>(Motion::grow);
    if (dw < -tol) return static_cast<int64_t>(Motion::shrink);
    if (dcx > tol && dcy > tol) return static_cast<int64_t>(Motion::move_diagonal);
    if (dcx > tol) return static_cast<int64_t>(Motion::move_right);
    throw DataError("classify_trajectory: trajectory fits no motion program");
}

}  // namespace tuber
