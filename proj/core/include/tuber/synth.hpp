#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tuber/matching.hpp"
#include "tuber/tensor.hpp"

namespace tuber {

// Motion programs, one per action class. Classes 0..class_count-1 select a
// prefix of this list.
enum class Motion : int64_t {
    move_right = 0,
    move_diagonal = 1,
    grow = 2,
    shrink = 3,
};

// Generator settings for the moving-shapes corpus. Every sample is a pure
// function of (seed, index).
struct SynthConfig {
    int64_t height = 64;
    int64_t width = 64;
    int64_t t_in = 16;
    int64_t t_out = 8;  // annotation granularity; must divide t_in
    int64_t min_actors = 1;
    int64_t max_actors = 3;
    int64_t class_count = 4;
    // Active sub-interval length bounds, in input frames.
    int64_t min_active = 6;
    int64_t max_active = 12;
    double background_level = 0.1;
    double noise = 0.05;     // per-pixel uniform noise amplitude
    double contrast = 0.25;  // guaranteed mean gap between shape and background
    std::vector<std::array<double, 3>> palette = {
        {0.9, 0.2, 0.2}, {0.2, 0.9, 0.2}, {0.2, 0.2, 0.9},
        {0.9, 0.9, 0.2}, {0.8, 0.2, 0.8}, {0.2, 0.9, 0.9},
    };
    uint64_t seed = 0;

    // ConfigError on violated invariants: at least two classes, active runs
    // of two or more frames that cannot fall between sampled output frames,
    // palette colors that actually clear the contrast over the background.
    void validate() const;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// One rendered clip with exact annotations. Tubes are at output granularity:
// entry t annotates input frame t * (t_in / t_out). Boxes cover every frame;
// visible is true only while the motion program runs, so static lead-in and
// tail frames give the switch head genuine negatives.
struct SynthSample {
    Tensor clip;  // [t_in, height, width, 3]
    std::vector<GroundTruthTube> tubes;
    uint64_t seed = 0;  // per-sample derived seed
    int64_t actor_count = 0;
};

// DataError if actor placement cannot satisfy the pairwise overlap bound
// after bounded retries.
SynthSample generate_sample(const SynthConfig& cfg, int64_t index);

// Recovers the class label from the box trajectory alone. DataError when the
// trajectory fits no motion program; generated tubes always classify.
int64_t classify_trajectory(const GroundTruthTube& tube);

}  // namespace tuber
