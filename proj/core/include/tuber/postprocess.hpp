#pragma once

#include <array>
#include <utility>
#include <vector>

#include "tuber/config.hpp"
#include "tuber/model.hpp"

namespace tuber {

// One decoded tubelet: a classified box sequence over a clip with per-frame
// activity flags from the switch head. Frame ids are global annotation-frame
// indices (clip_index * t_out + t).
struct TubeletDetection {
    int64_t video = 0;
    int64_t clip_index = 0;
    int64_t class_id = 0;
    double score = 0;
    std::vector<int64_t> frames;
    std::vector<std::array<double, 4>> boxes;  // center form
    std::vector<bool> active;
};

// A linked box sequence over a video. Frame indices are strictly increasing;
// gaps are allowed.
struct VideoTube {
    int64_t video = 0;
    int64_t class_id = 0;
    double score = 0;
    std::vector<std::pair<int64_t, std::array<double, 4>>> frames;
};

// Decodes raw model outputs: argmax class (tubelets whose argmax is the
// background slot are dropped), score threshold on the class probability, and
// per-frame gating by the switch probability. With use_switch false every
// frame stays active. Tubelets with no active frame are dropped.
template <typename S>
std::vector<TubeletDetection> extract_tubelets(const RawOutputsT<S>& raw, const TubeRConfig& cfg,
                                               bool use_switch = true, int64_t clip_index = 0,
                                               int64_t video = 0);

// Spatio-temporal overlap: mean per-frame box IoU over the temporal union of
// the two spans, counting absent frames as IoU 0.
double tube_iou(const VideoTube& a, const VideoTube& b);

// Greedy linker: seeds tubes from tubelets in descending score order and
// extends each through consecutive clips with the highest-scoring same-class
// tubelet whose boundary-frame IoU clears the threshold. Tube score is the
// mean member score. Operates per video.
std::vector<VideoTube> link_tubelets(const std::vector<TubeletDetection>& dets,
                                     double link_iou_threshold);

}  // namespace tuber
