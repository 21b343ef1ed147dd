#pragma once

#include <cstdint>
#include <vector>

#include "tuber/dataset_io.hpp"
#include "tuber/eval.hpp"
#include "tuber/model.hpp"
#include "tuber/postprocess.hpp"

namespace tuber {

// Eval-mode forward on one clip (no recording, no dropout). Builds the
// long-term context from the clip itself when the head needs one.
ModelOutputT<float> infer_clip(const TubeRModelT<float>& model, const Tensor& clip);

// One entry per active tubelet frame, scored by the tubelet score.
std::vector<FrameDetection> frame_detections(const std::vector<TubeletDetection>& dets);

// Annotation-granularity ground truth for one sample. Positives are the
// visible frames only.
std::vector<FrameGroundTruth> frame_gts(const SynthSample& sample, int64_t video);
std::vector<VideoTube> video_gts(const SynthSample& sample, int64_t video);

struct DatasetEval {
    EvalReport frame;
    VideoMapReport video;
    int64_t clip_count = 0;
    int64_t detection_count = 0;
};

// Runs the model over samples [begin, end), each sample its own video,
// decodes tubelets and scores frame and video mAP.
DatasetEval evaluate_dataset(const TubeRModelT<float>& model, const Dataset& data, int64_t begin,
                             int64_t end, bool use_switch, double frame_iou = 0.5,
                             double link_iou = 0.5, int workers = 1);

}  // namespace tuber
