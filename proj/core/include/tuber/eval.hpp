#pragma once

#include <array>
#include <vector>

#include "tuber/postprocess.hpp"

namespace tuber {

// One detected box on one frame of one video, center form.
struct FrameDetection {
    int64_t video = 0;
    int64_t frame = 0;
    int64_t class_id = 0;
    double score = 0;
    std::array<double, 4> box{};
};

struct FrameGroundTruth {
    int64_t video = 0;
    int64_t frame = 0;
    int64_t class_id = 0;
    std::array<double, 4> box{};
};

struct ClassAP {
    int64_t class_id = 0;
    double ap = 0;
    int64_t gt_count = 0;
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
};

// Per-class average precision at one IoU threshold. mAP averages over the
// classes that have at least one ground-truth instance; detections for other
// classes are ignored.
struct EvalReport {
    double iou_threshold = 0.5;
    double map = 0;
    std::vector<ClassAP> per_class;
};

struct ApResult {
    double ap = 0;
    int64_t tp = 0;
    int64_t fp = 0;
};

// All-point interpolated AP (area under the precision envelope). Detections
// are matched greedily in descending score order to the unmatched ground
// truth with the highest overlap at or above the threshold. overlaps[d][g]
// holds the detection-to-gt overlap; gt_count may exceed the overlap columns
// only if zero (no detections).
ApResult average_precision(const std::vector<double>& scores,
                           const std::vector<std::vector<double>>& overlaps, int64_t gt_count,
                           double iou_threshold);

// Frame-level mAP: per-class AP over all (video, frame) pairs pooled.
// workers > 1 scores classes in parallel; results are identical either way.
EvalReport frame_map(const std::vector<FrameDetection>& dets,
                     const std::vector<FrameGroundTruth>& gts, double iou_threshold = 0.5,
                     int workers = 1);

// Video-level mAP with tube overlap at one threshold. Ground-truth tube
// scores are ignored.
EvalReport video_map_at(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gts,
                        double iou_threshold, int workers = 1);

// The reported threshold set: 0.2, 0.5, and the mean over 0.5:0.95 in steps
// of 0.05.
struct VideoMapReport {
    EvalReport at_02;
    EvalReport at_05;
    double avg_05_095 = 0;
};

VideoMapReport video_map(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gts,
                         int workers = 1);

}  // namespace tuber
