#include "tuber/eval.hpp"

#include <atomic>
#include <thread>

#include <algorithm>
#include <set>

#include "tuber/boxes.hpp"
#include "tuber/errors.hpp"

namespace tuber {

ApResult average_precision(const std::vector<double>& scores,
                           const std::vector<std::vector<double>>& overlaps, int64_t gt_count,
                           double iou_threshold) {
    if (scores.size() != overlaps.size())
        throw ShapeError("average_precision: scores and overlap rows disagree");
    ApResult res;
    if (scores.empty()) return res;
    if (gt_count == 0) {
        res.fp = static_cast<int64_t>(scores.size());
        return res;
    }

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<bool> gt_used(static_cast<size_t>(gt_count), false);
    std::vector<char> is_tp(order.size(), 0);
    for (size_t k = 0; k < order.size(); ++k) {
        const auto& row = overlaps[order[k]];
        double best = iou_threshold;
        int64_t pick = -1;
        for (size_t g = 0; g < row.size(); ++g) {
            if (gt_used[g]) continue;
            if (row[g] >= best && (pick < 0 || row[g] > best)) {
                best = row[g];
                pick = static_cast<int64_t>(g);
            }
        }
        if (pick >= 0) {
            gt_used[static_cast<size_t>(pick)] = true;
            is_tp[k] = 1;
        }
    }

    std::vector<double> precision(order.size()), recall(order.size());
    int64_t tp = 0;
    for (size_t k = 0; k < order.size(); ++k) {
        tp += is_tp[k];
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    res.tp = tp;
    res.fp = static_cast<int64_t>(order.size()) - tp;

    // Precision envelope from the right, integrated over recall increments.
    double env = 0, ap = 0;
    for (size_t k = order.size(); k-- > 0;) {
        env = std::max(env, precision[k]);
        const double prev = k > 0 ? recall[k - 1] : 0.0;
        if (is_tp[k]) ap += (recall[k] - prev) * env;
    }
    res.ap = ap;
    return res;
}

namespace {

template <typename Det, typename Gt, typename OverlapFn>
EvalReport class_pooled_report(const std::vector<Det>& dets, const std::vector<Gt>& gts,
                               double iou_threshold, OverlapFn&& overlap, int workers) {
    if (workers < 1) throw ConfigError("per-class AP workers must be >= 1");
    std::set<int64_t> class_set;
    for (const auto& g : gts) class_set.insert(g.class_id);
    const std::vector<int64_t> classes(class_set.begin(), class_set.end());

    EvalReport report;
    report.iou_threshold = iou_threshold;
    report.per_class.resize(classes.size());
    auto score_class = [&](size_t c) {
        const int64_t cls = classes[c];
        std::vector<const Det*> cls_dets;
        for (const auto& d : dets)
            if (d.class_id == cls) cls_dets.push_back(&d);
        std::vector<const Gt*> cls_gts;
        for (const auto& g : gts)
            if (g.class_id == cls) cls_gts.push_back(&g);

        std::vector<double> scores;
        std::vector<std::vector<double>> ov;
        for (const Det* d : cls_dets) {
            scores.push_back(d->score);
            std::vector<double> row;
            for (const Gt* g : cls_gts) row.push_back(overlap(*d, *g));
            ov.push_back(std::move(row));
        }
        ApResult r = average_precision(scores, ov, static_cast<int64_t>(cls_gts.size()),
                                       iou_threshold);
        ClassAP& entry = report.per_class[c];
        entry.class_id = cls;
        entry.ap = r.ap;
        entry.gt_count = static_cast<int64_t>(cls_gts.size());
        entry.tp = r.tp;
        entry.fp = r.fp;
        entry.fn = entry.gt_count - r.tp;
    };
    if (workers == 1 || classes.size() < 2) {
        for (size_t c = 0; c < classes.size(); ++c) score_class(c);
    } else {
        // Classes are disjoint slots of the report, so the result is
        // identical for any worker count.
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        const size_t n = std::min<size_t>(static_cast<size_t>(workers), classes.size());
        for (size_t w = 0; w < n; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const size_t c = next.fetch_add(1);
                    if (c >= classes.size()) return;
                    score_class(c);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    double ap_sum = 0;
    for (const auto& entry : report.per_class) ap_sum += entry.ap;
    if (!report.per_class.empty())
        report.map = ap_sum / static_cast<double>(report.per_class.size());
    return report;
}

}  // namespace

EvalReport frame_map(const std::vector<FrameDetection>& dets,
                     const std::vector<FrameGroundTruth>& gts, double iou_threshold,
                     int workers) {
    return class_pooled_report(
        dets, gts, iou_threshold,
        [](const FrameDetection& d, const FrameGroundTruth& g) {
            if (d.video != g.video || d.frame != g.frame) return 0.0;
            return box_iou(center_to_corner(d.box), center_to_corner(g.box));
        },
        workers);
}

EvalReport video_map_at(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gts,
                        double iou_threshold, int workers) {
    return class_pooled_report(
        tubes, gts, iou_threshold,
        [](const VideoTube& d, const VideoTube& g) {
            if (d.video != g.video) return 0.0;
            return tube_iou(d, g);
        },
        workers);
}

VideoMapReport video_map(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gts,
                         int workers) {
    VideoMapReport report;
    report.at_02 = video_map_at(tubes, gts, 0.2, workers);
    report.at_05 = video_map_at(tubes, gts, 0.5, workers);
    double sum = 0;
    for (int i = 0; i < 10; ++i) sum += video_map_at(tubes, gts, 0.5 + 0.05 * i, workers).map;
    report.avg_05_095 = sum / 10.0;
    return report;
}

}  // namespace tuber
