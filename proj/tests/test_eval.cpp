#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuber/boxes.hpp>
#include <tuber/errors.hpp>
#include <tuber/eval.hpp>
#include <tuber/postprocess.hpp>
#include <tuber/rng.hpp>

using namespace tuber;

namespace {

// Interpolated AP recomputed from scratch: greedy matching with an explicit
// best-candidate scan, then a direct max-precision lookup at each recall
// level instead of a running envelope.
double ap_oracle(const std::vector<double>& scores,
                 const std::vector<std::vector<double>>& overlaps, int64_t gt_count, double thr) {
    if (gt_count == 0) return 0.0;
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<bool> used(static_cast<size_t>(gt_count), false);
    std::vector<int> tp_flags;
    for (size_t d : order) {
        int64_t pick = -1;
        for (size_t g = 0; g < overlaps[d].size(); ++g) {
            if (used[g] || overlaps[d][g] < thr) continue;
            if (pick < 0 || overlaps[d][g] > overlaps[d][static_cast<size_t>(pick)])
                pick = static_cast<int64_t>(g);
        }
        if (pick >= 0) used[static_cast<size_t>(pick)] = true;
        tp_flags.push_back(pick >= 0 ? 1 : 0);
    }

    std::vector<double> prec, rec;
    int tp = 0;
    for (size_t k = 0; k < tp_flags.size(); ++k) {
        tp += tp_flags[k];
        prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
    }
    double ap = 0;
    for (size_t k = 0; k < tp_flags.size(); ++k) {
        if (!tp_flags[k]) continue;
        double p_best = 0;
        for (size_t j = 0; j < tp_flags.size(); ++j)
            if (rec[j] >= rec[k]) p_best = std::max(p_best, prec[j]);
        ap += p_best / static_cast<double>(gt_count);
    }
    return ap;
}

std::array<double, 4> unit_box(double cx, double cy) { return {cx, cy, 0.4, 0.4}; }

VideoTube make_tube(int64_t video, int64_t cls, double score,
                    std::vector<std::pair<int64_t, std::array<double, 4>>> frames) {
    VideoTube t;
    t.video = video;
    t.class_id = cls;
    t.score = score;
    t.frames = std::move(frames);
    return t;
}

// Single-frame tubelet, frame id equals the clip index.
TubeletDetection make_det(int64_t video, int64_t clip, int64_t cls, double score,
                          std::array<double, 4> box) {
    TubeletDetection d;
    d.video = video;
    d.clip_index = clip;
    d.class_id = cls;
    d.score = score;
    d.frames = {clip};
    d.boxes = {box};
    d.active = {true};
    return d;
}

RawOutputsT<double> random_raw(Rng& rng, int64_t n, int64_t t, int64_t labels) {
    RawOutputsT<double> p;
    p.y_class = Tensor64::randn({n, labels}, rng);
    std::vector<double> coor(static_cast<size_t>(n * t * 4));
    for (size_t i = 0; i < coor.size(); ++i)
        coor[i] = i % 4 < 2 ? rng.uniform(0.25, 0.75) : rng.uniform(0.1, 0.3);
    p.y_coor = Tensor64::from_values({n, t, 4}, std::move(coor));
    p.switch_logits = Tensor64::randn({n, t}, rng);
    p.y_switch = sigmoid(p.switch_logits);
    return p;
}

}  // namespace

TEST_CASE("average precision hand cases") {
    // A confident miss above a correct hit halves the envelope: precision at
    // the hit is 1/2 and recall jumps from 0 to 1 there.
    ApResult r = average_precision({0.9, 0.8}, {{0.0}, {1.0}}, 1, 0.5);
    CHECK(r.ap == 0.5);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);

    r = average_precision({0.7}, {{0.9}}, 1, 0.5);
    CHECK(r.ap == 1.0);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);

    // Low-scored noise after a full-recall hit never lowers the AP.
    r = average_precision({0.9, 0.1, 0.05}, {{1.0}, {0.0}, {0.0}}, 1, 0.5);
    CHECK(r.ap == 1.0);
    CHECK(r.fp == 2);

    CHECK(average_precision({}, {}, 3, 0.5).ap == 0.0);
    CHECK(average_precision({0.3}, {{1.0}}, 0, 0.5).ap == 0.0);
    CHECK_THROWS_AS(average_precision({0.3, 0.4}, {{1.0}}, 1, 0.5), ShapeError);
}

TEST_CASE("average precision matching is greedy in score order") {
    // The top-scored detection takes its best ground truth first; the second
    // falls back to the remaining one. Both clear the threshold, so AP is 1.
    ApResult r = average_precision({0.9, 0.8}, {{0.6, 0.8}, {0.7, 0.9}}, 2, 0.5);
    CHECK(r.ap == 1.0);
    CHECK(r.tp == 2);

    // A ground truth matches at most once.
    r = average_precision({0.9, 0.8}, {{0.9}, {0.9}}, 1, 0.5);
    CHECK(r.ap == 1.0);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);

    // Overlap exactly at the threshold still matches.
    r = average_precision({0.5}, {{0.5}}, 1, 0.5);
    CHECK(r.tp == 1);
}

TEST_CASE("average precision matches the oracle on random scenarios") {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const int64_t gts = rng.uniform_int(0, 6);
        const int64_t dets = rng.uniform_int(0, 10);
        std::vector<double> scores;
        std::vector<std::vector<double>> overlaps;
        // Quantized scores and overlaps force frequent ties.
        static const double levels[] = {0.0, 0.2, 0.4, 0.55, 0.7, 1.0};
        for (int64_t d = 0; d < dets; ++d) {
            scores.push_back(0.1 * rng.uniform_int(1, 9));
            std::vector<double> row;
            for (int64_t g = 0; g < gts; ++g) row.push_back(levels[rng.uniform_int(0, 5)]);
            overlaps.push_back(std::move(row));
        }
        const double thr = 0.5;
        ApResult got = average_precision(scores, overlaps, gts, thr);
        CHECK(got.ap == doctest::Approx(ap_oracle(scores, overlaps, gts, thr)).epsilon(1e-12));
        CHECK(got.tp + got.fp == dets);
    }
}

TEST_CASE("average precision is invariant under monotone score transforms") {
    Rng rng(11);
    std::vector<double> scores;
    std::vector<std::vector<double>> overlaps;
    for (int d = 0; d < 12; ++d) {
        scores.push_back(rng.uniform(0.0, 1.0));
        overlaps.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    }
    std::vector<double> warped;
    for (double s : scores) warped.push_back(s / 10.0 + 3.0);
    ApResult a = average_precision(scores, overlaps, 3, 0.5);
    ApResult b = average_precision(warped, overlaps, 3, 0.5);
    CHECK(a.ap == b.ap);
    CHECK(a.tp == b.tp);
}

TEST_CASE("tube iou hand cases") {
    const auto b = unit_box(0.5, 0.5);
    VideoTube a = make_tube(0, 1, 1.0, {{0, b}, {1, b}, {2, b}, {3, b}});
    CHECK(tube_iou(a, a) == 1.0);

    VideoTube c = make_tube(0, 1, 1.0, {{10, b}, {11, b}});
    CHECK(tube_iou(a, c) == 0.0);

    // Spans 0..3 and 2..5 with identical boxes overlap on two of six frames.
    VideoTube d = make_tube(0, 1, 1.0, {{2, b}, {3, b}, {4, b}, {5, b}});
    CHECK(tube_iou(a, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(tube_iou(a, d) == tube_iou(d, a));

    // Frames absent from both sides do not enter the union count.
    VideoTube e = make_tube(0, 1, 1.0, {{0, b}, {5, b}});
    VideoTube f = make_tube(0, 1, 1.0, {{0, b}});
    CHECK(tube_iou(e, f) == 0.5);

    CHECK(tube_iou(a, VideoTube{}) == 0.0);
}

TEST_CASE("tubelet extraction decodes class score and switch gating") {
    TubeRConfig cfg;
    cfg.label_count = 4;
    cfg.t_out = 2;
    cfg.score_threshold = 0.3;

    RawOutputsT<double> raw;
    // Row 0 favors class 1, row 1 favors background, row 2 is uniform and
    // lands below the score threshold.
    raw.y_class = Tensor64::from_values({3, 4}, {0, 2, 0, 0, 0, 0, 0, 5, 1, 1, 1, 1});
    raw.y_coor = Tensor64::from_values({3, 2, 4}, std::vector<double>(24, 0.5));
    raw.switch_logits = Tensor64::from_values({3, 2}, {2, -2, 0, 0, 0, 0});
    raw.y_switch = sigmoid(raw.switch_logits);

    auto dets = extract_tubelets(raw, cfg, true, 3, 7);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].video == 7);
    CHECK(dets[0].clip_index == 3);
    CHECK(dets[0].class_id == 1);
    CHECK(dets[0].score == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 3.0)).epsilon(1e-12));
    CHECK(dets[0].frames == std::vector<int64_t>{6, 7});
    CHECK(dets[0].active == std::vector<bool>{true, false});
    CHECK(dets[0].boxes[1][2] == 0.5);

    // Without the switch every frame is active and the uniform row survives
    // once the threshold allows it.
    cfg.score_threshold = 0.05;
    auto loose = extract_tubelets(raw, cfg, false);
    REQUIRE(loose.size() == 2);
    CHECK(loose[0].active == std::vector<bool>{true, true});
    CHECK(loose[1].score == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("tubelet extraction drops fully gated tubelets") {
    TubeRConfig cfg;
    cfg.label_count = 3;
    cfg.t_out = 2;

    RawOutputsT<double> raw;
    raw.y_class = Tensor64::from_values({1, 3}, {4, 0, 0});
    raw.y_coor = Tensor64::from_values({1, 2, 4}, std::vector<double>(8, 0.5));
    raw.switch_logits = Tensor64::from_values({1, 2}, {-3, -3});
    raw.y_switch = sigmoid(raw.switch_logits);

    CHECK(extract_tubelets(raw, cfg, true).empty());
    CHECK(extract_tubelets(raw, cfg, false).size() == 1);
}

TEST_CASE("switch gating only restricts activity") {
    Rng rng(77);
    TubeRConfig cfg;
    cfg.label_count = 5;
    cfg.t_out = 4;
    for (int trial = 0; trial < 20; ++trial) {
        auto raw = random_raw(rng, 6, 4, 5);
        auto gated = extract_tubelets(raw, cfg, true);
        auto open = extract_tubelets(raw, cfg, false);
        CHECK(gated.size() <= open.size());
        for (const auto& g : gated) {
            bool found = false;
            for (const auto& o : open) {
                if (o.class_id != g.class_id || o.score != g.score || o.boxes != g.boxes) continue;
                found = true;
                CHECK(o.active == std::vector<bool>(o.active.size(), true));
                for (size_t t = 0; t < g.active.size(); ++t)
                    if (g.active[t]) CHECK(o.active[t]);
            }
            CHECK(found);
        }
    }
}

TEST_CASE("saturated switch probabilities make gating a no-op") {
    TubeRConfig cfg;
    cfg.label_count = 3;
    cfg.t_out = 2;
    RawOutputsT<double> raw;
    raw.y_class = Tensor64::from_values({2, 3}, {3, 0, 0, 0, 3, 0});
    raw.y_coor = Tensor64::from_values({2, 2, 4}, std::vector<double>(16, 0.4));
    raw.switch_logits = Tensor64::from_values({2, 2}, std::vector<double>(4, 20.0));
    raw.y_switch = sigmoid(raw.switch_logits);

    auto gated = extract_tubelets(raw, cfg, true);
    auto open = extract_tubelets(raw, cfg, false);
    REQUIRE(gated.size() == open.size());
    for (size_t i = 0; i < gated.size(); ++i) {
        CHECK(gated[i].active == open[i].active);
        CHECK(gated[i].score == open[i].score);
        CHECK(gated[i].boxes == open[i].boxes);
    }
}

TEST_CASE("linker keeps isolated tubelets as single tubes") {
    const auto b = unit_box(0.5, 0.5);
    std::vector<TubeletDetection> dets = {make_det(0, 0, 1, 0.9, b), make_det(1, 0, 2, 0.4, b)};
    auto tubes = link_tubelets(dets, 0.5);
    REQUIRE(tubes.size() == 2);
    CHECK(tubes[0].score == 0.9);
    CHECK(tubes[0].video == 0);
    CHECK(tubes[0].class_id == 1);
    REQUIRE(tubes[0].frames.size() == 1);
    CHECK(tubes[0].frames[0].first == 0);
    CHECK(tubes[1].score == 0.4);
}

TEST_CASE("linker chains consecutive clips and prefers higher scores") {
    const auto b = unit_box(0.5, 0.5);
    std::vector<TubeletDetection> dets = {
        make_det(0, 0, 1, 0.9, b),
        make_det(0, 1, 1, 0.8, b),
        make_det(0, 1, 1, 0.5, b),  // distractor loses to the 0.8 candidate
        make_det(0, 2, 1, 0.7, b),
    };
    auto tubes = link_tubelets(dets, 0.5);
    REQUIRE(tubes.size() == 2);
    CHECK(tubes[0].frames.size() == 3);
    CHECK(tubes[0].score == doctest::Approx((0.9 + 0.8 + 0.7) / 3.0).epsilon(1e-12));
    CHECK(tubes[1].frames.size() == 1);
    CHECK(tubes[1].score == 0.5);
    for (const auto& tube : tubes)
        for (size_t i = 1; i < tube.frames.size(); ++i)
            CHECK(tube.frames[i].first > tube.frames[i - 1].first);
}

TEST_CASE("linker respects the iou threshold and identity fields") {
    const auto a = unit_box(0.5, 0.5);
    // Shifting a 0.4-wide box by 0.2 leaves an overlap of one third.
    const auto shifted = unit_box(0.7, 0.5);
    std::vector<TubeletDetection> near = {make_det(0, 0, 1, 0.9, a), make_det(0, 1, 1, 0.8, shifted)};
    CHECK(link_tubelets(near, 0.2).size() == 1);
    CHECK(link_tubelets(near, 0.5).size() == 2);

    std::vector<TubeletDetection> cls = {make_det(0, 0, 1, 0.9, a), make_det(0, 1, 2, 0.8, a)};
    CHECK(link_tubelets(cls, 0.0).size() == 2);

    std::vector<TubeletDetection> vid = {make_det(0, 0, 1, 0.9, a), make_det(1, 1, 1, 0.8, a)};
    CHECK(link_tubelets(vid, 0.0).size() == 2);

    // Non-consecutive clips never merge.
    std::vector<TubeletDetection> gap = {make_det(0, 0, 1, 0.9, a), make_det(0, 2, 1, 0.8, a)};
    CHECK(link_tubelets(gap, 0.0).size() == 2);
}

TEST_CASE("linker joins on boundary frames of the active span") {
    const auto near = unit_box(0.5, 0.5);
    const auto far = unit_box(5.0, 5.0);

    TubeletDetection head;
    head.video = 0;
    head.clip_index = 0;
    head.class_id = 1;
    head.score = 0.9;
    head.frames = {0, 1};
    head.boxes = {near, far};
    head.active = {true, false};  // last active box is the near one

    TubeletDetection tail;
    tail.video = 0;
    tail.clip_index = 1;
    tail.class_id = 1;
    tail.score = 0.8;
    tail.frames = {2, 3};
    tail.boxes = {near, near};
    tail.active = {true, true};

    auto tubes = link_tubelets({head, tail}, 0.5);
    REQUIRE(tubes.size() == 1);
    REQUIRE(tubes[0].frames.size() == 3);
    CHECK(tubes[0].frames[0].first == 0);
    CHECK(tubes[0].frames[1].first == 2);
    CHECK(tubes[0].frames[2].first == 3);
}

TEST_CASE("linker partitions active tubelets") {
    Rng rng(5);
    std::vector<TubeletDetection> dets;
    int64_t active_total = 0;
    for (int i = 0; i < 40; ++i) {
        TubeletDetection d;
        d.video = rng.uniform_int(0, 2);
        d.clip_index = rng.uniform_int(0, 3);
        d.class_id = rng.uniform_int(0, 2);
        d.score = rng.uniform(0.0, 1.0);
        for (int64_t t = 0; t < 2; ++t) {
            d.frames.push_back(d.clip_index * 2 + t);
            d.boxes.push_back(unit_box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)));
            d.active.push_back(rng.uniform(0.0, 1.0) < 0.8);
        }
        for (bool on : d.active) active_total += on ? 1 : 0;
        dets.push_back(std::move(d));
    }
    auto tubes = link_tubelets(dets, 0.3);
    int64_t covered = 0;
    for (const auto& tube : tubes) {
        covered += static_cast<int64_t>(tube.frames.size());
        for (size_t i = 1; i < tube.frames.size(); ++i)
            CHECK(tube.frames[i].first > tube.frames[i - 1].first);
    }
    CHECK(covered == active_total);
}

TEST_CASE("frame map is exact on perfect detections") {
    std::vector<FrameDetection> dets;
    std::vector<FrameGroundTruth> gts;
    Rng rng(31);
    for (int64_t v = 0; v < 2; ++v)
        for (int64_t f = 0; f < 3; ++f)
            for (int64_t c = 0; c < 2; ++c) {
                FrameGroundTruth g{v, f, c, unit_box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7))};
                gts.push_back(g);
                dets.push_back({v, f, c, rng.uniform(0.5, 1.0), g.box});
            }
    EvalReport report = frame_map(dets, gts, 0.5);
    CHECK(report.map == 1.0);
    REQUIRE(report.per_class.size() == 2);
    for (const auto& entry : report.per_class) {
        CHECK(entry.ap == 1.0);
        CHECK(entry.tp == entry.gt_count);
        CHECK(entry.fp == 0);
        CHECK(entry.fn == 0);
    }
}

TEST_CASE("frame map matches a per-class oracle") {
    Rng rng(99);
    std::vector<FrameDetection> dets;
    std::vector<FrameGroundTruth> gts;
    for (int i = 0; i < 30; ++i)
        gts.push_back({rng.uniform_int(0, 1), rng.uniform_int(0, 3), rng.uniform_int(0, 2),
                       unit_box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7))});
    for (int i = 0; i < 50; ++i) {
        FrameDetection d;
        d.video = rng.uniform_int(0, 1);
        d.frame = rng.uniform_int(0, 3);
        d.class_id = rng.uniform_int(0, 2);
        d.score = rng.uniform(0.0, 1.0);
        if (i < 30) {
            d.box = gts[static_cast<size_t>(i)].box;
            d.box[0] += rng.uniform(-0.05, 0.05);
        } else {
            d.box = unit_box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7));
        }
        dets.push_back(d);
    }

    const double thr = 0.5;
    EvalReport report = frame_map(dets, gts, thr);

    std::vector<int64_t> classes = {0, 1, 2};
    double ap_sum = 0;
    for (int64_t cls : classes) {
        std::vector<double> scores;
        std::vector<std::vector<double>> overlaps;
        std::vector<const FrameGroundTruth*> cls_gts;
        for (const auto& g : gts)
            if (g.class_id == cls) cls_gts.push_back(&g);
        for (const auto& d : dets) {
            if (d.class_id != cls) continue;
            scores.push_back(d.score);
            std::vector<double> row;
            for (const auto* g : cls_gts)
                row.push_back(d.video == g->video && d.frame == g->frame
                                  ? box_iou(center_to_corner(d.box), center_to_corner(g->box))
                                  : 0.0);
            overlaps.push_back(std::move(row));
        }
        ap_sum += ap_oracle(scores, overlaps, static_cast<int64_t>(cls_gts.size()), thr);
    }
    CHECK(report.map == doctest::Approx(ap_sum / 3.0).epsilon(1e-12));
}

TEST_CASE("frame map ignores detections for classes without ground truth") {
    std::vector<FrameGroundTruth> gts = {{0, 0, 1, unit_box(0.5, 0.5)}};
    std::vector<FrameDetection> dets = {{0, 0, 1, 0.9, unit_box(0.5, 0.5)}};
    EvalReport base = frame_map(dets, gts, 0.5);
    dets.push_back({0, 0, 7, 0.99, unit_box(0.5, 0.5)});
    EvalReport noisy = frame_map(dets, gts, 0.5);
    CHECK(base.map == 1.0);
    CHECK(noisy.map == base.map);
    CHECK(noisy.per_class.size() == 1);
}

TEST_CASE("frame map requires the frame to agree") {
    std::vector<FrameGroundTruth> gts = {{0, 0, 1, unit_box(0.5, 0.5)}};
    std::vector<FrameDetection> wrong_frame = {{0, 1, 1, 0.9, unit_box(0.5, 0.5)}};
    std::vector<FrameDetection> wrong_video = {{1, 0, 1, 0.9, unit_box(0.5, 0.5)}};
    CHECK(frame_map(wrong_frame, gts, 0.5).map == 0.0);
    CHECK(frame_map(wrong_video, gts, 0.5).map == 0.0);
}

TEST_CASE("video map thresholds gate on tube overlap") {
    const auto b = unit_box(0.5, 0.5);
    VideoTube gt = make_tube(0, 1, 0.0, {{0, b}, {1, b}});

    // Identical tube scores 1 everywhere.
    VideoMapReport perfect = video_map({make_tube(0, 1, 0.9, {{0, b}, {1, b}})}, {gt});
    CHECK(perfect.at_02.map == 1.0);
    CHECK(perfect.at_05.map == 1.0);
    CHECK(perfect.avg_05_095 == 1.0);

    // Covering half the span gives tube overlap 0.5: kept at 0.2 and 0.5,
    // dropped at every stricter threshold.
    VideoMapReport half = video_map({make_tube(0, 1, 0.9, {{0, b}})}, {gt});
    CHECK(half.at_02.map == 1.0);
    CHECK(half.at_05.map == 1.0);
    CHECK(half.avg_05_095 == doctest::Approx(0.1).epsilon(1e-12));

    // Spatial overlap of one third on every frame misses the 0.5 threshold.
    const auto shifted = unit_box(0.7, 0.5);
    VideoMapReport spatial =
        video_map({make_tube(0, 1, 0.9, {{0, shifted}, {1, shifted}})}, {gt});
    CHECK(spatial.at_02.map == 1.0);
    CHECK(spatial.at_05.map == 0.0);
    CHECK(spatial.avg_05_095 == 0.0);
}

TEST_CASE("video map ignores ground-truth tube scores") {
    const auto b = unit_box(0.5, 0.5);
    std::vector<VideoTube> dets = {make_tube(0, 1, 0.9, {{0, b}})};
    std::vector<VideoTube> gt_low = {make_tube(0, 1, 0.0, {{0, b}})};
    std::vector<VideoTube> gt_high = {make_tube(0, 1, 123.0, {{0, b}})};
    CHECK(video_map_at(dets, gt_low, 0.5).map == video_map_at(dets, gt_high, 0.5).map);
}

TEST_CASE("video map separates videos") {
    const auto b = unit_box(0.5, 0.5);
    std::vector<VideoTube> gts = {make_tube(0, 1, 0.0, {{0, b}})};
    CHECK(video_map_at({make_tube(1, 1, 0.9, {{0, b}})}, gts, 0.2).map == 0.0);
}

TEST_CASE("extraction links into a perfect video map") {
    TubeRConfig cfg;
    cfg.label_count = 3;
    cfg.t_out = 2;

    auto clip_raw = [&](double cx) {
        RawOutputsT<double> raw;
        raw.y_class = Tensor64::from_values({1, 3}, {6, 0, 0});
        raw.y_coor = Tensor64::from_values(
            {1, 2, 4}, {cx, 0.5, 0.4, 0.4, cx + 0.01, 0.5, 0.4, 0.4});
        raw.switch_logits = Tensor64::from_values({1, 2}, {10, 10});
        raw.y_switch = sigmoid(raw.switch_logits);
        return raw;
    };

    std::vector<TubeletDetection> dets;
    for (int64_t clip = 0; clip < 2; ++clip)
        for (auto& d : extract_tubelets(clip_raw(0.45 + 0.02 * static_cast<double>(clip)), cfg,
                                        true, clip, 0))
            dets.push_back(std::move(d));
    auto tubes = link_tubelets(dets, 0.5);
    REQUIRE(tubes.size() == 1);
    REQUIRE(tubes[0].frames.size() == 4);

    std::vector<VideoTube> gts = {make_tube(0, 0, 0.0, tubes[0].frames)};
    VideoMapReport report = video_map(tubes, gts);
    CHECK(report.at_02.map == 1.0);
    CHECK(report.at_05.map == 1.0);
    CHECK(report.avg_05_095 == 1.0);
}
