#include "tuber/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tuber/boxes.hpp"
#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
std::vector<TubeletDetection> extract_tubelets(const RawOutputsT<S>& raw, const TubeRConfig& cfg,
                                               bool use_switch, int64_t clip_index, int64_t video) {
    const int64_t n = raw.y_class.dim(0);
    const int64_t labels = raw.y_class.dim(1);
    const int64_t t_out = raw.y_coor.dim(1);
    std::vector<TubeletDetection> out;
    for (int64_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        int64_t argmax = 0;
        double z = 0;
        for (int64_t l = 0; l < labels; ++l) {
            const double v = static_cast<double>(raw.y_class.at({i, l}));
            if (v > mx) {
                mx = v;
                argmax = l;
            }
        }
        for (int64_t l = 0; l < labels; ++l)
            z += std::exp(static_cast<double>(raw.y_class.at({i, l})) - mx);
        if (argmax == cfg.background_class()) continue;
        const double score = 1.0 / z;  // softmax prob of the argmax class
        if (score < cfg.score_threshold) continue;

        TubeletDetection det;
        det.video = video;
        det.clip_index = clip_index;
        det.class_id = argmax;
        det.score = score;
        bool any_active = false;
        for (int64_t t = 0; t < t_out; ++t) {
            det.frames.push_back(clip_index * t_out + t);
            std::array<double, 4> b;
            for (int64_t c = 0; c < 4; ++c)
                b[static_cast<size_t>(c)] = static_cast<double>(raw.y_coor.at({i, t, c}));
            det.boxes.push_back(b);
            const bool on =
                !use_switch || static_cast<double>(raw.y_switch.at({i, t})) >= cfg.switch_threshold;
            det.active.push_back(on);
            any_active = any_active || on;
        }
        if (any_active) out.push_back(std::move(det));
    }
    return out;
}

double tube_iou(const VideoTube& a, const VideoTube& b) {
    if (a.frames.empty() || b.frames.empty()) return 0.0;
    std::map<int64_t, const std::array<double, 4>*> fa, fb;
    for (const auto& [f, box] : a.frames) fa[f] = &box;
    for (const auto& [f, box] : b.frames) fb[f] = &box;
    const int64_t lo = std::min(fa.begin()->first, fb.begin()->first);
    const int64_t hi = std::max(fa.rbegin()->first, fb.rbegin()->first);
    double total = 0;
    int64_t count = 0;
    for (int64_t f = lo; f <= hi; ++f) {
        const auto ia = fa.find(f), ib = fb.find(f);
        const bool ina = ia != fa.end(), inb = ib != fb.end();
        if (!ina && !inb) continue;  // outside both spans
        ++count;
        if (ina && inb)
            total += box_iou(center_to_corner(*ia->second), center_to_corner(*ib->second));
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

namespace {

struct ActiveSpan {
    std::vector<std::pair<int64_t, std::array<double, 4>>> frames;
};

ActiveSpan active_frames(const TubeletDetection& det) {
    ActiveSpan span;
    for (size_t t = 0; t < det.frames.size(); ++t)
        if (det.active[t]) span.frames.emplace_back(det.frames[t], det.boxes[t]);
    return span;
}

}  // namespace

std::vector<VideoTube> link_tubelets(const std::vector<TubeletDetection>& dets,
                                     double link_iou_threshold) {
    std::vector<size_t> order(dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });

    std::vector<bool> used(dets.size(), false);
    std::vector<VideoTube> tubes;
    for (size_t seed : order) {
        if (used[seed]) continue;
        used[seed] = true;
        if (active_frames(dets[seed]).frames.empty()) continue;
        std::vector<size_t> chain = {seed};
        size_t tail = seed;
        for (;;) {
            const auto tail_span = active_frames(dets[tail]);
            const auto& tail_box = tail_span.frames.back().second;
            double best_score = -1;
            size_t best = dets.size();
            for (size_t c = 0; c < dets.size(); ++c) {
                if (used[c] || dets[c].video != dets[tail].video ||
                    dets[c].clip_index != dets[tail].clip_index + 1 ||
                    dets[c].class_id != dets[tail].class_id)
                    continue;
                const auto cand_span = active_frames(dets[c]);
                if (cand_span.frames.empty()) continue;
                const auto& head = cand_span.frames.front().second;
                if (box_iou(center_to_corner(tail_box), center_to_corner(head)) <
                    link_iou_threshold)
                    continue;
                if (dets[c].score > best_score) {
                    best_score = dets[c].score;
                    best = c;
                }
            }
            if (best == dets.size()) break;
            used[best] = true;
            chain.push_back(best);
            tail = best;
        }

        VideoTube tube;
        tube.video = dets[seed].video;
        tube.class_id = dets[seed].class_id;
        double score_sum = 0;
        for (size_t m : chain) {
            score_sum += dets[m].score;
            for (auto& fb : active_frames(dets[m]).frames) tube.frames.push_back(fb);
        }
        tube.score = score_sum / static_cast<double>(chain.size());
        tubes.push_back(std::move(tube));
    }
    return tubes;
}

template std::vector<TubeletDetection> extract_tubelets<float>(const RawOutputsT<float>&,
                                                               const TubeRConfig&, bool, int64_t,
                                                               int64_t);
template std::vector<TubeletDetection> extract_tubelets<double>(const RawOutputsT<double>&,
                                                                const TubeRConfig&, bool, int64_t,
                                                                int64_t);

}  // namespace tuber
