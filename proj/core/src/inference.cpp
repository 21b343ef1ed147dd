#include "tuber/inference.hpp"

#include "tuber/errors.hpp"
#include "tuber/heads.hpp"
#include "tuber/tape.hpp"

namespace tuber {

ModelOutputT<float> infer_clip(const TubeRModelT<float>& model, const Tensor& clip) {
    NoGradGuard guard;
    ForwardCtx ctx;  // eval mode
    Tensor f_long;
    if (model.config().class_head == ClassHeadKind::long_term) {
        LongTermBufferT<float> buf(model.config().context_window);
        buf.push(0, model.backbone_features(clip));
        f_long = buf.f_long(0);
    }
    return model.forward(clip, ctx, false, f_long);
}

std::vector<FrameDetection> frame_detections(const std::vector<TubeletDetection>& dets) {
    std::vector<FrameDetection> out;
    for (const auto& d : dets) {
        for (size_t k = 0; k < d.frames.size(); ++k) {
            if (!d.active[k]) continue;
            out.push_back({d.video, d.frames[k], d.class_id, d.score, d.boxes[k]});
        }
    }
    return out;
}

std::vector<FrameGroundTruth> frame_gts(const SynthSample& sample, int64_t video) {
    std::vector<FrameGroundTruth> out;
    for (const auto& tube : sample.tubes) {
        for (size_t k = 0; k < tube.boxes.size(); ++k) {
            if (!tube.visible[k]) continue;
            out.push_back({video, static_cast<int64_t>(k), tube.class_id, tube.boxes[k]});
        }
    }
    return out;
}

std::vector<VideoTube> video_gts(const SynthSample& sample, int64_t video) {
    std::vector<VideoTube> out;
    for (const auto& tube : sample.tubes) {
        VideoTube vt;
        vt.video = video;
        vt.class_id = tube.class_id;
        for (size_t k = 0; k < tube.boxes.size(); ++k) {
            if (!tube.visible[k]) continue;
            vt.frames.emplace_back(static_cast<int64_t>(k), tube.boxes[k]);
        }
        if (!vt.frames.empty()) out.push_back(std::move(vt));
    }
    return out;
}

DatasetEval evaluate_dataset(const TubeRModelT<float>& model, const Dataset& data, int64_t begin,
                             int64_t end, bool use_switch, double frame_iou, double link_iou,
                             int workers) {
    if (begin < 0 || end > data.size() || begin > end) {
        throw DataError("evaluation range out of bounds");
    }
    DatasetEval ev;
    std::vector<TubeletDetection> dets;
    std::vector<FrameGroundTruth> fgts;
    std::vector<VideoTube> vgts;
    for (int64_t i = begin; i < end; ++i) {
        const SynthSample sample = data.sample(i);
        const auto out = infer_clip(model, sample.clip);
        auto decoded = extract_tubelets(out.final, model.config(), use_switch, 0, i);
        dets.insert(dets.end(), decoded.begin(), decoded.end());
        auto fg = frame_gts(sample, i);
        fgts.insert(fgts.end(), fg.begin(), fg.end());
        auto vg = video_gts(sample, i);
        vgts.insert(vgts.end(), vg.begin(), vg.end());
        ++ev.clip_count;
    }
    ev.detection_count = static_cast<int64_t>(dets.size());
    ev.frame = frame_map(frame_detections(dets), fgts, frame_iou, workers);
    ev.video = video_map(link_tubelets(dets, link_iou), vgts, workers);
    return ev;
}

}  // namespace tuber
