#pragma once

#include <array>
#include <vector>

#include "tuber/boxes.hpp"
#include "tuber/config.hpp"
#include "tuber/model.hpp"

namespace tuber {

// One annotated action tube at T_out granularity. Boxes are (cx, cy, w, h)
// normalized to [0, 1]; visible marks the frames the actor is acting in.
struct GroundTruthTube {
    int64_t class_id = 0;
    std::vector<std::array<double, 4>> boxes;
    std::vector<bool> visible;

    friend bool operator==(const GroundTruthTube&, const GroundTruthTube&) = default;
};

// Throws DataError unless the tube has t_out frames, a foreground class below
// label_count - 1, at least one visible frame, and positive extents there.
void validate_tube(const GroundTruthTube& tube, int64_t t_out, int64_t label_count);

// Pairwise assignment cost [N, M]: class probability, box L1, generalized IoU
// and (optionally) switch BCE terms, weighted by the configured lambdas. Box
// terms average over the tube's visible frames only. Reads detached values;
// nothing is recorded on the tape.
template <typename S>
Tensor64 match_cost(const RawOutputsT<S>& pred, const std::vector<GroundTruthTube>& gts,
                    const TubeRConfig& cfg);

// Exact minimum-cost assignment of every column (ground-truth tube) to a
// distinct row (prediction). Requires rows >= cols; ties break toward the
// lowest prediction index. Returns assignment[col] = row.
std::vector<int64_t> hungarian(const Tensor64& cost);

template <typename S>
struct LossBreakdownT {
    TensorT<S> total;     // weighted sum, scalar
    TensorT<S> l_switch;  // unweighted terms
    TensorT<S> l_class;
    TensorT<S> l_box;
    TensorT<S> l_iou;
};

using LossBreakdown = LossBreakdownT<float>;

// Eq. 14 with the assignment held fixed: matched predictions are supervised
// by their tube (box terms over visible frames, switch BCE over all frames);
// every prediction enters the cross-entropy, unmatched ones toward background
// with weight cfg.background_weight.
template <typename S>
LossBreakdownT<S> total_loss(const RawOutputsT<S>& pred, const std::vector<GroundTruthTube>& gts,
                             const std::vector<int64_t>& assignment, const TubeRConfig& cfg);

// match_cost + hungarian + total_loss in one step.
template <typename S>
LossBreakdownT<S> compute_set_loss(const RawOutputsT<S>& pred,
                                   const std::vector<GroundTruthTube>& gts,
                                   const TubeRConfig& cfg);

}  // namespace tuber
