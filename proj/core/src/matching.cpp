#include "tuber/matching.hpp"

#include <cmath>
#include <limits>

#include "tuber/errors.hpp"
#include "tuber/ops.hpp"

namespace tuber {

void validate_tube(const GroundTruthTube& tube, int64_t t_out, int64_t label_count) {
    if (tube.class_id < 0 || tube.class_id > label_count - 2)
        throw DataError("tube class " + std::to_string(tube.class_id) +
                        " outside the foreground range [0, " + std::to_string(label_count - 2) +
                        "]");
    if (static_cast<int64_t>(tube.boxes.size()) != t_out ||
        static_cast<int64_t>(tube.visible.size()) != t_out)
        throw DataError("tube must carry " + std::to_string(t_out) + " frames, got " +
                        std::to_string(tube.boxes.size()) + " boxes / " +
                        std::to_string(tube.visible.size()) + " flags");
    int64_t seen = 0;
    for (int64_t t = 0; t < t_out; ++t) {
        if (!tube.visible[static_cast<size_t>(t)]) continue;
        ++seen;
        const auto& b = tube.boxes[static_cast<size_t>(t)];
        if (b[2] <= 0 || b[3] <= 0)
            throw DataError("tube has a degenerate box on visible frame " + std::to_string(t));
    }
    if (seen == 0) throw DataError("tube has no visible frames");
}

namespace {

double stable_bce(double logit, double target) {
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace

template <typename S>
Tensor64 match_cost(const RawOutputsT<S>& pred, const std::vector<GroundTruthTube>& gts,
                    const TubeRConfig& cfg) {
    const int64_t n = pred.y_class.dim(0);
    const int64_t t_out = pred.y_coor.dim(1);
    const int64_t labels = pred.y_class.dim(1);
    const int64_t m = static_cast<int64_t>(gts.size());
    if (m > n)
        throw DataError("cannot match " + std::to_string(m) + " ground-truth tubes to " +
                        std::to_string(n) + " predictions");
    for (const auto& tube : gts) validate_tube(tube, t_out, labels);

    // Softmax class probabilities, computed outside the tape.
    std::vector<double> probs(static_cast<size_t>(n * labels));
    for (int64_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t l = 0; l < labels; ++l)
            mx = std::max(mx, static_cast<double>(pred.y_class.at({i, l})));
        double z = 0;
        for (int64_t l = 0; l < labels; ++l) {
            const double e = std::exp(static_cast<double>(pred.y_class.at({i, l})) - mx);
            probs[static_cast<size_t>(i * labels + l)] = e;
            z += e;
        }
        for (int64_t l = 0; l < labels; ++l) probs[static_cast<size_t>(i * labels + l)] /= z;
    }

    std::vector<double> cost(static_cast<size_t>(n * m), 0.0);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < m; ++j) {
            const auto& tube = gts[static_cast<size_t>(j)];
            double l1 = 0, iou_term = 0, switch_term = 0;
            int64_t vis = 0;
            for (int64_t t = 0; t < t_out; ++t) {
                const bool on = tube.visible[static_cast<size_t>(t)];
                if (on) {
                    ++vis;
                    std::array<double, 4> pb;
                    for (int64_t c = 0; c < 4; ++c)
                        pb[static_cast<size_t>(c)] = static_cast<double>(pred.y_coor.at({i, t, c}));
                    const auto& gb = tube.boxes[static_cast<size_t>(t)];
                    for (int64_t c = 0; c < 4; ++c)
                        l1 += std::abs(pb[static_cast<size_t>(c)] - gb[static_cast<size_t>(c)]);
                    iou_term += 1.0 - giou(center_to_corner(pb), center_to_corner(gb));
                }
                switch_term += stable_bce(static_cast<double>(pred.switch_logits.at({i, t})),
                                          on ? 1.0 : 0.0);
            }
            double entry =
                cfg.lambda_class * -probs[static_cast<size_t>(i * labels + tube.class_id)] +
                cfg.lambda_box * l1 / static_cast<double>(vis) +
                cfg.lambda_iou * iou_term / static_cast<double>(vis);
            if (cfg.switch_in_match_cost)
                entry += cfg.lambda_switch * switch_term / static_cast<double>(t_out);
            cost[static_cast<size_t>(i * m + j)] = entry;
        }
    }
    return Tensor64::from_values({n, m}, std::move(cost));
}

std::vector<int64_t> hungarian(const Tensor64& cost) {
    if (cost.ndim() != 2) throw ShapeError("hungarian: cost must be a matrix");
    const int64_t n = cost.dim(0);  // predictions
    const int64_t m = cost.dim(1);  // ground-truth tubes
    for (double v : cost.values())
        if (!std::isfinite(v)) throw NumericalError("hungarian: non-finite cost entry");
    if (m > n)
        throw DataError("hungarian: " + std::to_string(m) + " columns exceed " +
                        std::to_string(n) + " rows");
    if (m == 0) return {};

    // Shortest augmenting paths with dual potentials; columns are scanned in
    // ascending prediction order so cost ties resolve toward lower indices.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(m + 1), 0.0), v(static_cast<size_t>(n + 1), 0.0);
    std::vector<int64_t> p(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
    for (int64_t g = 1; g <= m; ++g) {
        p[0] = g;
        int64_t j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n + 1), inf);
        std::vector<char> used(static_cast<size_t>(n + 1), 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int64_t g0 = p[static_cast<size_t>(j0)];
            double delta = inf;
            int64_t j1 = 0;
            for (int64_t j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur =
                    cost.values()[static_cast<size_t>((j - 1) * m + (g0 - 1))] -
                    u[static_cast<size_t>(g0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int64_t j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int64_t j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int64_t> assign(static_cast<size_t>(m), -1);
    for (int64_t j = 1; j <= n; ++j)
        if (p[static_cast<size_t>(j)] != 0) assign[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return assign;
}

template <typename S>
LossBreakdownT<S> total_loss(const RawOutputsT<S>& pred, const std::vector<GroundTruthTube>& gts,
                             const std::vector<int64_t>& assignment, const TubeRConfig& cfg) {
    const int64_t n = pred.y_class.dim(0);
    const int64_t t_out = pred.y_coor.dim(1);
    const int64_t labels = pred.y_class.dim(1);
    const int64_t m = static_cast<int64_t>(gts.size());
    if (static_cast<int64_t>(assignment.size()) != m)
        throw DataError("assignment covers " + std::to_string(assignment.size()) + " tubes, need " +
                        std::to_string(m));
    for (const auto& tube : gts) validate_tube(tube, t_out, labels);
    std::vector<int64_t> matched_gt(static_cast<size_t>(n), -1);
    for (int64_t j = 0; j < m; ++j) {
        const int64_t i = assignment[static_cast<size_t>(j)];
        if (i < 0 || i >= n || matched_gt[static_cast<size_t>(i)] != -1)
            throw DataError("assignment is not an injective map into the predictions");
        matched_gt[static_cast<size_t>(i)] = j;
    }

    // Cross entropy over every prediction; unmatched ones train toward the
    // background class with a reduced weight. The weighted one-hot mask is a
    // constant, so gradients flow only through log_softmax.
    double weight_sum = 0;
    std::vector<S> mask(static_cast<size_t>(n * labels), S(0));
    for (int64_t i = 0; i < n; ++i) {
        const int64_t j = matched_gt[static_cast<size_t>(i)];
        const int64_t target = j >= 0 ? gts[static_cast<size_t>(j)].class_id : labels - 1;
        const double w = j >= 0 ? 1.0 : cfg.background_weight;
        mask[static_cast<size_t>(i * labels + target)] = static_cast<S>(w);
        weight_sum += w;
    }
    for (auto& x : mask) x = static_cast<S>(x / weight_sum);
    TensorT<S> l_class = neg(sum_all(
        mul(log_softmax(pred.y_class, -1), TensorT<S>::from_values({n, labels}, std::move(mask)))));

    TensorT<S> l_switch = TensorT<S>::scalar(S(0));
    TensorT<S> l_box = TensorT<S>::scalar(S(0));
    TensorT<S> l_iou = TensorT<S>::scalar(S(0));
    if (m > 0) {
        std::vector<int64_t> rows;
        std::vector<S> switch_targets;
        std::vector<int64_t> frame_idx;
        std::vector<S> gt_boxes;
        std::vector<S> frame_weight;
        for (int64_t j = 0; j < m; ++j) {
            const int64_t i = assignment[static_cast<size_t>(j)];
            const auto& tube = gts[static_cast<size_t>(j)];
            rows.push_back(i);
            int64_t vis = 0;
            for (int64_t t = 0; t < t_out; ++t)
                if (tube.visible[static_cast<size_t>(t)]) ++vis;
            for (int64_t t = 0; t < t_out; ++t) {
                const bool on = tube.visible[static_cast<size_t>(t)];
                switch_targets.push_back(S(on ? 1 : 0));
                if (!on) continue;
                frame_idx.push_back(i * t_out + t);
                for (double c : tube.boxes[static_cast<size_t>(t)])
                    gt_boxes.push_back(static_cast<S>(c));
                frame_weight.push_back(static_cast<S>(1.0 / (static_cast<double>(m) *
                                                             static_cast<double>(vis))));
            }
        }
        TensorT<S> logits = take(pred.switch_logits, 0, rows);
        TensorT<S> targets =
            TensorT<S>::from_values({m, t_out}, std::move(switch_targets));
        l_switch = mean_all(bce_with_logits(logits, targets));

        const int64_t v = static_cast<int64_t>(frame_idx.size());
        TensorT<S> p = take(reshape(pred.y_coor, {n * t_out, 4}), 0, frame_idx);
        TensorT<S> g = TensorT<S>::from_values({v, 4}, std::move(gt_boxes));
        TensorT<S> w = TensorT<S>::from_values({v}, std::move(frame_weight));
        l_box = sum_all(mul(sum(abs(sub(p, g)), 1), w));
        l_iou = sum_all(mul(sub(TensorT<S>::full({v}, S(1)), giou_pairwise(p, g)), w));
    }

    LossBreakdownT<S> out;
    out.l_switch = l_switch;
    out.l_class = l_class;
    out.l_box = l_box;
    out.l_iou = l_iou;
    out.total = add(add(mul_scalar(l_switch, static_cast<S>(cfg.lambda_switch)),
                        mul_scalar(l_class, static_cast<S>(cfg.lambda_class))),
                    add(mul_scalar(l_box, static_cast<S>(cfg.lambda_box)),
                        mul_scalar(l_iou, static_cast<S>(cfg.lambda_iou))));
    return out;
}

template <typename S>
LossBreakdownT<S> compute_set_loss(const RawOutputsT<S>& pred,
                                   const std::vector<GroundTruthTube>& gts,
                                   const TubeRConfig& cfg) {
    return total_loss(pred, gts, hungarian(match_cost(pred, gts, cfg)), cfg);
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template Tensor64 match_cost<S>(const RawOutputsT<S>&, const std::vector<GroundTruthTube>&,    \
                                    const TubeRConfig&);                                           \
    template LossBreakdownT<S> total_loss<S>(const RawOutputsT<S>&,                                \
                                             const std::vector<GroundTruthTube>&,                  \
                                             const std::vector<int64_t>&, const TubeRConfig&);     \
    template LossBreakdownT<S> compute_set_loss<S>(const RawOutputsT<S>&,                          \
                                                   const std::vector<GroundTruthTube>&,            \
                                                   const TubeRConfig&);

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
