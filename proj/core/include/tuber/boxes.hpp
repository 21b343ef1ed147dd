#pragma once

#include <array>

#include "tuber/tensor.hpp"

namespace tuber {

// Axis-aligned box in corner form.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// (cx, cy, w, h) -> corners.
Box center_to_corner(const std::array<double, 4>& b);

// Intersection over union; zero-area boxes yield 0.
double box_iou(const Box& a, const Box& b);

// Generalized IoU in [-1, 1]: IoU - (enclosure - union) / enclosure.
double giou(const Box& a, const Box& b);

// Differentiable generalized IoU between center-form box tensors [K, 4],
// returning [K]. Areas are derived from the reconstructed corners so that
// identical inputs give exactly 1.
template <typename S>
TensorT<S> giou_pairwise(const TensorT<S>& a, const TensorT<S>& b);

}  // namespace tuber
