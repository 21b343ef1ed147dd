#include "tuber/boxes.hpp"

#include <algorithm>

#include "tuber/errors.hpp"
#include "tuber/ops.hpp"

namespace tuber {

Box center_to_corner(const std::array<double, 4>& b) {
    return {b[0] - b[2] / 2, b[1] - b[3] / 2, b[0] + b[2] / 2, b[1] + b[3] / 2};
}

namespace {

double area(const Box& b) { return std::max(0.0, b.x1 - b.x0) * std::max(0.0, b.y1 - b.y0); }

double intersection(const Box& a, const Box& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return std::max(0.0, w) * std::max(0.0, h);
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
    const double inter = intersection(a, b);
    const double uni = area(a) + area(b) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
    const double inter = intersection(a, b);
    const double uni = area(a) + area(b) - inter;
    const double iou = uni > 0 ? inter / uni : 0.0;
    const double enc = (std::max(a.x1, b.x1) - std::min(a.x0, b.x0)) *
                       (std::max(a.y1, b.y1) - std::min(a.y0, b.y0));
    return enc > 0 ? iou - (enc - uni) / enc : iou;
}

template <typename S>
TensorT<S> giou_pairwise(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.ndim() != 2 || a.dim(1) != 4 || !same_shape(a.shape(), b.shape()))
        throw ShapeError("giou_pairwise: expected matching [K, 4] tensors, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const S tiny = static_cast<S>(1e-9);
    auto corners = [](const TensorT<S>& m) {
        TensorT<S> cx = slice(m, 1, 0, 1), cy = slice(m, 1, 1, 1);
        TensorT<S> hw = mul_scalar(slice(m, 1, 2, 1), S(0.5));
        TensorT<S> hh = mul_scalar(slice(m, 1, 3, 1), S(0.5));
        return std::array<TensorT<S>, 4>{sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)};
    };
    auto [ax0, ay0, ax1, ay1] = corners(a);
    auto [bx0, by0, bx1, by1] = corners(b);

    TensorT<S> area_a = mul(sub(ax1, ax0), sub(ay1, ay0));
    TensorT<S> area_b = mul(sub(bx1, bx0), sub(by1, by0));
    TensorT<S> iw = clamp_min(sub(minimum(ax1, bx1), maximum(ax0, bx0)), S(0));
    TensorT<S> ih = clamp_min(sub(minimum(ay1, by1), maximum(ay0, by0)), S(0));
    TensorT<S> inter = mul(iw, ih);
    TensorT<S> uni = sub(add(area_a, area_b), inter);
    TensorT<S> iou = div(inter, clamp_min(uni, tiny));

    TensorT<S> enc = mul(sub(maximum(ax1, bx1), minimum(ax0, bx0)),
                         sub(maximum(ay1, by1), minimum(ay0, by0)));
    TensorT<S> g = sub(iou, div(sub(enc, uni), clamp_min(enc, tiny)));
    return reshape(g, {a.dim(0)});
}

template TensorT<float> giou_pairwise<float>(const TensorT<float>&, const TensorT<float>&);
template TensorT<double> giou_pairwise<double>(const TensorT<double>&, const TensorT<double>&);

}  // namespace tuber
