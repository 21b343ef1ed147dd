#pragma once

#include <span>
#include <string>
#include <vector>

#include "tuber/ops.hpp"

namespace tuber::detail {

template <typename S, typename... Ts>
bool tracking(const Ts&... ins) {
    return GradTape<S>::active().recording() && (ins.requires_grad() || ...);
}

template <typename S>
void accumulate(const TensorT<S>& t, std::span<const S> delta) {
    TensorT<S> m = t;
    auto g = m.grad_mut();
    for (size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int64_t i = static_cast<int64_t>(s.size()) - 2; i >= 0; --i)
        st[static_cast<size_t>(i)] = st[static_cast<size_t>(i) + 1] * s[static_cast<size_t>(i) + 1];
    return st;
}

inline int64_t normalize_axis(int64_t axis, int64_t ndim, const char* op) {
    if (axis < 0) axis += ndim;
    if (axis < 0 || axis >= ndim)
        throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(ndim));
    return axis;
}

// For reductions and softmax-style ops: collapse `shape` around `axis` into
// [outer, len, inner] so rows can be walked with two nested loops.
struct AxisSplit {
    int64_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, int64_t axis) {
    AxisSplit r;
    for (int64_t i = 0; i < static_cast<int64_t>(s.size()); ++i) {
        int64_t d = s[static_cast<size_t>(i)];
        if (i < axis)
            r.outer *= d;
        else if (i == axis)
            r.len = d;
        else
            r.inner *= d;
    }
    return r;
}

// b must match a trailing run of a's shape ([B,S,C] + [S,C], [C], or equal).
template <typename S>
void require_suffix(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sb.size() > sa.size())
        throw ShapeError(std::string(op) + ": " + shape_str(sb) + " does not broadcast into " +
                         shape_str(sa));
    size_t off = sa.size() - sb.size();
    for (size_t i = 0; i < sb.size(); ++i)
        if (sa[off + i] != sb[i])
            throw ShapeError(std::string(op) + ": " + shape_str(sb) + " does not broadcast into " +
                             shape_str(sa));
}

}  // namespace tuber::detail
