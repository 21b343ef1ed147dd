#pragma once

#include <array>
#include <vector>

#include "tuber/tape.hpp"
#include "tuber/tensor.hpp"

namespace tuber {

class Rng;

// Differentiable primitives. Every op computes the forward value eagerly and,
// while the active tape is recording and an input requires grad, registers a
// backward closure with exact analytic gradients.
//
// Binary elementwise ops allow the right operand's shape to be a suffix of the
// left operand's shape (bias adds, positional tables); the gradient of the
// broadcast operand sums over the leading dimensions.

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& a, S c);
template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& a, S c);
template <typename S>
TensorT<S> neg(const TensorT<S>& a);

template <typename S>
TensorT<S> abs(const TensorT<S>& a);
template <typename S>
TensorT<S> relu(const TensorT<S>& a);
template <typename S>
TensorT<S> sigmoid(const TensorT<S>& a);
template <typename S>
TensorT<S> gelu(const TensorT<S>& a);
// max(a, c) elementwise; gradient passes where a > c
template <typename S>
TensorT<S> clamp_min(const TensorT<S>& a, S c);
template <typename S>
TensorT<S> minimum(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> maximum(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape);
template <typename S>
TensorT<S> permute(const TensorT<S>& a, const std::vector<int64_t>& axes);
template <typename S>
TensorT<S> concat(const std::vector<TensorT<S>>& parts, int64_t axis);
template <typename S>
TensorT<S> slice(const TensorT<S>& a, int64_t axis, int64_t start, int64_t length);
// index-select along an axis; indices may repeat (gradients accumulate)
template <typename S>
TensorT<S> take(const TensorT<S>& a, int64_t axis, const std::vector<int64_t>& indices);

template <typename S>
TensorT<S> sum(const TensorT<S>& a, int64_t axis, bool keepdim = false);
template <typename S>
TensorT<S> mean(const TensorT<S>& a, int64_t axis, bool keepdim = false);
template <typename S>
TensorT<S> sum_all(const TensorT<S>& a);
template <typename S>
TensorT<S> mean_all(const TensorT<S>& a);

// a: [*, M, K]; b: [K, N] or [*, K, N] with identical leading dims.
template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> softmax(const TensorT<S>& a, int64_t axis);
template <typename S>
TensorT<S> log_softmax(const TensorT<S>& a, int64_t axis);

// Normalizes over the last axis; gamma/beta have that axis's length.
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                      S eps = S(1e-5));

// Train mode samples a keep mask and scales by 1/(1-rate); eval is identity.
template <typename S>
TensorT<S> dropout(const TensorT<S>& x, double rate, Rng& rng, bool training);

// table: [V, C]; result: [len(ids), C]
template <typename S>
TensorT<S> embedding(const TensorT<S>& table, const std::vector<int64_t>& ids);

// x: [T, H, W, Cin], w: [kT, kH, kW, Cin, Cout], bias: [Cout].
// Zero padding `pad`, strides per spatial-temporal axis.
template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias,
                  const std::array<int64_t, 3>& stride, const std::array<int64_t, 3>& pad);

// Pooling over the leading (time) axis of [T, ...].
template <typename S>
TensorT<S> avg_pool_time(const TensorT<S>& x, int64_t window, int64_t stride);
template <typename S>
TensorT<S> max_pool_time(const TensorT<S>& x, int64_t window, int64_t stride);

// Elementwise, numerically stable; gradient w.r.t. logits is sigmoid(z) - y.
template <typename S>
TensorT<S> bce_with_logits(const TensorT<S>& logits, const TensorT<S>& targets);

template <typename S>
TensorT<S> operator+(const TensorT<S>& a, const TensorT<S>& b) {
    return add(a, b);
}
template <typename S>
TensorT<S> operator-(const TensorT<S>& a, const TensorT<S>& b) {
    return sub(a, b);
}
template <typename S>
TensorT<S> operator*(const TensorT<S>& a, const TensorT<S>& b) {
    return mul(a, b);
}

}  // namespace tuber
