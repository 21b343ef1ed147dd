#pragma once

#include "tuber/nn.hpp"

namespace tuber {

// Fixed sinusoidal embedding with channels split evenly across the t, h, w
// axes (sin/cos pairs per axis). Channels beyond the largest multiple of 6
// are zero. Rows are flattened in row-major (t, h, w) order.
template <typename S>
TensorT<S> positional_embedding_3d(int64_t t, int64_t h, int64_t w, int64_t channels);

// Multi-head self-attention with scores scaled by 1/sqrt(model_dim). The
// positional table is added after the query/key projections; pass an
// undefined tensor for no positions. pos_on_value extends the addition to the
// value pathway.
template <typename S>
class MultiHeadSelfAttentionT {
public:
    MultiHeadSelfAttentionT() = default;
    MultiHeadSelfAttentionT(int64_t model_dim, int64_t heads, Rng& rng, bool pos_on_value = false);
    // x: [S, C] or [B, S, C]; pos: [S, C] or undefined.
    TensorT<S> forward(const TensorT<S>& x, const TensorT<S>& pos, const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    LinearT<S> wq_, wk_, wv_, wo_;
    int64_t model_dim_ = 0;
    int64_t heads_ = 0;
    bool pos_on_value_ = false;
};

// Single-head cross-attention of Eq. 6: softmax(q_feat x sigma_k(kv)^T /
// sqrt(C)) x sigma_v(kv). The query side is used raw and there is no output
// projection.
template <typename S>
class CrossAttentionT {
public:
    CrossAttentionT() = default;
    CrossAttentionT(int64_t model_dim, Rng& rng, bool pos_on_value = false);
    // q_feat: [A, C]; kv: [S, C]; pos: [S, C] or undefined.
    TensorT<S> forward(const TensorT<S>& q_feat, const TensorT<S>& kv,
                       const TensorT<S>& pos) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);
    LinearT<S>& value_proj() { return wv_; }

private:
    LinearT<S> wk_, wv_;
    int64_t model_dim_ = 0;
    bool pos_on_value_ = false;
};

}  // namespace tuber
