#include "tuber/attention.hpp"

#include <cmath>

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
TensorT<S> positional_embedding_3d(int64_t t, int64_t h, int64_t w, int64_t channels) {
    if (t < 1 || h < 1 || w < 1)
        throw ShapeError("positional_embedding_3d: axes must be positive, got " +
                         std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w));
    if (channels < 6) throw ShapeError("positional_embedding_3d: need at least 6 channels");
    const int64_t pairs = channels / 6;        // sin/cos pairs per axis
    const int64_t axis_block = 2 * pairs;      // channels per axis
    std::vector<S> table(static_cast<size_t>(t * h * w * channels), S(0));
    auto fill_axis = [&](int64_t axis_offset, int64_t pos_value, S* row) {
        for (int64_t k = 0; k < pairs; ++k) {
            const double freq =
                std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(pairs));
            const double angle = static_cast<double>(pos_value) * freq;
            row[axis_offset + 2 * k] = static_cast<S>(std::sin(angle));
            row[axis_offset + 2 * k + 1] = static_cast<S>(std::cos(angle));
        }
    };
    int64_t r = 0;
    for (int64_t it = 0; it < t; ++it)
        for (int64_t ih = 0; ih < h; ++ih)
            for (int64_t iw = 0; iw < w; ++iw, ++r) {
                S* row = table.data() + r * channels;
                fill_axis(0, it, row);
                fill_axis(axis_block, ih, row);
                fill_axis(2 * axis_block, iw, row);
            }
    return TensorT<S>::from_values({t * h * w, channels}, std::move(table));
}

template <typename S>
MultiHeadSelfAttentionT<S>::MultiHeadSelfAttentionT(int64_t model_dim, int64_t heads, Rng& rng,
                                                    bool pos_on_value)
    : wq_(model_dim, model_dim, rng),
      wk_(model_dim, model_dim, rng),
      wv_(model_dim, model_dim, rng),
      wo_(model_dim, model_dim, rng),
      model_dim_(model_dim),
      heads_(heads),
      pos_on_value_(pos_on_value) {
    if (heads < 1 || model_dim % heads != 0)
        throw ConfigError("attention: model_dim " + std::to_string(model_dim) +
                          " not divisible by head count " + std::to_string(heads));
}

template <typename S>
TensorT<S> MultiHeadSelfAttentionT<S>::forward(const TensorT<S>& x, const TensorT<S>& pos,
                                               const ForwardCtx& ctx) const {
    (void)ctx;
    const bool flat = x.ndim() == 2;
    if (!flat && x.ndim() != 3)
        throw ShapeError("self-attention: input must be [S, C] or [B, S, C], got " +
                         shape_str(x.shape()));
    TensorT<S> x3 = flat ? reshape(x, {1, x.dim(0), x.dim(1)}) : x;
    const int64_t B = x3.dim(0), T = x3.dim(1), C = x3.dim(2);
    if (C != model_dim_) throw ShapeError("self-attention: channel dim mismatch");
    const int64_t dh = C / heads_;

    TensorT<S> q = wq_.forward(x3);
    TensorT<S> k = wk_.forward(x3);
    TensorT<S> v = wv_.forward(x3);
    if (pos.defined()) {
        q = add(q, pos);
        k = add(k, pos);
        if (pos_on_value_) v = add(v, pos);
    }
    auto to_heads = [&](const TensorT<S>& m) {
        return permute(reshape(m, {B, T, heads_, dh}), {0, 2, 1, 3});  // [B, H, T, dh]
    };
    q = to_heads(q);
    k = to_heads(k);
    v = to_heads(v);
    TensorT<S> scores =
        mul_scalar(matmul(q, permute(k, {0, 1, 3, 2})),
                   static_cast<S>(1.0 / std::sqrt(static_cast<double>(model_dim_))));
    TensorT<S> attn = softmax(scores, -1);
    TensorT<S> out = matmul(attn, v);                          // [B, H, T, dh]
    out = reshape(permute(out, {0, 2, 1, 3}), {B, T, C});      // [B, T, C]
    out = wo_.forward(out);
    return flat ? reshape(out, {T, C}) : out;
}

template <typename S>
void MultiHeadSelfAttentionT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    wq_.collect(prefix + ".wq", params);
    wk_.collect(prefix + ".wk", params);
    wv_.collect(prefix + ".wv", params);
    wo_.collect(prefix + ".wo", params);
}

template <typename S>
CrossAttentionT<S>::CrossAttentionT(int64_t model_dim, Rng& rng, bool pos_on_value)
    : wk_(model_dim, model_dim, rng),
      wv_(model_dim, model_dim, rng),
      model_dim_(model_dim),
      pos_on_value_(pos_on_value) {}

template <typename S>
TensorT<S> CrossAttentionT<S>::forward(const TensorT<S>& q_feat, const TensorT<S>& kv,
                                       const TensorT<S>& pos) const {
    if (q_feat.ndim() != 2 || kv.ndim() != 2)
        throw ShapeError("cross-attention: expected [A, C] queries and [S, C] keys");
    if (q_feat.dim(1) != model_dim_ || kv.dim(1) != model_dim_)
        throw ShapeError("cross-attention: channel dim mismatch");
    TensorT<S> k = wk_.forward(kv);
    TensorT<S> v = wv_.forward(kv);
    if (pos.defined()) {
        k = add(k, pos);
        if (pos_on_value_) v = add(v, pos);
    }
    TensorT<S> scores =
        mul_scalar(matmul(q_feat, permute(k, {1, 0})),
                   static_cast<S>(1.0 / std::sqrt(static_cast<double>(model_dim_))));
    return matmul(softmax(scores, -1), v);
}

template <typename S>
void CrossAttentionT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    wk_.collect(prefix + ".wk", params);
    wv_.collect(prefix + ".wv", params);
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template TensorT<S> positional_embedding_3d<S>(int64_t, int64_t, int64_t, int64_t);            \
    template class MultiHeadSelfAttentionT<S>;                                                     \
    template class CrossAttentionT<S>;

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
