#pragma once

#include "tuber/attention.hpp"

namespace tuber {

// Post-norm transformer encoder layer: self-attention and FFN sublayers, each
// wrapped in residual + layer norm.
template <typename S>
class EncoderLayerT {
public:
    EncoderLayerT() = default;
    EncoderLayerT(int64_t model_dim, int64_t heads, double dropout_rate, Rng& rng,
                  bool pos_on_value);
    TensorT<S> forward(const TensorT<S>& x, const TensorT<S>& pos, const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    MultiHeadSelfAttentionT<S> mha_;
    LayerNormT<S> ln1_, ln2_;
    FeedForwardT<S> ffn_;
    double dropout_rate_ = 0.0;
};

template <typename S>
class EncoderStackT {
public:
    EncoderStackT() = default;
    EncoderStackT(int64_t layers, int64_t model_dim, int64_t heads, double dropout_rate, Rng& rng,
                  bool pos_on_value);
    TensorT<S> forward(const TensorT<S>& x, const TensorT<S>& pos, const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);
    int64_t layer_count() const { return static_cast<int64_t>(layers_.size()); }

private:
    std::vector<EncoderLayerT<S>> layers_;
};

}  // namespace tuber
