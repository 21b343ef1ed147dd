#pragma once

#include "tuber/heads.hpp"
#include "tuber/transformer.hpp"

namespace tuber {

// One 3D convolution stage of the backbone stub.
template <typename S>
struct ConvStageT {
    TensorT<S> w;  // [kT, kH, kW, Cin, Cout]
    TensorT<S> b;  // [Cout]
    std::array<int64_t, 3> stride{1, 1, 1};
};

// Three conv stages with spatial stride 2 each (total 8) and temporal stride 2
// in the middle stage when the config downsamples time.
template <typename S>
class BackboneT {
public:
    BackboneT() = default;
    BackboneT(const TubeRConfig& cfg, int64_t in_channels, Rng& rng);
    // clip: [T_in, H, W, Cin] -> [T', H/8, W/8, C']
    TensorT<S> forward(const TensorT<S>& clip) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    std::vector<ConvStageT<S>> stages_;
    int64_t min_t_ = 1;
};

// Learnable tubelet queries [N, T_out, C']. All T_out box embeddings of a
// tubelet start identical; single-query mode keeps them tied permanently by
// broadcasting one embedding per tubelet.
template <typename S>
class TubeletQuerySetT {
public:
    TubeletQuerySetT() = default;
    TubeletQuerySetT(int64_t n, int64_t t_out, int64_t model_dim, bool single_query, Rng& rng);
    TensorT<S> expand() const;  // [N, T_out, C']
    void collect(const std::string& prefix, ParamMapT<S>& params);
    TensorT<S>& raw() { return q_; }

private:
    TensorT<S> q_;  // [N, T_out, C'] or [N, 1, C'] in single-query mode
    int64_t t_out_ = 0;
    bool single_query_ = false;
};

// Eq. 7 factorized attention: spatial self-attention across the N queries of
// each frame, then temporal self-attention across the T_out frames of each
// tubelet, a residual around each sublayer and no normalization inside.
template <typename S>
class TubeletAttentionT {
public:
    TubeletAttentionT() = default;
    TubeletAttentionT(int64_t model_dim, int64_t heads, Rng& rng);
    TensorT<S> forward(const TensorT<S>& q, const ForwardCtx& ctx) const;  // [N, T, C']
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    MultiHeadSelfAttentionT<S> spatial_;
    MultiHeadSelfAttentionT<S> temporal_;
};

// Decoder layer: tubelet attention, cross-attention into the encoded clip,
// FFN; the cross-attention and FFN sublayers are post-normalized.
template <typename S>
class DecoderLayerT {
public:
    DecoderLayerT() = default;
    DecoderLayerT(int64_t model_dim, int64_t heads, double dropout_rate, Rng& rng,
                  bool pos_on_value);
    TensorT<S> forward(const TensorT<S>& q, const TensorT<S>& f_en, const TensorT<S>& pos,
                       const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params, bool include_ta);
    TubeletAttentionT<S>& tubelet_attention() { return ta_; }
    void share_tubelet_attention(const TubeletAttentionT<S>& ta) { ta_ = ta; }

private:
    TubeletAttentionT<S> ta_;
    CrossAttentionT<S> ca_;
    LayerNormT<S> ln1_, ln2_;
    FeedForwardT<S> ffn_;
    double dropout_rate_ = 0.0;
};

template <typename S>
class DecoderStackT {
public:
    DecoderStackT() = default;
    DecoderStackT(const TubeRConfig& cfg, Rng& rng);
    // Returns the output of every layer; the last entry is the final F_tub.
    // A zero-layer stack returns {q}.
    std::vector<TensorT<S>> forward_layers(const TensorT<S>& q, const TensorT<S>& f_en,
                                           const TensorT<S>& pos, const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    std::vector<DecoderLayerT<S>> layers_;
    bool shared_ta_ = false;
};

template <typename S>
struct RawOutputsT {
    TensorT<S> f_tub;         // [N, T_out, C']
    TensorT<S> y_class;       // [N, L] logits
    TensorT<S> y_coor;        // [N, T_out, 4] in [0,1]
    TensorT<S> y_switch;      // [N, T_out] in [0,1]
    TensorT<S> switch_logits; // [N, T_out] pre-sigmoid
};

template <typename S>
struct ModelOutputT {
    RawOutputsT<S> final;
    std::vector<RawOutputsT<S>> aux;  // intermediate decoder layers, in depth order
};

template <typename S>
class TubeRModelT {
public:
    TubeRModelT() = default;
    TubeRModelT(const TubeRConfig& cfg, uint64_t init_seed);
    // clip: [T_in, H, W, 3]; f_long: buffered context for the long_term head
    // (undefined otherwise); with_aux adds outputs for intermediate decoder
    // layers (heads shared across depths).
    ModelOutputT<S> forward(const TensorT<S>& clip, const ForwardCtx& ctx, bool with_aux = false,
                            const TensorT<S>& f_long = TensorT<S>()) const;
    // Backbone features flattened to [T'*H'*W', C'], for long-term buffering.
    TensorT<S> backbone_features(const TensorT<S>& clip) const;
    const TubeRConfig& config() const { return cfg_; }
    ParamMapT<S>& params() { return params_; }
    TubeletQuerySetT<S>& queries() { return queries_; }
    ClassificationHeadT<S>& class_head() { return class_head_; }

private:
    TubeRConfig cfg_;
    BackboneT<S> backbone_;
    TubeletQuerySetT<S> queries_;
    EncoderStackT<S> encoder_;
    DecoderStackT<S> decoder_;
    BoxHeadT<S> box_head_;
    SwitchHeadT<S> switch_head_;
    ClassificationHeadT<S> class_head_;
    ParamMapT<S> params_;

    RawOutputsT<S> run_heads(const TensorT<S>& f_tub, const TensorT<S>& f_b_flat,
                             const TensorT<S>& pos, const TensorT<S>& f_long,
                             const ForwardCtx& ctx) const;
};

using TubeRModel = TubeRModelT<float>;

}  // namespace tuber
