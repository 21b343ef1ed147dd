#include "tuber/model.hpp"

#include <cmath>

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
BackboneT<S>::BackboneT(const TubeRConfig& cfg, int64_t in_channels, Rng& rng) {
    const std::vector<int64_t> widths = {cfg.backbone_channels[0], cfg.backbone_channels[1],
                                         cfg.model_dim};
    int64_t cin = in_channels;
    for (size_t i = 0; i < widths.size(); ++i) {
        ConvStageT<S> stage;
        const int64_t cout = widths[i];
        const int64_t fan = 27 * cin;
        stage.w = TensorT<S>::randn({3, 3, 3, cin, cout}, rng,
                                    std::sqrt(2.0 / static_cast<double>(fan)));
        stage.b = TensorT<S>::zeros({cout});
        stage.stride = {i == 1 ? cfg.temporal_stride() : 1, 2, 2};
        min_t_ *= stage.stride[0];
        stages_.push_back(std::move(stage));
        cin = cout;
    }
}

template <typename S>
TensorT<S> BackboneT<S>::forward(const TensorT<S>& clip) const {
    if (clip.ndim() != 4) throw ShapeError("backbone: clip must be [T, H, W, C]");
    if (clip.dim(0) < min_t_)
        throw DataError("backbone: clip has " + std::to_string(clip.dim(0)) +
                        " frames, below the total temporal stride " + std::to_string(min_t_));
    TensorT<S> x = clip;
    for (const auto& stage : stages_) x = relu(conv3d(x, stage.w, stage.b, stage.stride, {1, 1, 1}));
    return x;
}

template <typename S>
void BackboneT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    for (size_t i = 0; i < stages_.size(); ++i) {
        params.add(prefix + ".conv" + std::to_string(i) + ".weight", stages_[i].w);
        params.add(prefix + ".conv" + std::to_string(i) + ".bias", stages_[i].b);
    }
}

template <typename S>
TubeletQuerySetT<S>::TubeletQuerySetT(int64_t n, int64_t t_out, int64_t model_dim,
                                      bool single_query, Rng& rng)
    : t_out_(t_out), single_query_(single_query) {
    // One embedding per tubelet, replicated across time so every box embedding
    // of a tubelet starts identical.
    std::vector<S> base(static_cast<size_t>(n * model_dim));
    for (auto& x : base) x = static_cast<S>(rng.normal(0.0, 0.02));
    const int64_t t_dim = single_query ? 1 : t_out;
    std::vector<S> full(static_cast<size_t>(n * t_dim * model_dim));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t t = 0; t < t_dim; ++t)
            for (int64_t c = 0; c < model_dim; ++c)
                full[static_cast<size_t>((i * t_dim + t) * model_dim + c)] =
                    base[static_cast<size_t>(i * model_dim + c)];
    q_ = TensorT<S>::from_values({n, t_dim, model_dim}, std::move(full));
}

template <typename S>
TensorT<S> TubeletQuerySetT<S>::expand() const {
    if (!single_query_) return q_;
    return take(q_, 1, std::vector<int64_t>(static_cast<size_t>(t_out_), 0));
}

template <typename S>
void TubeletQuerySetT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    params.add(prefix + ".embeddings", q_);
}

template <typename S>
TubeletAttentionT<S>::TubeletAttentionT(int64_t model_dim, int64_t heads, Rng& rng)
    : spatial_(model_dim, heads, rng), temporal_(model_dim, heads, rng) {}

template <typename S>
TensorT<S> TubeletAttentionT<S>::forward(const TensorT<S>& q, const ForwardCtx& ctx) const {
    if (q.ndim() != 3) throw ShapeError("tubelet attention: expected [N, T, C]");
    TensorT<S> none;
    // Per-frame attention across tubelets: batch over T.
    TensorT<S> by_frame = permute(q, {1, 0, 2});  // [T, N, C]
    by_frame = add(by_frame, spatial_.forward(by_frame, none, ctx));
    // Per-tubelet attention across frames: batch over N.
    TensorT<S> by_tube = permute(by_frame, {1, 0, 2});  // [N, T, C]
    return add(by_tube, temporal_.forward(by_tube, none, ctx));
}

template <typename S>
void TubeletAttentionT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    spatial_.collect(prefix + ".spatial", params);
    temporal_.collect(prefix + ".temporal", params);
}

template <typename S>
DecoderLayerT<S>::DecoderLayerT(int64_t model_dim, int64_t heads, double dropout_rate, Rng& rng,
                                bool pos_on_value)
    : ta_(model_dim, heads, rng),
      ca_(model_dim, rng, pos_on_value),
      ln1_(model_dim),
      ln2_(model_dim),
      ffn_(model_dim, rng),
      dropout_rate_(dropout_rate) {}

template <typename S>
TensorT<S> DecoderLayerT<S>::forward(const TensorT<S>& q, const TensorT<S>& f_en,
                                     const TensorT<S>& pos, const ForwardCtx& ctx) const {
    const int64_t n = q.dim(0), t = q.dim(1), c = q.dim(2);
    TensorT<S> h = ta_.forward(q, ctx);
    TensorT<S> flat = reshape(h, {n * t, c});
    flat = ln1_.forward(add(flat, maybe_dropout(ca_.forward(flat, f_en, pos), dropout_rate_, ctx)));
    flat = ln2_.forward(add(flat, maybe_dropout(ffn_.forward(flat, dropout_rate_, ctx), dropout_rate_, ctx)));
    return reshape(flat, {n, t, c});
}

template <typename S>
void DecoderLayerT<S>::collect(const std::string& prefix, ParamMapT<S>& params, bool include_ta) {
    if (include_ta) ta_.collect(prefix + ".ta", params);
    ca_.collect(prefix + ".ca", params);
    ln1_.collect(prefix + ".ln1", params);
    ln2_.collect(prefix + ".ln2", params);
    ffn_.collect(prefix + ".ffn", params);
}

template <typename S>
DecoderStackT<S>::DecoderStackT(const TubeRConfig& cfg, Rng& rng) : shared_ta_(cfg.share_ta_params) {
    for (int64_t i = 0; i < cfg.decoder_layers; ++i)
        layers_.emplace_back(cfg.model_dim, cfg.head_count, cfg.dropout, rng, cfg.pos_on_value);
    if (shared_ta_)
        for (size_t i = 1; i < layers_.size(); ++i)
            layers_[i].share_tubelet_attention(layers_[0].tubelet_attention());
}

template <typename S>
std::vector<TensorT<S>> DecoderStackT<S>::forward_layers(const TensorT<S>& q,
                                                         const TensorT<S>& f_en,
                                                         const TensorT<S>& pos,
                                                         const ForwardCtx& ctx) const {
    std::vector<TensorT<S>> outs;
    TensorT<S> h = q;
    if (layers_.empty()) {
        outs.push_back(h);
        return outs;
    }
    for (const auto& layer : layers_) {
        h = layer.forward(h, f_en, pos, ctx);
        outs.push_back(h);
    }
    return outs;
}

template <typename S>
void DecoderStackT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i].collect(prefix + "." + std::to_string(i), params, !shared_ta_ || i == 0);
}

template <typename S>
TubeRModelT<S>::TubeRModelT(const TubeRConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    backbone_ = BackboneT<S>(cfg_, 3, rng);
    queries_ = TubeletQuerySetT<S>(cfg_.tubelet_count, cfg_.t_out, cfg_.model_dim,
                                   cfg_.single_query, rng);
    encoder_ = EncoderStackT<S>(cfg_.encoder_layers, cfg_.model_dim, cfg_.head_count, cfg_.dropout,
                                rng, cfg_.pos_on_value);
    decoder_ = DecoderStackT<S>(cfg_, rng);
    box_head_ = BoxHeadT<S>(cfg_.model_dim, rng);
    switch_head_ = SwitchHeadT<S>(cfg_.model_dim, rng);
    class_head_ = ClassificationHeadT<S>(cfg_.class_head, cfg_.model_dim, cfg_.label_count,
                                         cfg_.head_count, cfg_.compress_tokens0,
                                         cfg_.compress_tokens1, rng, cfg_.pos_on_value);
    backbone_.collect("backbone", params_);
    queries_.collect("queries", params_);
    encoder_.collect("encoder", params_);
    decoder_.collect("decoder", params_);
    box_head_.collect("box_head", params_);
    switch_head_.collect("switch_head", params_);
    class_head_.collect("class_head", params_);
    params_.set_requires_grad(true);
}

template <typename S>
TensorT<S> TubeRModelT<S>::backbone_features(const TensorT<S>& clip) const {
    TensorT<S> f_b = backbone_.forward(clip);
    return reshape(f_b, {f_b.dim(0) * f_b.dim(1) * f_b.dim(2), f_b.dim(3)});
}

template <typename S>
RawOutputsT<S> TubeRModelT<S>::run_heads(const TensorT<S>& f_tub, const TensorT<S>& f_b_flat,
                                         const TensorT<S>& pos, const TensorT<S>& f_long,
                                         const ForwardCtx& ctx) const {
    RawOutputsT<S> out;
    out.f_tub = f_tub;
    out.y_coor = box_head_.forward(f_tub);
    out.switch_logits = switch_head_.logits(f_tub);
    out.y_switch = sigmoid(out.switch_logits);
    out.y_class = class_head_.forward(f_tub, f_b_flat, pos, f_long, ctx);
    return out;
}

template <typename S>
ModelOutputT<S> TubeRModelT<S>::forward(const TensorT<S>& clip, const ForwardCtx& ctx,
                                        bool with_aux, const TensorT<S>& f_long) const {
    if (clip.ndim() != 4 || clip.dim(3) != 3)
        throw DataError("model: clip must be [T, H, W, 3], got " + shape_str(clip.shape()));
    if (clip.dim(0) != cfg_.t_in)
        throw DataError("model: clip has " + std::to_string(clip.dim(0)) +
                        " frames, config expects " + std::to_string(cfg_.t_in));
    TensorT<S> f_b = backbone_.forward(clip);
    const int64_t tp = f_b.dim(0), hp = f_b.dim(1), wp = f_b.dim(2), c = f_b.dim(3);
    TensorT<S> f_b_flat = reshape(f_b, {tp * hp * wp, c});
    TensorT<S> pos = positional_embedding_3d<S>(tp, hp, wp, c);
    TensorT<S> f_en = encoder_.forward(f_b_flat, pos, ctx);
    std::vector<TensorT<S>> layer_outs =
        decoder_.forward_layers(queries_.expand(), f_en, pos, ctx);
    ModelOutputT<S> out;
    out.final = run_heads(layer_outs.back(), f_b_flat, pos, f_long, ctx);
    if (with_aux)
        for (size_t i = 0; i + 1 < layer_outs.size(); ++i)
            out.aux.push_back(run_heads(layer_outs[i], f_b_flat, pos, f_long, ctx));
    return out;
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template class BackboneT<S>;                                                                   \
    template class TubeletQuerySetT<S>;                                                           \
    template class TubeletAttentionT<S>;                                                          \
    template class DecoderLayerT<S>;                                                               \
    template class DecoderStackT<S>;                                                               \
    template class TubeRModelT<S>;

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
