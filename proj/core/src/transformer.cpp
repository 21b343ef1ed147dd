#include "tuber/transformer.hpp"

namespace tuber {

template <typename S>
EncoderLayerT<S>::EncoderLayerT(int64_t model_dim, int64_t heads, double dropout_rate, Rng& rng,
                                bool pos_on_value)
    : mha_(model_dim, heads, rng, pos_on_value),
      ln1_(model_dim),
      ln2_(model_dim),
      ffn_(model_dim, rng),
      dropout_rate_(dropout_rate) {}

template <typename S>
TensorT<S> EncoderLayerT<S>::forward(const TensorT<S>& x, const TensorT<S>& pos,
                                     const ForwardCtx& ctx) const {
    TensorT<S> h = ln1_.forward(add(x, maybe_dropout(mha_.forward(x, pos, ctx), dropout_rate_, ctx)));
    return ln2_.forward(add(h, maybe_dropout(ffn_.forward(h, dropout_rate_, ctx), dropout_rate_, ctx)));
}

template <typename S>
void EncoderLayerT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    mha_.collect(prefix + ".mha", params);
    ln1_.collect(prefix + ".ln1", params);
    ln2_.collect(prefix + ".ln2", params);
    ffn_.collect(prefix + ".ffn", params);
}

template <typename S>
EncoderStackT<S>::EncoderStackT(int64_t layers, int64_t model_dim, int64_t heads,
                                double dropout_rate, Rng& rng, bool pos_on_value) {
    for (int64_t i = 0; i < layers; ++i)
        layers_.emplace_back(model_dim, heads, dropout_rate, rng, pos_on_value);
}

template <typename S>
TensorT<S> EncoderStackT<S>::forward(const TensorT<S>& x, const TensorT<S>& pos,
                                     const ForwardCtx& ctx) const {
    TensorT<S> h = x;
    for (const auto& layer : layers_) h = layer.forward(h, pos, ctx);
    return h;
}

template <typename S>
void EncoderStackT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i].collect(prefix + "." + std::to_string(i), params);
}

template class EncoderLayerT<float>;
template class EncoderLayerT<double>;
template class EncoderStackT<float>;
template class EncoderStackT<double>;

}  // namespace tuber
