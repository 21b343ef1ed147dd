#include "tuber/nn.hpp"

#include <cmath>

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
void ParamMapT<S>::add(const std::string& name, TensorT<S> t) {
    if (find(name)) throw ConfigError("duplicate parameter name: " + name);
    items_.emplace_back(name, std::move(t));
}

template <typename S>
TensorT<S>* ParamMapT<S>::find(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return &t;
    return nullptr;
}

template <typename S>
void ParamMapT<S>::set_requires_grad(bool v) {
    for (auto& [n, t] : items_) t.set_requires_grad(v);
}

template <typename S>
void ParamMapT<S>::zero_grad() {
    for (auto& [n, t] : items_) t.zero_grad();
}

template <typename S>
int64_t ParamMapT<S>::total_elements() const {
    int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

template <typename S>
LinearT<S>::LinearT(int64_t in, int64_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<S> wv(static_cast<size_t>(in * out));
    for (auto& x : wv) x = static_cast<S>(rng.uniform(-limit, limit));
    w_ = TensorT<S>::from_values({in, out}, std::move(wv));
    b_ = TensorT<S>::zeros({out});
}

template <typename S>
TensorT<S> LinearT<S>::forward(const TensorT<S>& x) const {
    const int64_t in = w_.dim(0);
    if (x.dim(-1) != in)
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not end in " +
                         std::to_string(in));
    if (x.ndim() == 2) return add(matmul(x, w_), b_);
    // Flatten leading dims so the GEMM sees one [rows, in] matrix.
    Shape orig = x.shape();
    const int64_t rows = x.numel() / in;
    TensorT<S> flat = reshape(x, {rows, in});
    TensorT<S> out = add(matmul(flat, w_), b_);
    Shape so = orig;
    so.back() = w_.dim(1);
    return reshape(out, std::move(so));
}

template <typename S>
void LinearT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    params.add(prefix + ".weight", w_);
    params.add(prefix + ".bias", b_);
}

template <typename S>
LayerNormT<S>::LayerNormT(int64_t dim) {
    gamma_ = TensorT<S>::full({dim}, S(1));
    beta_ = TensorT<S>::zeros({dim});
}

template <typename S>
TensorT<S> LayerNormT<S>::forward(const TensorT<S>& x) const {
    return layer_norm(x, gamma_, beta_);
}

template <typename S>
void LayerNormT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    params.add(prefix + ".gamma", gamma_);
    params.add(prefix + ".beta", beta_);
}

template <typename S>
FeedForwardT<S>::FeedForwardT(int64_t dim, Rng& rng)
    : lin1_(dim, 4 * dim, rng), lin2_(4 * dim, dim, rng) {}

template <typename S>
TensorT<S> FeedForwardT<S>::forward(const TensorT<S>& x, double dropout_rate,
                                    const ForwardCtx& ctx) const {
    TensorT<S> h = relu(lin1_.forward(x));
    h = maybe_dropout(h, dropout_rate, ctx);
    return lin2_.forward(h);
}

template <typename S>
void FeedForwardT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    lin1_.collect(prefix + ".lin1", params);
    lin2_.collect(prefix + ".lin2", params);
}

template <typename S>
TensorT<S> maybe_dropout(const TensorT<S>& x, double rate, const ForwardCtx& ctx) {
    if (!ctx.training || rate == 0.0) return x;
    if (!ctx.rng) throw ConfigError("training forward pass requires an RNG for dropout");
    return dropout(x, rate, *ctx.rng, true);
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template class ParamMapT<S>;                                                                   \
    template class LinearT<S>;                                                                     \
    template class LayerNormT<S>;                                                                  \
    template class FeedForwardT<S>;                                                                \
    template TensorT<S> maybe_dropout<S>(const TensorT<S>&, double, const ForwardCtx&);

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
