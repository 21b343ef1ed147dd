#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tuber/ops.hpp"
#include "tuber/rng.hpp"
#include "tuber/tensor.hpp"

namespace tuber {

// Ordered registry of named parameter tensors. Entries share buffers with the
// owning modules, so optimizer updates through the map are visible to the
// model. Names are unique; insertion order is the construction order and is
// relied on for deterministic initialization and checkpoint layout.
template <typename S>
class ParamMapT {
public:
    void add(const std::string& name, TensorT<S> t);
    TensorT<S>* find(const std::string& name);
    const std::vector<std::pair<std::string, TensorT<S>>>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    void set_requires_grad(bool v);
    void zero_grad();
    int64_t total_elements() const;

private:
    std::vector<std::pair<std::string, TensorT<S>>> items_;
};

using ParamMap = ParamMapT<float>;

// Per-forward-call context: training enables dropout, which draws from rng.
struct ForwardCtx {
    Rng* rng = nullptr;
    bool training = false;
};

template <typename S>
class LinearT {
public:
    LinearT() = default;
    LinearT(int64_t in, int64_t out, Rng& rng);
    // x: [..., in] -> [..., out]
    TensorT<S> forward(const TensorT<S>& x) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);
    TensorT<S>& weight() { return w_; }
    TensorT<S>& bias() { return b_; }

private:
    TensorT<S> w_;  // [in, out]
    TensorT<S> b_;  // [out]
};

template <typename S>
class LayerNormT {
public:
    LayerNormT() = default;
    explicit LayerNormT(int64_t dim);
    TensorT<S> forward(const TensorT<S>& x) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    TensorT<S> gamma_;
    TensorT<S> beta_;
};

// Two-layer position-wise feed-forward block with ReLU, hidden width 4x.
template <typename S>
class FeedForwardT {
public:
    FeedForwardT() = default;
    FeedForwardT(int64_t dim, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, double dropout_rate, const ForwardCtx& ctx) const;
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    LinearT<S> lin1_;
    LinearT<S> lin2_;
};

template <typename S>
TensorT<S> maybe_dropout(const TensorT<S>& x, double rate, const ForwardCtx& ctx);

}  // namespace tuber
