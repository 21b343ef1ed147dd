#pragma once

#include <deque>

#include "tuber/attention.hpp"
#include "tuber/config.hpp"

namespace tuber {

// Temporal average pool over the middle axis of [N, T, C].
template <typename S>
TensorT<S> pool_time(const TensorT<S>& f_tub);

// Per-frame box regression: linear C'->4 then sigmoid, boxes as (cx, cy, w, h).
template <typename S>
class BoxHeadT {
public:
    BoxHeadT() = default;
    BoxHeadT(int64_t model_dim, Rng& rng);
    TensorT<S> forward(const TensorT<S>& f_tub) const;  // [N, T, C'] -> [N, T, 4]
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    LinearT<S> lin_;
};

// Per-frame actorness: linear C'->1; exposes pre-sigmoid logits for the BCE
// terms alongside the gated probabilities.
template <typename S>
class SwitchHeadT {
public:
    SwitchHeadT() = default;
    SwitchHeadT(int64_t model_dim, Rng& rng);
    TensorT<S> logits(const TensorT<S>& f_tub) const;  // [N, T, C'] -> [N, T]
    void collect(const std::string& prefix, ParamMapT<S>& params);

private:
    LinearT<S> lin_;
};

// Ring buffer of detached backbone features for the 2w+1 clips around the one
// being classified. Entries must arrive with contiguous clip indices.
template <typename S>
class LongTermBufferT {
public:
    LongTermBufferT() = default;
    explicit LongTermBufferT(int64_t window) : window_(window) {}
    void push(int64_t clip_index, const TensorT<S>& f_b_flat);
    // Concatenated features for clips [center-w, center+w]; clips missing from
    // the buffer are padded by repeating the center clip.
    TensorT<S> f_long(int64_t center_clip_index) const;
    int64_t size() const { return static_cast<int64_t>(entries_.size()); }
    void clear() { entries_.clear(); }

private:
    int64_t window_ = 0;
    std::deque<std::pair<int64_t, TensorT<S>>> entries_;
};

// Classification head variants behind one interface. All variants emit
// [N, L] logits from [N, T, C'] tubelet features.
//   plain:      Linear(Pool_t(F_tub))
//   short_term: F_c = CA(Pool_t(F_tub), SA(F_b)) + Pool_t(F_tub); Linear(F_c)
//   long_term:  compress the clip-window buffer to Emb_long, F_lt = CA(F_b,
//               Emb_long), then the short_term path reads F_lt instead of F_b
template <typename S>
class ClassificationHeadT {
public:
    ClassificationHeadT() = default;
    ClassificationHeadT(ClassHeadKind kind, int64_t model_dim, int64_t label_count, int64_t heads,
                        int64_t n0, int64_t n1, Rng& rng, bool pos_on_value = false);
    // f_long is consulted only by the long_term variant; pass undefined otherwise.
    TensorT<S> forward(const TensorT<S>& f_tub, const TensorT<S>& f_b_flat, const TensorT<S>& pos,
                       const TensorT<S>& f_long, const ForwardCtx& ctx) const;
    // Eq. 9 intermediate (short_term path), exposed for the residual identity.
    TensorT<S> context_vector(const TensorT<S>& f_tub, const TensorT<S>& context,
                              const TensorT<S>& pos, const ForwardCtx& ctx) const;
    TensorT<S> compress_long_term(const TensorT<S>& f_long) const;
    TensorT<S> long_term_context(const TensorT<S>& f_b_flat, const TensorT<S>& emb_long) const;
    ClassHeadKind kind() const { return kind_; }
    void collect(const std::string& prefix, ParamMapT<S>& params);
    CrossAttentionT<S>& context_attention() { return ca_; }

private:
    ClassHeadKind kind_ = ClassHeadKind::plain;
    LinearT<S> cls_;
    MultiHeadSelfAttentionT<S> sa_;
    CrossAttentionT<S> ca_;
    TensorT<S> emb_n0_, emb_n1_;
    CrossAttentionT<S> compress1_, compress2_, flt_;
};

}  // namespace tuber
