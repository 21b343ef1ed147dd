#include "tuber/heads.hpp"

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
TensorT<S> pool_time(const TensorT<S>& f_tub) {
    if (f_tub.ndim() != 3) throw ShapeError("pool_time: expected [N, T, C], got " + shape_str(f_tub.shape()));
    return mean(f_tub, 1);
}

template <typename S>
BoxHeadT<S>::BoxHeadT(int64_t model_dim, Rng& rng) : lin_(model_dim, 4, rng) {}

template <typename S>
TensorT<S> BoxHeadT<S>::forward(const TensorT<S>& f_tub) const {
    return sigmoid(lin_.forward(f_tub));
}

template <typename S>
void BoxHeadT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    lin_.collect(prefix + ".lin", params);
}

template <typename S>
SwitchHeadT<S>::SwitchHeadT(int64_t model_dim, Rng& rng) : lin_(model_dim, 1, rng) {}

template <typename S>
TensorT<S> SwitchHeadT<S>::logits(const TensorT<S>& f_tub) const {
    TensorT<S> z = lin_.forward(f_tub);  // [N, T, 1]
    return reshape(z, {f_tub.dim(0), f_tub.dim(1)});
}

template <typename S>
void SwitchHeadT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    lin_.collect(prefix + ".lin", params);
}

template <typename S>
void LongTermBufferT<S>::push(int64_t clip_index, const TensorT<S>& f_b_flat) {
    if (!entries_.empty() && clip_index != entries_.back().first + 1)
        throw DataError("long-term buffer expects contiguous clip indices, got " +
                        std::to_string(clip_index) + " after " +
                        std::to_string(entries_.back().first));
    entries_.emplace_back(clip_index, f_b_flat.detached());
    const int64_t cap = 2 * window_ + 1;
    while (static_cast<int64_t>(entries_.size()) > cap) entries_.pop_front();
}

template <typename S>
TensorT<S> LongTermBufferT<S>::f_long(int64_t center_clip_index) const {
    const TensorT<S>* center = nullptr;
    for (const auto& [id, feat] : entries_)
        if (id == center_clip_index) center = &feat;
    if (!center) throw DataError("long-term buffer holds no features for clip " +
                                 std::to_string(center_clip_index));
    std::vector<TensorT<S>> parts;
    for (int64_t id = center_clip_index - window_; id <= center_clip_index + window_; ++id) {
        const TensorT<S>* found = nullptr;
        for (const auto& [eid, feat] : entries_)
            if (eid == id) found = &feat;
        parts.push_back(found ? *found : *center);
    }
    return concat(parts, 0);
}

template <typename S>
ClassificationHeadT<S>::ClassificationHeadT(ClassHeadKind kind, int64_t model_dim,
                                            int64_t label_count, int64_t heads, int64_t n0,
                                            int64_t n1, Rng& rng, bool pos_on_value)
    : kind_(kind), cls_(model_dim, label_count, rng) {
    if (kind == ClassHeadKind::plain) return;
    sa_ = MultiHeadSelfAttentionT<S>(model_dim, heads, rng, pos_on_value);
    ca_ = CrossAttentionT<S>(model_dim, rng, pos_on_value);
    if (kind == ClassHeadKind::long_term) {
        if (n0 < 1 || n1 < 1) throw ConfigError("long_term head needs n0, n1 >= 1");
        emb_n0_ = TensorT<S>::randn({n0, model_dim}, rng, 0.02);
        emb_n1_ = TensorT<S>::randn({n1, model_dim}, rng, 0.02);
        compress1_ = CrossAttentionT<S>(model_dim, rng);
        compress2_ = CrossAttentionT<S>(model_dim, rng);
        flt_ = CrossAttentionT<S>(model_dim, rng);
    }
}

template <typename S>
TensorT<S> ClassificationHeadT<S>::context_vector(const TensorT<S>& f_tub,
                                                  const TensorT<S>& context,
                                                  const TensorT<S>& pos,
                                                  const ForwardCtx& ctx) const {
    TensorT<S> pooled = pool_time(f_tub);
    TensorT<S> attended = sa_.forward(context, pos, ctx);
    return add(ca_.forward(pooled, attended, pos), pooled);
}

template <typename S>
TensorT<S> ClassificationHeadT<S>::compress_long_term(const TensorT<S>& f_long) const {
    TensorT<S> stage1 = compress1_.forward(emb_n0_, f_long, TensorT<S>());
    return compress2_.forward(emb_n1_, stage1, TensorT<S>());
}

template <typename S>
TensorT<S> ClassificationHeadT<S>::long_term_context(const TensorT<S>& f_b_flat,
                                                     const TensorT<S>& emb_long) const {
    return flt_.forward(f_b_flat, emb_long, TensorT<S>());
}

template <typename S>
TensorT<S> ClassificationHeadT<S>::forward(const TensorT<S>& f_tub, const TensorT<S>& f_b_flat,
                                           const TensorT<S>& pos, const TensorT<S>& f_long,
                                           const ForwardCtx& ctx) const {
    switch (kind_) {
        case ClassHeadKind::plain:
            return cls_.forward(pool_time(f_tub));
        case ClassHeadKind::short_term:
            return cls_.forward(context_vector(f_tub, f_b_flat, pos, ctx));
        case ClassHeadKind::long_term: {
            if (!f_long.defined())
                throw DataError("long_term head requires buffered features (f_long)");
            TensorT<S> emb_long = compress_long_term(f_long);
            TensorT<S> f_lt = long_term_context(f_b_flat, emb_long);
            return cls_.forward(context_vector(f_tub, f_lt, pos, ctx));
        }
    }
    throw ConfigError("unreachable class head kind");
}

template <typename S>
void ClassificationHeadT<S>::collect(const std::string& prefix, ParamMapT<S>& params) {
    cls_.collect(prefix + ".cls", params);
    if (kind_ == ClassHeadKind::plain) return;
    sa_.collect(prefix + ".sa", params);
    ca_.collect(prefix + ".ca", params);
    if (kind_ == ClassHeadKind::long_term) {
        params.add(prefix + ".emb_n0", emb_n0_);
        params.add(prefix + ".emb_n1", emb_n1_);
        compress1_.collect(prefix + ".compress1", params);
        compress2_.collect(prefix + ".compress2", params);
        flt_.collect(prefix + ".flt", params);
    }
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template TensorT<S> pool_time<S>(const TensorT<S>&);                                           \
    template class BoxHeadT<S>;                                                                    \
    template class SwitchHeadT<S>;                                                                 \
    template class LongTermBufferT<S>;                                                             \
    template class ClassificationHeadT<S>;

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
