#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <tuber/attention.hpp>
#include <tuber/errors.hpp>
#include <tuber/grad_check.hpp>
#include <tuber/transformer.hpp>

using namespace tuber;

namespace {

void fill_value(Tensor64* t, double v) {
    REQUIRE(t != nullptr);
    for (auto& e : t->values_mut()) e = v;
}

// Overwrites a square weight matrix with the identity.
void set_identity(Tensor64* w) {
    REQUIRE(w != nullptr);
    REQUIRE(w->ndim() == 2);
    REQUIRE(w->dim(0) == w->dim(1));
    auto vals = w->values_mut();
    std::fill(vals.begin(), vals.end(), 0.0);
    for (int64_t i = 0; i < w->dim(0); ++i) vals[static_cast<size_t>(i * w->dim(1) + i)] = 1.0;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

std::vector<double> row_of(const Tensor64& m, int64_t r) {
    std::vector<double> out(static_cast<size_t>(m.dim(1)));
    for (int64_t c = 0; c < m.dim(1); ++c) out[static_cast<size_t>(c)] = m.at({r, c});
    return out;
}

}  // namespace

TEST_CASE("positional embedding shape, range, and padding") {
    Tensor64 pe = positional_embedding_3d<double>(3, 4, 5, 18);
    CHECK(pe.shape() == Shape{60, 18});
    for (double v : pe.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }

    // 16 channels leave 4 beyond the last full sin/cos triple; those stay zero.
    Tensor64 padded = positional_embedding_3d<double>(2, 2, 2, 16);
    for (int64_t r = 0; r < padded.dim(0); ++r)
        for (int64_t c = 12; c < 16; ++c) CHECK(padded.at({r, c}) == 0.0);
}

TEST_CASE("positional embedding puts each axis in its own channel block") {
    const int64_t t = 3, h = 2, w = 2, c = 18;  // pairs=3, 6 channels per axis
    Tensor64 pe = positional_embedding_3d<double>(t, h, w, c);
    auto row = [&](int64_t it, int64_t ih, int64_t iw) { return (it * h + ih) * w + iw; };

    // Same (h, w): spatial channels 6..17 agree across t.
    for (int64_t c2 = 6; c2 < 18; ++c2)
        CHECK(pe.at({row(0, 1, 1), c2}) == pe.at({row(2, 1, 1), c2}));
    // Same t: temporal channels 0..5 agree across positions.
    for (int64_t c2 = 0; c2 < 6; ++c2)
        CHECK(pe.at({row(1, 0, 0), c2}) == pe.at({row(1, 1, 1), c2}));
    // Distinct positions get distinct rows.
    CHECK(row_of(pe, row(0, 0, 0)) != row_of(pe, row(0, 0, 1)));
    CHECK(row_of(pe, row(0, 0, 0)) != row_of(pe, row(1, 0, 0)));
}

TEST_CASE("positional embedding at the origin is alternating sin0/cos0") {
    Tensor64 pe = positional_embedding_3d<double>(1, 1, 1, 12);
    for (int64_t c = 0; c < 12; ++c) CHECK(pe.at({0, c}) == (c % 2 == 0 ? 0.0 : 1.0));
}

TEST_CASE("positional embedding: nearby frames are more similar than distant ones") {
    // Distances stay below pi so the highest-frequency pair cannot wrap.
    Tensor64 pe = positional_embedding_3d<double>(8, 1, 1, 12);
    double near = cosine(row_of(pe, 0), row_of(pe, 1));
    double far = cosine(row_of(pe, 0), row_of(pe, 3));
    CHECK(near > far);
}

TEST_CASE("positional embedding rejects empty axes and narrow channels") {
    CHECK_THROWS_AS(positional_embedding_3d<double>(0, 1, 1, 12), ShapeError);
    CHECK_THROWS_AS(positional_embedding_3d<double>(1, 1, 1, 5), ShapeError);
}

TEST_CASE("self-attention over a single position reduces to the value path") {
    Rng rng(7);
    MultiHeadSelfAttentionT<double> mha(4, 2, rng);
    ParamMapT<double> pm;
    mha.collect("m", pm);

    Tensor64 x = Tensor64::randn({1, 4}, rng);
    Tensor64 out = mha.forward(x, Tensor64(), ForwardCtx{});

    Tensor64 v = add(matmul(x, *pm.find("m.wv.weight")), *pm.find("m.wv.bias"));
    Tensor64 expect = add(matmul(v, *pm.find("m.wo.weight")), *pm.find("m.wo.bias"));
    REQUIRE(out.shape() == expect.shape());
    for (int64_t i = 0; i < 4; ++i)
        CHECK(out.at({0, i}) == doctest::Approx(expect.at({0, i})).epsilon(1e-12));
}

TEST_CASE("self-attention with zero query/key weights mixes values uniformly") {
    Rng rng(11);
    MultiHeadSelfAttentionT<double> mha(6, 2, rng);
    ParamMapT<double> pm;
    mha.collect("m", pm);
    fill_value(pm.find("m.wq.weight"), 0.0);
    fill_value(pm.find("m.wq.bias"), 0.0);
    fill_value(pm.find("m.wk.weight"), 0.0);
    fill_value(pm.find("m.wk.bias"), 0.0);

    Tensor64 x = Tensor64::randn({5, 6}, rng);
    Tensor64 out = mha.forward(x, Tensor64(), ForwardCtx{});

    Tensor64 v = add(matmul(x, *pm.find("m.wv.weight")), *pm.find("m.wv.bias"));
    Tensor64 expect = add(matmul(mean(v, 0, true), *pm.find("m.wo.weight")), *pm.find("m.wo.bias"));
    for (int64_t r = 0; r < 5; ++r)
        for (int64_t c = 0; c < 6; ++c)
            CHECK(out.at({r, c}) == doctest::Approx(expect.at({0, c})).epsilon(1e-10));
}

TEST_CASE("self-attention matches a hand computation with identity weights") {
    Rng rng(3);
    MultiHeadSelfAttentionT<double> mha(2, 1, rng);
    ParamMapT<double> pm;
    mha.collect("m", pm);
    for (const char* w : {"m.wq.weight", "m.wk.weight", "m.wv.weight", "m.wo.weight"})
        set_identity(pm.find(w));
    for (const char* b : {"m.wq.bias", "m.wk.bias", "m.wv.bias", "m.wo.bias"})
        fill_value(pm.find(b), 0.0);

    Tensor64 x = Tensor64::from_values({2, 2}, {1, 0, 0, 1});
    Tensor64 out = mha.forward(x, Tensor64(), ForwardCtx{});

    // q = k = v = x, so scores = x x^T / sqrt(2) and the output rows are the
    // softmaxed score rows themselves.
    const double s = 1.0 / std::sqrt(2.0);
    const double hi = std::exp(s) / (std::exp(s) + 1.0);
    CHECK(out.at({0, 0}) == doctest::Approx(hi).epsilon(1e-12));
    CHECK(out.at({0, 1}) == doctest::Approx(1.0 - hi).epsilon(1e-12));
    CHECK(out.at({1, 0}) == doctest::Approx(1.0 - hi).epsilon(1e-12));
    CHECK(out.at({1, 1}) == doctest::Approx(hi).epsilon(1e-12));
}

TEST_CASE("positions enter after the projections and skip the value path by default") {
    Rng rng(5);
    Tensor64 pos = positional_embedding_3d<double>(1, 2, 2, 6);
    Tensor64 x = Tensor64::zeros({4, 6});

    MultiHeadSelfAttentionT<double> plain(6, 2, rng);
    ParamMapT<double> pm;
    plain.collect("m", pm);
    for (const char* n : {"m.wq.weight", "m.wq.bias", "m.wk.weight", "m.wk.bias", "m.wv.weight",
                          "m.wv.bias"})
        fill_value(pm.find(n), 0.0);

    // Values are zero everywhere, so the output collapses to the output bias
    // no matter how the positional table reshapes the attention pattern.
    Tensor64 out = plain.forward(x, pos, ForwardCtx{});
    Tensor64* bo = pm.find("m.wo.bias");
    for (int64_t r = 0; r < 4; ++r)
        for (int64_t c = 0; c < 6; ++c)
            CHECK(out.at({r, c}) == doctest::Approx(bo->at({c})).epsilon(1e-12));

    // pos_on_value routes the table into the values, so the same zero input
    // no longer collapses.
    MultiHeadSelfAttentionT<double> pov(6, 2, rng, true);
    ParamMapT<double> pm2;
    pov.collect("m", pm2);
    for (const char* n : {"m.wq.weight", "m.wq.bias", "m.wk.weight", "m.wk.bias", "m.wv.weight",
                          "m.wv.bias"})
        fill_value(pm2.find(n), 0.0);
    Tensor64 out2 = pov.forward(x, pos, ForwardCtx{});
    Tensor64* bo2 = pm2.find("m.wo.bias");
    double diff = 0;
    for (int64_t r = 0; r < 4; ++r)
        for (int64_t c = 0; c < 6; ++c) diff += std::abs(out2.at({r, c}) - bo2->at({c}));
    CHECK(diff > 1e-6);
}

TEST_CASE("batched self-attention matches per-sequence runs") {
    Rng rng(13);
    MultiHeadSelfAttentionT<double> mha(8, 2, rng);
    Tensor64 a = Tensor64::randn({3, 8}, rng);
    Tensor64 b = Tensor64::randn({3, 8}, rng);
    Tensor64 batch = concat<double>({reshape(a, {1, 3, 8}), reshape(b, {1, 3, 8})}, 0);
    Tensor64 pos = positional_embedding_3d<double>(3, 1, 1, 8);

    Tensor64 ob = mha.forward(batch, pos, ForwardCtx{});
    Tensor64 oa = mha.forward(a, pos, ForwardCtx{});
    Tensor64 ob1 = mha.forward(b, pos, ForwardCtx{});
    for (int64_t r = 0; r < 3; ++r)
        for (int64_t c = 0; c < 8; ++c) {
            CHECK(ob.at({0, r, c}) == doctest::Approx(oa.at({r, c})).epsilon(1e-12));
            CHECK(ob.at({1, r, c}) == doctest::Approx(ob1.at({r, c})).epsilon(1e-12));
        }
}

TEST_CASE("self-attention rejects bad head counts and channel mismatches") {
    Rng rng(1);
    CHECK_THROWS_AS(MultiHeadSelfAttentionT<double>(6, 4, rng), ConfigError);
    MultiHeadSelfAttentionT<double> mha(6, 2, rng);
    CHECK_THROWS_AS(mha.forward(Tensor64::zeros({2, 4}), Tensor64(), ForwardCtx{}), ShapeError);
    CHECK_THROWS_AS(mha.forward(Tensor64::zeros({2}), Tensor64(), ForwardCtx{}), ShapeError);
}

TEST_CASE("cross-attention over one key returns its projected value exactly") {
    Rng rng(17);
    CrossAttentionT<double> ca(6, rng);
    Tensor64 q = Tensor64::randn({1, 6}, rng);
    Tensor64 kv = Tensor64::randn({1, 6}, rng);
    Tensor64 out = ca.forward(q, kv, Tensor64());
    Tensor64 expect = ca.value_proj().forward(kv);
    for (int64_t c = 0; c < 6; ++c) CHECK(out.at({0, c}) == expect.at({0, c}));
}

TEST_CASE("cross-attention with identical key rows ignores the queries") {
    Rng rng(19);
    CrossAttentionT<double> ca(6, rng);
    Tensor64 one = Tensor64::randn({1, 6}, rng);
    Tensor64 kv = concat<double>({one, one, one}, 0);
    Tensor64 qa = Tensor64::randn({2, 6}, rng);
    Tensor64 qb = Tensor64::randn({2, 6}, rng);
    Tensor64 oa = ca.forward(qa, kv, Tensor64());
    Tensor64 ob = ca.forward(qb, kv, Tensor64());
    for (int64_t r = 0; r < 2; ++r)
        for (int64_t c = 0; c < 6; ++c)
            CHECK(oa.at({r, c}) == doctest::Approx(ob.at({r, c})).epsilon(1e-12));
}

TEST_CASE("cross-attention matches a hand computation") {
    Rng rng(23);
    CrossAttentionT<double> ca(2, rng);
    ParamMapT<double> pm;
    ca.collect("c", pm);
    set_identity(pm.find("c.wk.weight"));
    set_identity(pm.find("c.wv.weight"));
    fill_value(pm.find("c.wk.bias"), 0.0);
    fill_value(pm.find("c.wv.bias"), 0.0);

    Tensor64 q = Tensor64::from_values({1, 2}, {1, 0});
    Tensor64 kv = Tensor64::from_values({2, 2}, {2, 0, 0, 2});
    Tensor64 out = ca.forward(q, kv, Tensor64());

    const double s0 = 2.0 / std::sqrt(2.0);
    const double a0 = std::exp(s0) / (std::exp(s0) + 1.0);
    CHECK(out.at({0, 0}) == doctest::Approx(2.0 * a0).epsilon(1e-12));
    CHECK(out.at({0, 1}) == doctest::Approx(2.0 * (1.0 - a0)).epsilon(1e-12));
}

TEST_CASE("cross-attention validates ranks and channels") {
    Rng rng(1);
    CrossAttentionT<double> ca(6, rng);
    CHECK_THROWS_AS(ca.forward(Tensor64::zeros({2, 4}), Tensor64::zeros({3, 6}), Tensor64()),
                    ShapeError);
    CHECK_THROWS_AS(ca.forward(Tensor64::zeros({2, 6}), Tensor64::zeros({3, 6, 1}), Tensor64()),
                    ShapeError);
}

TEST_CASE("zero-layer encoder is the identity") {
    Rng rng(29);
    EncoderStackT<double> enc(0, 12, 2, 0.0, rng, false);
    Tensor64 x = Tensor64::randn({4, 12}, rng);
    Tensor64 out = enc.forward(x, Tensor64(), ForwardCtx{});
    CHECK(out.data() == x.data());
}

TEST_CASE("encoder preserves shape and changes content") {
    Rng rng(31);
    EncoderStackT<double> enc(2, 12, 2, 0.0, rng, false);
    Tensor64 pos = positional_embedding_3d<double>(2, 1, 3, 12);
    Tensor64 x = Tensor64::randn({6, 12}, rng);
    Tensor64 out = enc.forward(x, pos, ForwardCtx{});
    REQUIRE(out.shape() == x.shape());
    double diff = 0;
    for (int64_t r = 0; r < 6; ++r)
        for (int64_t c = 0; c < 12; ++c) diff += std::abs(out.at({r, c}) - x.at({r, c}));
    CHECK(diff > 1e-3);
}

TEST_CASE("encoder output gradient w.r.t. its input passes finite differences") {
    Rng rng(37);
    EncoderStackT<double> enc(1, 12, 2, 0.0, rng, false);
    Tensor64 pos = positional_embedding_3d<double>(2, 1, 2, 12);
    Tensor64 x = Tensor64::randn({4, 12}, rng, 0.5);
    auto fn = [&]() { return sum_all(enc.forward(x, pos, ForwardCtx{})); };
    auto report = grad_check<double>(fn, {x});
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("encoder is equivariant to permuting tokens together with positions") {
    Rng rng(41);
    EncoderStackT<double> enc(2, 12, 2, 0.0, rng, false);
    Tensor64 pos = positional_embedding_3d<double>(5, 1, 1, 12);
    Tensor64 x = Tensor64::randn({5, 12}, rng);
    std::vector<int64_t> perm = {3, 0, 4, 1, 2};

    Tensor64 base = enc.forward(x, pos, ForwardCtx{});
    Tensor64 shuffled = enc.forward(take(x, 0, perm), take(pos, 0, perm), ForwardCtx{});
    for (int64_t r = 0; r < 5; ++r)
        for (int64_t c = 0; c < 12; ++c)
            CHECK(shuffled.at({r, c}) ==
                  doctest::Approx(base.at({perm[static_cast<size_t>(r)], c})).epsilon(1e-5));
}

TEST_CASE("encoder dropout needs an rng in training mode and is identity in eval") {
    Rng rng(43);
    EncoderStackT<double> enc(1, 12, 2, 0.5, rng, false);
    Tensor64 x = Tensor64::randn({3, 12}, rng);
    CHECK_THROWS_AS(enc.forward(x, Tensor64(), ForwardCtx{nullptr, true}), ConfigError);
    Tensor64 a = enc.forward(x, Tensor64(), ForwardCtx{});
    Tensor64 b = enc.forward(x, Tensor64(), ForwardCtx{});
    for (int64_t r = 0; r < 3; ++r)
        for (int64_t c = 0; c < 12; ++c) CHECK(a.at({r, c}) == b.at({r, c}));
}
