#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <tuber/errors.hpp>
#include <tuber/grad_check.hpp>
#include <tuber/heads.hpp>

using namespace tuber;

namespace {

void fill_zero(Tensor64& t) {
    for (auto& v : t.values_mut()) v = 0.0;
}

}  // namespace

TEST_CASE("temporal pooling averages the middle axis") {
    Tensor64 f = Tensor64::from_values({1, 3, 2}, {1, 10, 2, 20, 3, 30});
    Tensor64 p = pool_time(f);
    REQUIRE(p.shape() == Shape{1, 2});
    CHECK(p.at({0, 0}) == doctest::Approx(2.0));
    CHECK(p.at({0, 1}) == doctest::Approx(20.0));
}

TEST_CASE("box head squashes zero features to centered boxes") {
    Rng rng(1);
    BoxHeadT<double> head(8, rng);
    Tensor64 boxes = head.forward(Tensor64::zeros({3, 4, 8}));
    REQUIRE(boxes.shape() == Shape{3, 4, 4});
    for (double v : boxes.values()) CHECK(v == doctest::Approx(0.5));

    Tensor64 f = Tensor64::randn({3, 4, 8}, rng);
    Tensor64 out = head.forward(f);
    for (double v : out.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("switch head emits one logit per frame") {
    Rng rng(2);
    SwitchHeadT<double> head(8, rng);
    Tensor64 logits = head.logits(Tensor64::zeros({3, 4, 8}));
    REQUIRE(logits.shape() == Shape{3, 4});
    for (double v : logits.values()) CHECK(v == 0.0);
}

TEST_CASE("plain head is a linear readout of the pooled tubelet") {
    Rng rng(3);
    ClassificationHeadT<double> head(ClassHeadKind::plain, 8, 5, 2, 1, 1, rng);
    ParamMapT<double> pm;
    head.collect("h", pm);
    auto bias = pm.find("h.cls.bias");
    for (int64_t i = 0; i < 5; ++i) bias->values_mut()[i] = 0.1 * static_cast<double>(i);

    Tensor64 logits =
        head.forward(Tensor64::zeros({3, 4, 8}), Tensor64(), Tensor64(), Tensor64(), ForwardCtx{});
    REQUIRE(logits.shape() == Shape{3, 5});
    for (int64_t n = 0; n < 3; ++n)
        for (int64_t l = 0; l < 5; ++l) CHECK(logits.at({n, l}) == bias->at({l}));
}

TEST_CASE("context vector reduces to the pooled tubelet when the value path is zeroed") {
    Rng rng(5);
    ClassificationHeadT<double> head(ClassHeadKind::short_term, 8, 5, 2, 1, 1, rng);
    fill_zero(head.context_attention().value_proj().weight());
    fill_zero(head.context_attention().value_proj().bias());

    Tensor64 f_tub = Tensor64::randn({3, 4, 8}, rng);
    Tensor64 context = Tensor64::randn({6, 8}, rng);
    Tensor64 pooled = pool_time(f_tub);
    Tensor64 f_c = head.context_vector(f_tub, context, Tensor64(), ForwardCtx{});
    REQUIRE(f_c.shape() == pooled.shape());
    for (int64_t i = 0; i < f_c.numel(); ++i) CHECK(f_c.values()[i] == pooled.values()[i]);

    // With the residual alone left, the logits equal the plain readout.
    ParamMapT<double> pm;
    head.collect("h", pm);
    Tensor64 expect = add(matmul(pooled, *pm.find("h.cls.weight")), *pm.find("h.cls.bias"));
    Tensor64 logits = head.forward(f_tub, context, Tensor64(), Tensor64(), ForwardCtx{});
    for (int64_t i = 0; i < logits.numel(); ++i) CHECK(logits.values()[i] == expect.values()[i]);
}

TEST_CASE("short-term context changes the logits when the value path is live") {
    Rng rng(7);
    ClassificationHeadT<double> head(ClassHeadKind::short_term, 8, 5, 2, 1, 1, rng);
    Tensor64 f_tub = Tensor64::randn({3, 4, 8}, rng);
    Tensor64 ca = Tensor64::randn({6, 8}, rng);
    Tensor64 cb = Tensor64::randn({6, 8}, rng);
    Tensor64 la = head.forward(f_tub, ca, Tensor64(), Tensor64(), ForwardCtx{});
    Tensor64 lb = head.forward(f_tub, cb, Tensor64(), Tensor64(), ForwardCtx{});
    double diff = 0;
    for (int64_t i = 0; i < la.numel(); ++i) diff += std::abs(la.values()[i] - lb.values()[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("two-stage compression lands on n1 tokens") {
    Rng rng(9);
    ClassificationHeadT<double> head(ClassHeadKind::long_term, 8, 5, 2, 6, 3, rng);
    Tensor64 f_long = Tensor64::randn({40, 8}, rng);
    Tensor64 emb = head.compress_long_term(f_long);
    CHECK(emb.shape() == Shape{3, 8});
}

TEST_CASE("compression ignores the ordering of the buffered rows") {
    Rng rng(11);
    ClassificationHeadT<double> head(ClassHeadKind::long_term, 8, 5, 2, 4, 2, rng);
    Tensor64 f_long = Tensor64::randn({10, 8}, rng);
    std::vector<int64_t> perm = {7, 3, 9, 0, 5, 1, 8, 2, 6, 4};
    Tensor64 a = head.compress_long_term(f_long);
    Tensor64 b = head.compress_long_term(take(f_long, 0, perm));
    for (int64_t i = 0; i < a.numel(); ++i)
        CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-10));
}

TEST_CASE("uniform long-term embeddings give a context independent of position") {
    Rng rng(13);
    ClassificationHeadT<double> head(ClassHeadKind::long_term, 8, 5, 2, 4, 2, rng);
    Tensor64 one = Tensor64::randn({1, 8}, rng);
    Tensor64 emb_long = concat<double>({one, one, one}, 0);
    Tensor64 f_b = Tensor64::randn({6, 8}, rng);
    Tensor64 f_lt = head.long_term_context(f_b, emb_long);
    REQUIRE(f_lt.shape() == Shape{6, 8});
    for (int64_t r = 1; r < 6; ++r)
        for (int64_t c = 0; c < 8; ++c)
            CHECK(f_lt.at({r, c}) == doctest::Approx(f_lt.at({0, c})).epsilon(1e-12));
}

TEST_CASE("long-term head validates its compression widths") {
    Rng rng(15);
    CHECK_THROWS_AS(ClassificationHeadT<double>(ClassHeadKind::long_term, 8, 5, 2, 0, 1, rng),
                    ConfigError);
}

TEST_CASE("all head variants emit [N, L] logits") {
    Rng rng(17);
    Tensor64 f_tub = Tensor64::randn({3, 4, 8}, rng);
    Tensor64 f_b = Tensor64::randn({6, 8}, rng);
    Tensor64 f_long = Tensor64::randn({12, 8}, rng);
    for (ClassHeadKind kind :
         {ClassHeadKind::plain, ClassHeadKind::short_term, ClassHeadKind::long_term}) {
        ClassificationHeadT<double> head(kind, 8, 5, 2, 4, 2, rng);
        Tensor64 logits = head.forward(f_tub, f_b, Tensor64(), f_long, ForwardCtx{});
        CHECK(logits.shape() == Shape{3, 5});
        CHECK(head.kind() == kind);
    }
}

TEST_CASE("buffer pads missing neighbors with the center clip") {
    LongTermBufferT<double> buf(1);
    Rng rng(19);
    Tensor64 f0 = Tensor64::randn({4, 8}, rng);
    buf.push(0, f0);
    Tensor64 f_long = buf.f_long(0);
    REQUIRE(f_long.shape() == Shape{12, 8});
    for (int64_t part = 0; part < 3; ++part)
        for (int64_t r = 0; r < 4; ++r)
            for (int64_t c = 0; c < 8; ++c)
                CHECK(f_long.at({part * 4 + r, c}) == f0.at({r, c}));
}

TEST_CASE("buffer keeps a sliding window of contiguous clips") {
    LongTermBufferT<double> buf(1);
    Rng rng(21);
    std::vector<Tensor64> feats;
    for (int64_t i = 0; i < 4; ++i) {
        feats.push_back(Tensor64::randn({2, 8}, rng));
        buf.push(i, feats.back());
    }
    CHECK(buf.size() == 3);  // clip 0 evicted
    CHECK_THROWS_AS(buf.f_long(0), DataError);
    CHECK_THROWS_AS(buf.push(9, feats[0]), DataError);

    Tensor64 f_long = buf.f_long(2);
    REQUIRE(f_long.shape() == Shape{6, 8});
    for (int64_t part = 0; part < 3; ++part)
        for (int64_t r = 0; r < 2; ++r)
            for (int64_t c = 0; c < 8; ++c)
                CHECK(f_long.at({part * 2 + r, c}) == feats[static_cast<size_t>(part + 1)].at({r, c}));
}

TEST_CASE("buffered features are detached from the tape") {
    LongTermBufferT<double> buf(1);
    Rng rng(23);
    Tensor64 f = Tensor64::randn({2, 8}, rng);
    f.set_requires_grad(true);
    buf.push(0, f);
    CHECK_FALSE(buf.f_long(0).requires_grad());
}

TEST_CASE("box and switch head gradients pass finite differences") {
    Rng rng(25);
    BoxHeadT<double> box(8, rng);
    SwitchHeadT<double> sw(8, rng);
    ParamMapT<double> pm;
    box.collect("box", pm);
    sw.collect("sw", pm);
    Tensor64 f = Tensor64::randn({2, 3, 8}, rng, 0.5);
    Tensor64 rb = Tensor64::randn({2, 3, 4}, rng);
    Tensor64 rs = Tensor64::randn({2, 3}, rng);

    auto fn_box = [&]() { return sum_all(mul(box.forward(f), rb)); };
    CHECK(grad_check<double>(fn_box, {f, *pm.find("box.lin.weight")}).max_rel_error < 1e-6);

    auto fn_sw = [&]() { return sum_all(mul(sw.logits(f), rs)); };
    CHECK(grad_check<double>(fn_sw, {f, *pm.find("sw.lin.weight")}).max_rel_error < 1e-6);
}

TEST_CASE("plain head gradients pass finite differences") {
    Rng rng(27);
    ClassificationHeadT<double> head(ClassHeadKind::plain, 8, 5, 2, 1, 1, rng);
    ParamMapT<double> pm;
    head.collect("h", pm);
    Tensor64 f = Tensor64::randn({2, 3, 8}, rng, 0.5);
    Tensor64 r = Tensor64::randn({2, 5}, rng);
    auto fn = [&]() {
        return sum_all(mul(head.forward(f, Tensor64(), Tensor64(), Tensor64(), ForwardCtx{}), r));
    };
    CHECK(grad_check<double>(fn, {f, *pm.find("h.cls.weight")}).max_rel_error < 1e-6);
}

TEST_CASE("short-term head gradients pass finite differences") {
    Rng rng(29);
    ClassificationHeadT<double> head(ClassHeadKind::short_term, 8, 5, 2, 1, 1, rng);
    Tensor64 f = Tensor64::randn({2, 3, 8}, rng, 0.5);
    Tensor64 ctx = Tensor64::randn({4, 8}, rng, 0.5);
    Tensor64 r = Tensor64::randn({2, 5}, rng);
    auto fn = [&]() {
        return sum_all(mul(head.forward(f, ctx, Tensor64(), Tensor64(), ForwardCtx{}), r));
    };
    CHECK(grad_check<double>(fn, {f, ctx}).max_rel_error < 1e-4);
}

TEST_CASE("long-term head gradients pass finite differences") {
    Rng rng(31);
    ClassificationHeadT<double> head(ClassHeadKind::long_term, 8, 5, 2, 4, 2, rng);
    ParamMapT<double> pm;
    head.collect("h", pm);
    Tensor64 f = Tensor64::randn({2, 3, 8}, rng, 0.5);
    Tensor64 f_b = Tensor64::randn({4, 8}, rng, 0.5);
    Tensor64 f_long = Tensor64::randn({8, 8}, rng, 0.5);
    Tensor64 r = Tensor64::randn({2, 5}, rng);
    auto fn = [&]() {
        return sum_all(mul(head.forward(f, f_b, Tensor64(), f_long, ForwardCtx{}), r));
    };
    CHECK(grad_check<double>(fn, {f, f_b, f_long, *pm.find("h.emb_n0")}).max_rel_error < 1e-4);
}
