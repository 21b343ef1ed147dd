#include <cmath>

#include "ops_common.hpp"
#include "tuber/rng.hpp"

namespace tuber {

using detail::normalize_axis;
using detail::split_axis;
using detail::tracking;

template <typename S>
TensorT<S> relu(const TensorT<S>& a) {
    return clamp_min(a, S(0));
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& a) {
    const auto av = a.values();
    std::vector<S> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = S(1) / (S(1) + std::exp(-av[i]));
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            const auto ov = o.values();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i] * (S(1) - ov[i]);
        });
    }
    return o;
}

template <typename S>
TensorT<S> gelu(const TensorT<S>& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    const auto av = a.values();
    std::vector<S> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) {
        double x = static_cast<double>(av[i]);
        out[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
    }
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            const auto av = a.values();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (size_t i = 0; i < g.size(); ++i) {
                double x = static_cast<double>(av[i]);
                double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                ga[i] += g[i] * static_cast<S>(cdf + x * pdf);
            }
        });
    }
    return o;
}

template <typename S>
TensorT<S> softmax(const TensorT<S>& a, int64_t axis) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "softmax");
    auto sp = split_axis(a.shape(), ax);
    const auto av = a.values();
    std::vector<S> out(av.size());
    for (int64_t ou = 0; ou < sp.outer; ++ou)
        for (int64_t i = 0; i < sp.inner; ++i) {
            const int64_t base = ou * sp.len * sp.inner + i;
            S mx = av[static_cast<size_t>(base)];
            for (int64_t l = 1; l < sp.len; ++l)
                mx = std::max(mx, av[static_cast<size_t>(base + l * sp.inner)]);
            S denom = 0;
            for (int64_t l = 0; l < sp.len; ++l) {
                S e = std::exp(av[static_cast<size_t>(base + l * sp.inner)] - mx);
                out[static_cast<size_t>(base + l * sp.inner)] = e;
                denom += e;
            }
            for (int64_t l = 0; l < sp.len; ++l) out[static_cast<size_t>(base + l * sp.inner)] /= denom;
        }
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, sp]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            const auto ov = o.values();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t i = 0; i < sp.inner; ++i) {
                    const int64_t base = ou * sp.len * sp.inner + i;
                    S dot = 0;
                    for (int64_t l = 0; l < sp.len; ++l) {
                        const size_t k = static_cast<size_t>(base + l * sp.inner);
                        dot += g[k] * ov[k];
                    }
                    for (int64_t l = 0; l < sp.len; ++l) {
                        const size_t k = static_cast<size_t>(base + l * sp.inner);
                        ga[k] += ov[k] * (g[k] - dot);
                    }
                }
        });
    }
    return o;
}

template <typename S>
TensorT<S> log_softmax(const TensorT<S>& a, int64_t axis) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "log_softmax");
    auto sp = split_axis(a.shape(), ax);
    const auto av = a.values();
    std::vector<S> out(av.size());
    for (int64_t ou = 0; ou < sp.outer; ++ou)
        for (int64_t i = 0; i < sp.inner; ++i) {
            const int64_t base = ou * sp.len * sp.inner + i;
            S mx = av[static_cast<size_t>(base)];
            for (int64_t l = 1; l < sp.len; ++l)
                mx = std::max(mx, av[static_cast<size_t>(base + l * sp.inner)]);
            S denom = 0;
            for (int64_t l = 0; l < sp.len; ++l)
                denom += std::exp(av[static_cast<size_t>(base + l * sp.inner)] - mx);
            const S lse = mx + std::log(denom);
            for (int64_t l = 0; l < sp.len; ++l) {
                const size_t k = static_cast<size_t>(base + l * sp.inner);
                out[k] = av[k] - lse;
            }
        }
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, sp]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            const auto ov = o.values();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t i = 0; i < sp.inner; ++i) {
                    const int64_t base = ou * sp.len * sp.inner + i;
                    S gsum = 0;
                    for (int64_t l = 0; l < sp.len; ++l)
                        gsum += g[static_cast<size_t>(base + l * sp.inner)];
                    for (int64_t l = 0; l < sp.len; ++l) {
                        const size_t k = static_cast<size_t>(base + l * sp.inner);
                        ga[k] += g[k] - std::exp(ov[k]) * gsum;
                    }
                }
        });
    }
    return o;
}

template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta, S eps) {
    const int64_t C = x.dim(-1);
    if (gamma.numel() != C || beta.numel() != C)
        throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(C) + " elements");
    const int64_t rows = x.numel() / C;
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    std::vector<S> out(xv.size());
    std::vector<S> xhat(xv.size());
    std::vector<S> rstd(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const S* px = xv.data() + r * C;
        S mu = 0;
        for (int64_t c = 0; c < C; ++c) mu += px[c];
        mu /= static_cast<S>(C);
        S var = 0;
        for (int64_t c = 0; c < C; ++c) {
            S d = px[c] - mu;
            var += d * d;
        }
        var /= static_cast<S>(C);
        const S rs = S(1) / std::sqrt(var + eps);
        rstd[static_cast<size_t>(r)] = rs;
        for (int64_t c = 0; c < C; ++c) {
            const S h = (px[c] - mu) * rs;
            xhat[static_cast<size_t>(r * C + c)] = h;
            out[static_cast<size_t>(r * C + c)] = gv[static_cast<size_t>(c)] * h + bv[static_cast<size_t>(c)];
        }
    }
    TensorT<S> o = TensorT<S>::from_values(x.shape(), std::move(out));
    if (tracking<S>(x, gamma, beta)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record(
            [x, gamma, beta, o, C, rows, xhat = std::move(xhat), rstd = std::move(rstd)]() {
                if (!o.has_grad()) return;
                const auto g = o.grad();
                const auto gv = gamma.values();
                if (gamma.requires_grad()) {
                    TensorT<S> gm = gamma;
                    auto gg = gm.grad_mut();
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t c = 0; c < C; ++c)
                            gg[static_cast<size_t>(c)] += g[static_cast<size_t>(r * C + c)] *
                                                          xhat[static_cast<size_t>(r * C + c)];
                }
                if (beta.requires_grad()) {
                    TensorT<S> bm = beta;
                    auto gb = bm.grad_mut();
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t c = 0; c < C; ++c)
                            gb[static_cast<size_t>(c)] += g[static_cast<size_t>(r * C + c)];
                }
                if (x.requires_grad()) {
                    TensorT<S> xm = x;
                    auto gx = xm.grad_mut();
                    for (int64_t r = 0; r < rows; ++r) {
                        S m1 = 0, m2 = 0;
                        for (int64_t c = 0; c < C; ++c) {
                            const size_t k = static_cast<size_t>(r * C + c);
                            const S gy = g[k] * gv[static_cast<size_t>(c)];
                            m1 += gy;
                            m2 += gy * xhat[k];
                        }
                        m1 /= static_cast<S>(C);
                        m2 /= static_cast<S>(C);
                        const S rs = rstd[static_cast<size_t>(r)];
                        for (int64_t c = 0; c < C; ++c) {
                            const size_t k = static_cast<size_t>(r * C + c);
                            const S gy = g[k] * gv[static_cast<size_t>(c)];
                            gx[k] += rs * (gy - m1 - xhat[k] * m2);
                        }
                    }
                }
            });
    }
    return o;
}

template <typename S>
TensorT<S> dropout(const TensorT<S>& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate " + std::to_string(rate) + " outside [0, 1)");
    if (!training || rate == 0.0) return x;
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
    const auto xv = x.values();
    std::vector<S> mask(xv.size());
    for (auto& m : mask) m = rng.uniform() < rate ? S(0) : keep_scale;
    std::vector<S> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
    TensorT<S> o = TensorT<S>::from_values(x.shape(), std::move(out));
    if (tracking<S>(x)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([x, o, mask = std::move(mask)]() {
            if (!o.has_grad() || !x.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> xm = x;
            auto gx = xm.grad_mut();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
        });
    }
    return o;
}

template <typename S>
TensorT<S> embedding(const TensorT<S>& table, const std::vector<int64_t>& ids) {
    if (table.ndim() != 2) throw ShapeError("embedding: table must be [V, C]");
    return take(table, 0, ids);
}

template <typename S>
TensorT<S> bce_with_logits(const TensorT<S>& logits, const TensorT<S>& targets) {
    if (!same_shape(logits.shape(), targets.shape()))
        throw ShapeError("bce_with_logits: " + shape_str(logits.shape()) + " vs " +
                         shape_str(targets.shape()));
    const auto zv = logits.values();
    const auto yv = targets.values();
    std::vector<S> out(zv.size());
    for (size_t i = 0; i < zv.size(); ++i) {
        const S z = zv[i];
        out[i] = std::max(z, S(0)) - z * yv[i] + std::log1p(std::exp(-std::fabs(z)));
    }
    TensorT<S> o = TensorT<S>::from_values(logits.shape(), std::move(out));
    if (tracking<S>(logits, targets)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([logits, targets, o]() {
            if (!o.has_grad()) return;
            const auto g = o.grad();
            const auto zv = logits.values();
            const auto yv = targets.values();
            if (logits.requires_grad()) {
                TensorT<S> zm = logits;
                auto gz = zm.grad_mut();
                for (size_t i = 0; i < g.size(); ++i) {
                    const S p = S(1) / (S(1) + std::exp(-zv[i]));
                    gz[i] += g[i] * (p - yv[i]);
                }
            }
            if (targets.requires_grad()) {
                TensorT<S> ym = targets;
                auto gy = ym.grad_mut();
                for (size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * (-zv[i]);
            }
        });
    }
    return o;
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template TensorT<S> relu<S>(const TensorT<S>&);                                                \
    template TensorT<S> sigmoid<S>(const TensorT<S>&);                                             \
    template TensorT<S> gelu<S>(const TensorT<S>&);                                                \
    template TensorT<S> softmax<S>(const TensorT<S>&, int64_t);                                    \
    template TensorT<S> log_softmax<S>(const TensorT<S>&, int64_t);                                \
    template TensorT<S> layer_norm<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&, S); \
    template TensorT<S> dropout<S>(const TensorT<S>&, double, Rng&, bool);                         \
    template TensorT<S> embedding<S>(const TensorT<S>&, const std::vector<int64_t>&);              \
    template TensorT<S> bce_with_logits<S>(const TensorT<S>&, const TensorT<S>&);

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
