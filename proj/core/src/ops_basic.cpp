#include <cmath>
#include <cstring>

#include "blas.hpp"
#include "ops_common.hpp"

namespace tuber {

using detail::accumulate;
using detail::normalize_axis;
using detail::require_suffix;
using detail::row_major_strides;
using detail::split_axis;
using detail::tracking;

namespace {

// Shared skeleton for the broadcasting binary ops. fwd(x, y) -> out value;
// dfx/dfy(x, y) -> local derivatives.
template <typename S, typename F, typename Dx, typename Dy>
TensorT<S> binary_op(const TensorT<S>& a, const TensorT<S>& b, const char* name, F fwd, Dx dfx,
                     Dy dfy) {
    require_suffix(a, b, name);
    const auto av = a.values();
    const auto bv = b.values();
    const size_t nb = bv.size();
    std::vector<S> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i % nb]);
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a, b)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, b, o, dfx, dfy]() {
            if (!o.has_grad()) return;
            const auto g = o.grad();
            const auto av = a.values();
            const auto bv = b.values();
            const size_t nb = bv.size();
            if (a.requires_grad()) {
                TensorT<S> am = a;
                auto ga = am.grad_mut();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfx(av[i], bv[i % nb]);
            }
            if (b.requires_grad()) {
                TensorT<S> bm = b;
                auto gb = bm.grad_mut();
                for (size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * dfy(av[i], bv[i % nb]);
            }
        });
    }
    return o;
}

template <typename S, typename F, typename D>
TensorT<S> unary_op(const TensorT<S>& a, F fwd, D dfx) {
    const auto av = a.values();
    std::vector<S> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    TensorT<S> o = TensorT<S>::from_values(a.shape(), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, dfx]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            const auto av = a.values();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfx(av[i]);
        });
    }
    return o;
}

}  // namespace

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "add", [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
        [](S, S) { return S(1); });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "sub", [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
        [](S, S) { return S(-1); });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "mul", [](S x, S y) { return x * y; }, [](S, S y) { return y; },
        [](S x, S) { return x; });
}

template <typename S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "div", [](S x, S y) { return x / y; }, [](S, S y) { return S(1) / y; },
        [](S x, S y) { return -x / (y * y); });
}

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
    return unary_op(
        a, [c](S x) { return x + c; }, [](S) { return S(1); });
}

template <typename S>
TensorT<S> mul_scalar(const TensorT<S>& a, S c) {
    return unary_op(
        a, [c](S x) { return x * c; }, [c](S) { return c; });
}

template <typename S>
TensorT<S> neg(const TensorT<S>& a) {
    return mul_scalar(a, S(-1));
}

template <typename S>
TensorT<S> abs(const TensorT<S>& a) {
    return unary_op(
        a, [](S x) { return x < S(0) ? -x : x; },
        [](S x) { return x < S(0) ? S(-1) : (x > S(0) ? S(1) : S(0)); });
}

template <typename S>
TensorT<S> clamp_min(const TensorT<S>& a, S c) {
    return unary_op(
        a, [c](S x) { return x < c ? c : x; }, [c](S x) { return x > c ? S(1) : S(0); });
}

template <typename S>
TensorT<S> minimum(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "minimum", [](S x, S y) { return x < y ? x : y; },
        [](S x, S y) { return x <= y ? S(1) : S(0); }, [](S x, S y) { return x > y ? S(1) : S(0); });
}

template <typename S>
TensorT<S> maximum(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op(
        a, b, "maximum", [](S x, S y) { return x > y ? x : y; },
        [](S x, S y) { return x >= y ? S(1) : S(0); }, [](S x, S y) { return x < y ? S(1) : S(0); });
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    TensorT<S> o =
        TensorT<S>::from_values(std::move(shape), std::vector<S>(a.values().begin(), a.values().end()));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            accumulate(a, o.grad());
        });
    }
    return o;
}

template <typename S>
TensorT<S> permute(const TensorT<S>& a, const std::vector<int64_t>& axes) {
    const Shape& sa = a.shape();
    const int64_t nd = a.ndim();
    if (static_cast<int64_t>(axes.size()) != nd)
        throw ShapeError("permute: expected " + std::to_string(nd) + " axes");
    std::vector<bool> seen(static_cast<size_t>(nd), false);
    Shape so(static_cast<size_t>(nd));
    for (int64_t k = 0; k < nd; ++k) {
        int64_t ax = normalize_axis(axes[static_cast<size_t>(k)], nd, "permute");
        if (seen[static_cast<size_t>(ax)]) throw ShapeError("permute: repeated axis");
        seen[static_cast<size_t>(ax)] = true;
        so[static_cast<size_t>(k)] = sa[static_cast<size_t>(ax)];
    }
    const auto astr = row_major_strides(sa);
    std::vector<int64_t> pstr(static_cast<size_t>(nd));
    for (int64_t k = 0; k < nd; ++k) {
        int64_t ax = axes[static_cast<size_t>(k)] < 0 ? axes[static_cast<size_t>(k)] + nd
                                                      : axes[static_cast<size_t>(k)];
        pstr[static_cast<size_t>(k)] = astr[static_cast<size_t>(ax)];
    }
    const auto av = a.values();
    const int64_t n = a.numel();
    std::vector<S> out(static_cast<size_t>(n));
    std::vector<int64_t> src(static_cast<size_t>(n));
    std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
    for (int64_t i = 0; i < n; ++i) {
        int64_t s = 0;
        for (int64_t k = 0; k < nd; ++k) s += idx[static_cast<size_t>(k)] * pstr[static_cast<size_t>(k)];
        out[static_cast<size_t>(i)] = av[static_cast<size_t>(s)];
        src[static_cast<size_t>(i)] = s;
        for (int64_t k = nd - 1; k >= 0; --k) {
            if (++idx[static_cast<size_t>(k)] < so[static_cast<size_t>(k)]) break;
            idx[static_cast<size_t>(k)] = 0;
        }
    }
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, src = std::move(src)]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (size_t i = 0; i < g.size(); ++i) ga[static_cast<size_t>(src[i])] += g[i];
        });
    }
    return o;
}

template <typename S>
TensorT<S> concat(const std::vector<TensorT<S>>& parts, int64_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const int64_t nd = parts[0].ndim();
    axis = normalize_axis(axis, nd, "concat");
    Shape so = parts[0].shape();
    int64_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int64_t i = 0; i < nd; ++i)
            if (i != axis && p.dim(i) != so[static_cast<size_t>(i)])
                throw ShapeError("concat: " + shape_str(p.shape()) + " incompatible with " +
                                 shape_str(so) + " on axis " + std::to_string(axis));
        total += p.dim(axis);
    }
    so[static_cast<size_t>(axis)] = total;
    auto sp = split_axis(so, axis);
    std::vector<S> out(static_cast<size_t>(shape_numel(so)));
    int64_t offset = 0;
    for (const auto& p : parts) {
        const auto pv = p.values();
        const int64_t len = p.dim(axis);
        for (int64_t ou = 0; ou < sp.outer; ++ou)
            std::memcpy(out.data() + (ou * total + offset) * sp.inner,
                        pv.data() + ou * len * sp.inner,
                        static_cast<size_t>(len * sp.inner) * sizeof(S));
        offset += len;
    }
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    if (GradTape<S>::active().recording() && any) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([parts, o, sp, total, axis]() {
            if (!o.has_grad()) return;
            const auto g = o.grad();
            int64_t offset = 0;
            for (const auto& p : parts) {
                const int64_t len = p.dim(axis);
                if (p.requires_grad()) {
                    TensorT<S> pm = p;
                    auto gp = pm.grad_mut();
                    for (int64_t ou = 0; ou < sp.outer; ++ou) {
                        const S* gsrc = g.data() + (ou * total + offset) * sp.inner;
                        S* gdst = gp.data() + ou * len * sp.inner;
                        for (int64_t i = 0; i < len * sp.inner; ++i) gdst[i] += gsrc[i];
                    }
                }
                offset += len;
            }
        });
    }
    return o;
}

template <typename S>
TensorT<S> slice(const TensorT<S>& a, int64_t axis, int64_t start, int64_t length) {
    const int64_t nd = a.ndim();
    axis = normalize_axis(axis, nd, "slice");
    const int64_t d = a.dim(axis);
    if (start < 0 || length < 0 || start + length > d)
        throw ShapeError("slice: [" + std::to_string(start) + "," + std::to_string(start + length) +
                         ") out of range for axis length " + std::to_string(d));
    Shape so = a.shape();
    so[static_cast<size_t>(axis)] = length;
    auto sp = split_axis(a.shape(), axis);
    const auto av = a.values();
    std::vector<S> out(static_cast<size_t>(shape_numel(so)));
    for (int64_t ou = 0; ou < sp.outer; ++ou)
        std::memcpy(out.data() + ou * length * sp.inner,
                    av.data() + (ou * d + start) * sp.inner,
                    static_cast<size_t>(length * sp.inner) * sizeof(S));
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, sp, d, start, length]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (int64_t ou = 0; ou < sp.outer; ++ou) {
                const S* gsrc = g.data() + ou * length * sp.inner;
                S* gdst = ga.data() + (ou * d + start) * sp.inner;
                for (int64_t i = 0; i < length * sp.inner; ++i) gdst[i] += gsrc[i];
            }
        });
    }
    return o;
}

template <typename S>
TensorT<S> take(const TensorT<S>& a, int64_t axis, const std::vector<int64_t>& indices) {
    const int64_t nd = a.ndim();
    axis = normalize_axis(axis, nd, "take");
    const int64_t d = a.dim(axis);
    for (int64_t ix : indices)
        if (ix < 0 || ix >= d)
            throw ShapeError("take: index " + std::to_string(ix) + " out of range for axis length " +
                             std::to_string(d));
    Shape so = a.shape();
    const int64_t m = static_cast<int64_t>(indices.size());
    so[static_cast<size_t>(axis)] = m;
    auto sp = split_axis(a.shape(), axis);
    const auto av = a.values();
    std::vector<S> out(static_cast<size_t>(shape_numel(so)));
    for (int64_t ou = 0; ou < sp.outer; ++ou)
        for (int64_t j = 0; j < m; ++j)
            std::memcpy(out.data() + (ou * m + j) * sp.inner,
                        av.data() + (ou * d + indices[static_cast<size_t>(j)]) * sp.inner,
                        static_cast<size_t>(sp.inner) * sizeof(S));
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, sp, d, m, indices]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t j = 0; j < m; ++j) {
                    const S* gsrc = g.data() + (ou * m + j) * sp.inner;
                    S* gdst = ga.data() + (ou * d + indices[static_cast<size_t>(j)]) * sp.inner;
                    for (int64_t i = 0; i < sp.inner; ++i) gdst[i] += gsrc[i];
                }
        });
    }
    return o;
}

namespace {

template <typename S>
TensorT<S> reduce_axis(const TensorT<S>& a, int64_t axis, bool keepdim, bool take_mean,
                       const char* name) {
    const int64_t nd = a.ndim();
    axis = normalize_axis(axis, nd, name);
    auto sp = split_axis(a.shape(), axis);
    Shape so;
    for (int64_t i = 0; i < nd; ++i) {
        if (i == axis) {
            if (keepdim) so.push_back(1);
        } else {
            so.push_back(a.dim(i));
        }
    }
    const S scale = take_mean ? S(1) / static_cast<S>(sp.len) : S(1);
    const auto av = a.values();
    std::vector<S> out(static_cast<size_t>(sp.outer * sp.inner), S(0));
    for (int64_t ou = 0; ou < sp.outer; ++ou)
        for (int64_t l = 0; l < sp.len; ++l) {
            const S* src = av.data() + (ou * sp.len + l) * sp.inner;
            S* dst = out.data() + ou * sp.inner;
            for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
    if (take_mean)
        for (auto& x : out) x *= scale;
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, sp, scale]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t l = 0; l < sp.len; ++l) {
                    const S* gsrc = g.data() + ou * sp.inner;
                    S* gdst = ga.data() + (ou * sp.len + l) * sp.inner;
                    for (int64_t i = 0; i < sp.inner; ++i) gdst[i] += gsrc[i] * scale;
                }
        });
    }
    return o;
}

}  // namespace

template <typename S>
TensorT<S> sum(const TensorT<S>& a, int64_t axis, bool keepdim) {
    return reduce_axis(a, axis, keepdim, false, "sum");
}

template <typename S>
TensorT<S> mean(const TensorT<S>& a, int64_t axis, bool keepdim) {
    return reduce_axis(a, axis, keepdim, true, "mean");
}

namespace {

template <typename S>
TensorT<S> reduce_all(const TensorT<S>& a, bool take_mean) {
    const auto av = a.values();
    // Pairwise-free simple accumulation; sizes here stay small enough.
    S acc = 0;
    for (S x : av) acc += x;
    const S scale = take_mean ? S(1) / static_cast<S>(a.numel()) : S(1);
    TensorT<S> o = TensorT<S>::scalar(acc * scale);
    if (tracking<S>(a)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, o, scale]() {
            if (!o.has_grad() || !a.requires_grad()) return;
            const S g = o.grad()[0] * scale;
            TensorT<S> am = a;
            auto ga = am.grad_mut();
            for (auto& x : ga) x += g;
        });
    }
    return o;
}

}  // namespace

template <typename S>
TensorT<S> sum_all(const TensorT<S>& a) {
    return reduce_all(a, false);
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& a) {
    return reduce_all(a, true);
}

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.ndim() < 2 || b.ndim() < 2) throw ShapeError("matmul: operands must have rank >= 2");
    const int64_t M = a.dim(-2), K = a.dim(-1);
    const int64_t Kb = b.dim(-2), N = b.dim(-1);
    if (K != Kb)
        throw ShapeError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const bool b_shared = b.ndim() == 2;
    if (!b_shared && b.ndim() != a.ndim())
        throw ShapeError("matmul: rank mismatch, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    int64_t batch = 1;
    Shape so;
    for (int64_t i = 0; i < a.ndim() - 2; ++i) {
        if (!b_shared && b.dim(i) != a.dim(i))
            throw ShapeError("matmul: batch dims differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
        batch *= a.dim(i);
        so.push_back(a.dim(i));
    }
    so.push_back(M);
    so.push_back(N);
    TensorT<S> o = TensorT<S>::zeros(std::move(so));
    {
        const S* pa = a.values().data();
        const S* pb = b.values().data();
        S* pc = o.values_mut().data();
        for (int64_t g = 0; g < batch; ++g)
            blas::gemm(false, false, M, N, K, S(1), pa + g * M * K, K,
                       b_shared ? pb : pb + g * K * N, N, S(0), pc + g * M * N, N);
    }
    if (tracking<S>(a, b)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([a, b, o, M, N, K, batch, b_shared]() {
            if (!o.has_grad()) return;
            const S* pg = o.grad().data();
            if (a.requires_grad()) {
                TensorT<S> am = a;
                S* ga = am.grad_mut().data();
                const S* pb = b.values().data();
                for (int64_t g = 0; g < batch; ++g)
                    blas::gemm(false, true, M, K, N, S(1), pg + g * M * N, N,
                               b_shared ? pb : pb + g * K * N, N, S(1), ga + g * M * K, K);
            }
            if (b.requires_grad()) {
                TensorT<S> bm = b;
                S* gb = bm.grad_mut().data();
                const S* pa = a.values().data();
                for (int64_t g = 0; g < batch; ++g)
                    blas::gemm(true, false, K, N, M, S(1), pa + g * M * K, K, pg + g * M * N, N,
                               S(1), b_shared ? gb : gb + g * K * N, N);
            }
        });
    }
    return o;
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);                              \
    template TensorT<S> sub<S>(const TensorT<S>&, const TensorT<S>&);                              \
    template TensorT<S> mul<S>(const TensorT<S>&, const TensorT<S>&);                              \
    template TensorT<S> div<S>(const TensorT<S>&, const TensorT<S>&);                              \
    template TensorT<S> add_scalar<S>(const TensorT<S>&, S);                                       \
    template TensorT<S> mul_scalar<S>(const TensorT<S>&, S);                                       \
    template TensorT<S> neg<S>(const TensorT<S>&);                                                 \
    template TensorT<S> abs<S>(const TensorT<S>&);                                                 \
    template TensorT<S> clamp_min<S>(const TensorT<S>&, S);                                        \
    template TensorT<S> minimum<S>(const TensorT<S>&, const TensorT<S>&);                          \
    template TensorT<S> maximum<S>(const TensorT<S>&, const TensorT<S>&);                          \
    template TensorT<S> reshape<S>(const TensorT<S>&, Shape);                                      \
    template TensorT<S> permute<S>(const TensorT<S>&, const std::vector<int64_t>&);                \
    template TensorT<S> concat<S>(const std::vector<TensorT<S>>&, int64_t);                        \
    template TensorT<S> slice<S>(const TensorT<S>&, int64_t, int64_t, int64_t);                    \
    template TensorT<S> take<S>(const TensorT<S>&, int64_t, const std::vector<int64_t>&);          \
    template TensorT<S> sum<S>(const TensorT<S>&, int64_t, bool);                                  \
    template TensorT<S> mean<S>(const TensorT<S>&, int64_t, bool);                                 \
    template TensorT<S> sum_all<S>(const TensorT<S>&);                                             \
    template TensorT<S> mean_all<S>(const TensorT<S>&);                                            \
    template TensorT<S> matmul<S>(const TensorT<S>&, const TensorT<S>&);

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
