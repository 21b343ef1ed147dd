#include <cstring>

#include "blas.hpp"
#include "ops_common.hpp"

namespace tuber {

using detail::tracking;

namespace {

int64_t out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad, const char* op) {
    const int64_t span = in + 2 * pad - k;
    if (k < 1 || stride < 1 || pad < 0 || span < 0)
        throw ShapeError(std::string(op) + ": kernel " + std::to_string(k) + " stride " +
                         std::to_string(stride) + " pad " + std::to_string(pad) +
                         " invalid for extent " + std::to_string(in));
    return span / stride + 1;
}

}  // namespace

template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias,
                  const std::array<int64_t, 3>& stride, const std::array<int64_t, 3>& pad) {
    if (x.ndim() != 4) throw ShapeError("conv3d: input must be [T, H, W, C], got " + shape_str(x.shape()));
    if (w.ndim() != 5) throw ShapeError("conv3d: weight must be [kT, kH, kW, Cin, Cout], got " + shape_str(w.shape()));
    const int64_t T = x.dim(0), H = x.dim(1), W = x.dim(2), Cin = x.dim(3);
    const int64_t kT = w.dim(0), kH = w.dim(1), kW = w.dim(2), Cout = w.dim(4);
    if (w.dim(3) != Cin)
        throw ShapeError("conv3d: weight expects " + std::to_string(w.dim(3)) + " input channels, input has " +
                         std::to_string(Cin));
    if (bias.numel() != Cout) throw ShapeError("conv3d: bias must have Cout elements");
    const int64_t To = out_extent(T, kT, stride[0], pad[0], "conv3d");
    const int64_t Ho = out_extent(H, kH, stride[1], pad[1], "conv3d");
    const int64_t Wo = out_extent(W, kW, stride[2], pad[2], "conv3d");
    const int64_t rows = To * Ho * Wo;
    const int64_t K = kT * kH * kW * Cin;

    // Patch matrix: one row per output position, kernel taps unrolled with the
    // channel index fastest, matching the weight layout flattened to [K, Cout].
    std::vector<S> cols(static_cast<size_t>(rows * K), S(0));
    const auto xv = x.values();
    int64_t r = 0;
    for (int64_t to = 0; to < To; ++to)
        for (int64_t ho = 0; ho < Ho; ++ho)
            for (int64_t wo = 0; wo < Wo; ++wo, ++r) {
                S* dst = cols.data() + r * K;
                for (int64_t dt = 0; dt < kT; ++dt) {
                    const int64_t t = to * stride[0] - pad[0] + dt;
                    if (t < 0 || t >= T) continue;
                    for (int64_t dh = 0; dh < kH; ++dh) {
                        const int64_t h = ho * stride[1] - pad[1] + dh;
                        if (h < 0 || h >= H) continue;
                        for (int64_t dw = 0; dw < kW; ++dw) {
                            const int64_t ww = wo * stride[2] - pad[2] + dw;
                            if (ww < 0 || ww >= W) continue;
                            std::memcpy(dst + ((dt * kH + dh) * kW + dw) * Cin,
                                        xv.data() + ((t * H + h) * W + ww) * Cin,
                                        static_cast<size_t>(Cin) * sizeof(S));
                        }
                    }
                }
            }

    TensorT<S> o = TensorT<S>::zeros({To, Ho, Wo, Cout});
    {
        S* po = o.values_mut().data();
        blas::gemm(false, false, rows, Cout, K, S(1), cols.data(), K, w.values().data(), Cout, S(0),
                   po, Cout);
        const auto bv = bias.values();
        for (int64_t i = 0; i < rows; ++i)
            for (int64_t c = 0; c < Cout; ++c) po[i * Cout + c] += bv[static_cast<size_t>(c)];
    }
    if (tracking<S>(x, w, bias)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([x, w, bias, o, stride, pad, T, H, W, Cin, kT, kH, kW, Cout,
                                      To, Ho, Wo, rows, K, cols = std::move(cols)]() {
            if (!o.has_grad()) return;
            const S* pg = o.grad().data();
            if (w.requires_grad()) {
                TensorT<S> wm = w;
                blas::gemm(true, false, K, Cout, rows, S(1), cols.data(), K, pg, Cout, S(1),
                           wm.grad_mut().data(), Cout);
            }
            if (bias.requires_grad()) {
                TensorT<S> bm = bias;
                auto gb = bm.grad_mut();
                for (int64_t i = 0; i < rows; ++i)
                    for (int64_t c = 0; c < Cout; ++c) gb[static_cast<size_t>(c)] += pg[i * Cout + c];
            }
            if (x.requires_grad()) {
                std::vector<S> gcols(static_cast<size_t>(rows * K));
                blas::gemm(false, true, rows, K, Cout, S(1), pg, Cout, w.values().data(), Cout,
                           S(0), gcols.data(), K);
                TensorT<S> xm = x;
                auto gx = xm.grad_mut();
                int64_t r = 0;
                for (int64_t to = 0; to < To; ++to)
                    for (int64_t ho = 0; ho < Ho; ++ho)
                        for (int64_t wo = 0; wo < Wo; ++wo, ++r) {
                            const S* src = gcols.data() + r * K;
                            for (int64_t dt = 0; dt < kT; ++dt) {
                                const int64_t t = to * stride[0] - pad[0] + dt;
                                if (t < 0 || t >= T) continue;
                                for (int64_t dh = 0; dh < kH; ++dh) {
                                    const int64_t h = ho * stride[1] - pad[1] + dh;
                                    if (h < 0 || h >= H) continue;
                                    for (int64_t dw = 0; dw < kW; ++dw) {
                                        const int64_t ww = wo * stride[2] - pad[2] + dw;
                                        if (ww < 0 || ww >= W) continue;
                                        const S* s = src + ((dt * kH + dh) * kW + dw) * Cin;
                                        S* d = gx.data() + ((t * H + h) * W + ww) * Cin;
                                        for (int64_t c = 0; c < Cin; ++c) d[c] += s[c];
                                    }
                                }
                            }
                        }
            }
        });
    }
    return o;
}

namespace {

template <typename S>
void check_pool(const TensorT<S>& x, int64_t window, int64_t stride, const char* op) {
    if (x.ndim() < 1) throw ShapeError(std::string(op) + ": input must have a time axis");
    if (window < 1 || stride < 1 || window > x.dim(0))
        throw ShapeError(std::string(op) + ": window " + std::to_string(window) + " stride " +
                         std::to_string(stride) + " invalid for " + std::to_string(x.dim(0)) +
                         " frames");
}

}  // namespace

template <typename S>
TensorT<S> avg_pool_time(const TensorT<S>& x, int64_t window, int64_t stride) {
    check_pool(x, window, stride, "avg_pool_time");
    const int64_t T = x.dim(0);
    const int64_t inner = x.numel() / T;
    const int64_t To = (T - window) / stride + 1;
    Shape so = x.shape();
    so[0] = To;
    const auto xv = x.values();
    std::vector<S> out(static_cast<size_t>(To * inner), S(0));
    const S scale = S(1) / static_cast<S>(window);
    for (int64_t to = 0; to < To; ++to)
        for (int64_t l = 0; l < window; ++l) {
            const S* src = xv.data() + (to * stride + l) * inner;
            S* dst = out.data() + to * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * scale;
        }
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(x)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([x, o, To, inner, window, stride, scale]() {
            if (!o.has_grad() || !x.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> xm = x;
            auto gx = xm.grad_mut();
            for (int64_t to = 0; to < To; ++to)
                for (int64_t l = 0; l < window; ++l) {
                    const S* src = g.data() + to * inner;
                    S* dst = gx.data() + (to * stride + l) * inner;
                    for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * scale;
                }
        });
    }
    return o;
}

template <typename S>
TensorT<S> max_pool_time(const TensorT<S>& x, int64_t window, int64_t stride) {
    check_pool(x, window, stride, "max_pool_time");
    const int64_t T = x.dim(0);
    const int64_t inner = x.numel() / T;
    const int64_t To = (T - window) / stride + 1;
    Shape so = x.shape();
    so[0] = To;
    const auto xv = x.values();
    std::vector<S> out(static_cast<size_t>(To * inner));
    std::vector<int64_t> arg(static_cast<size_t>(To * inner));
    for (int64_t to = 0; to < To; ++to)
        for (int64_t i = 0; i < inner; ++i) {
            int64_t best_t = to * stride;
            S best = xv[static_cast<size_t>(best_t * inner + i)];
            for (int64_t l = 1; l < window; ++l) {
                const int64_t t = to * stride + l;
                const S v = xv[static_cast<size_t>(t * inner + i)];
                if (v > best) {
                    best = v;
                    best_t = t;
                }
            }
            out[static_cast<size_t>(to * inner + i)] = best;
            arg[static_cast<size_t>(to * inner + i)] = best_t;
        }
    TensorT<S> o = TensorT<S>::from_values(std::move(so), std::move(out));
    if (tracking<S>(x)) {
        o.set_requires_grad(true);
        GradTape<S>::active().record([x, o, To, inner, arg = std::move(arg)]() {
            if (!o.has_grad() || !x.requires_grad()) return;
            const auto g = o.grad();
            TensorT<S> xm = x;
            auto gx = xm.grad_mut();
            for (int64_t to = 0; to < To; ++to)
                for (int64_t i = 0; i < inner; ++i) {
                    const size_t k = static_cast<size_t>(to * inner + i);
                    gx[static_cast<size_t>(arg[k] * inner + i)] += g[k];
                }
        });
    }
    return o;
}

#define TUBER_INSTANTIATE(S)                                                                       \
    template TensorT<S> conv3d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,         \
                                  const std::array<int64_t, 3>&, const std::array<int64_t, 3>&);   \
    template TensorT<S> avg_pool_time<S>(const TensorT<S>&, int64_t, int64_t);                     \
    template TensorT<S> max_pool_time<S>(const TensorT<S>&, int64_t, int64_t);

TUBER_INSTANTIATE(float)
TUBER_INSTANTIATE(double)
#undef TUBER_INSTANTIATE

}  // namespace tuber
