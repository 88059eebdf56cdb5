#include "vmcnet/ops.hpp"

#include "kernels.hpp"

namespace vmcnet::ops {

using detail::dispatch;
using detail::require;

namespace {

struct ConvDims {
    std::int64_t N, H, W, Ci, Kh, Kw, Cig, Co, Cog, Ho, Wo;
    int stride, pad, groups;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                   int groups) {
    require(x.rank() == 4, "conv2d: x must be {N,H,W,Cin}");
    require(w.rank() == 4, "conv2d: w must be {Kh,Kw,Cin/groups,Cout}");
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(pad >= 0, "conv2d: pad must be >= 0");
    require(groups >= 1, "conv2d: groups must be >= 1");
    ConvDims d{};
    d.N = x.dim(0); d.H = x.dim(1); d.W = x.dim(2); d.Ci = x.dim(3);
    d.Kh = w.dim(0); d.Kw = w.dim(1); d.Cig = w.dim(2); d.Co = w.dim(3);
    d.stride = stride; d.pad = pad; d.groups = groups;
    require(d.Ci % groups == 0, "conv2d: Cin not divisible by groups");
    require(d.Co % groups == 0, "conv2d: Cout not divisible by groups");
    require(d.Cig == d.Ci / groups, "conv2d: weight Cin/groups extent mismatch");
    require(b.rank() == 1 && b.dim(0) == d.Co, "conv2d: bias must be {Cout}");
    d.Cog = d.Co / groups;
    d.Ho = (d.H + 2 * pad - d.Kh) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.Kw) / stride + 1;
    require(d.H + 2 * pad - d.Kh >= 0 && d.W + 2 * pad - d.Kw >= 0 && d.Ho > 0 && d.Wo > 0,
            "conv2d: non-positive output extent");
    return d;
}

template <class T>
void conv2d_fwd(const ConvDims& d, const T* x, const T* w, const T* b, T* out) {
    for (std::int64_t n = 0; n < d.N; ++n)
        for (std::int64_t oy = 0; oy < d.Ho; ++oy)
            for (std::int64_t ox = 0; ox < d.Wo; ++ox) {
                T* orow = out + ((n * d.Ho + oy) * d.Wo + ox) * d.Co;
                for (std::int64_t co = 0; co < d.Co; ++co) orow[co] = b[co];
                for (std::int64_t kh = 0; kh < d.Kh; ++kh) {
                    const std::int64_t iy = oy * d.stride - d.pad + kh;
                    if (iy < 0 || iy >= d.H) continue;
                    for (std::int64_t kw = 0; kw < d.Kw; ++kw) {
                        const std::int64_t ix = ox * d.stride - d.pad + kw;
                        if (ix < 0 || ix >= d.W) continue;
                        const T* xrow = x + ((n * d.H + iy) * d.W + ix) * d.Ci;
                        for (std::int64_t gidx = 0; gidx < d.groups; ++gidx)
                            for (std::int64_t cg = 0; cg < d.Cig; ++cg) {
                                const T xv = xrow[gidx * d.Cig + cg];
                                const T* wrow = w + ((kh * d.Kw + kw) * d.Cig + cg) * d.Co +
                                                gidx * d.Cog;
                                for (std::int64_t cog = 0; cog < d.Cog; ++cog)
                                    orow[gidx * d.Cog + cog] += xv * wrow[cog];
                            }
                    }
                }
            }
}

template <class T>
void conv2d_bwd(const ConvDims& d, const T* x, const T* w, const T* gout, T* dx, T* dw, T* db) {
    for (std::int64_t n = 0; n < d.N; ++n)
        for (std::int64_t oy = 0; oy < d.Ho; ++oy)
            for (std::int64_t ox = 0; ox < d.Wo; ++ox) {
                const T* grow = gout + ((n * d.Ho + oy) * d.Wo + ox) * d.Co;
                for (std::int64_t co = 0; co < d.Co; ++co) db[co] += grow[co];
                for (std::int64_t kh = 0; kh < d.Kh; ++kh) {
                    const std::int64_t iy = oy * d.stride - d.pad + kh;
                    if (iy < 0 || iy >= d.H) continue;
                    for (std::int64_t kw = 0; kw < d.Kw; ++kw) {
                        const std::int64_t ix = ox * d.stride - d.pad + kw;
                        if (ix < 0 || ix >= d.W) continue;
                        const T* xrow = x + ((n * d.H + iy) * d.W + ix) * d.Ci;
                        T* dxrow = dx + ((n * d.H + iy) * d.W + ix) * d.Ci;
                        for (std::int64_t gidx = 0; gidx < d.groups; ++gidx)
                            for (std::int64_t cg = 0; cg < d.Cig; ++cg) {
                                const std::int64_t wbase =
                                    ((kh * d.Kw + kw) * d.Cig + cg) * d.Co + gidx * d.Cog;
                                const T xv = xrow[gidx * d.Cig + cg];
                                T acc = T(0);
                                for (std::int64_t cog = 0; cog < d.Cog; ++cog) {
                                    const T go = grow[gidx * d.Cog + cog];
                                    acc += go * w[wbase + cog];
                                    dw[wbase + cog] += go * xv;
                                }
                                dxrow[gidx * d.Cig + cg] += acc;
                            }
                    }
                }
            }
}

} // namespace

ValueId conv2d(Graph& g, ValueId x, ValueId w, ValueId b, int stride, int pad, int groups) {
    const Tensor& xv = g.val(x);
    const Tensor& wv = g.val(w);
    const Tensor& bv = g.val(b);
    detail::require_dtype(xv, wv, "conv2d");
    detail::require_dtype(xv, bv, "conv2d");
    const ConvDims d = conv_dims(xv, wv, bv, stride, pad, groups);

    Tensor out({d.N, d.Ho, d.Wo, d.Co}, xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        conv2d_fwd<T>(d, xv.data<const T>().data(), wv.data<const T>().data(),
                      bv.data<const T>().data(), out.data<T>().data());
    });
    return g.record("conv2d", {x, w, b}, std::move(out),
                    [d](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        const Tensor& wv = gr.val(n.inputs[1]);
                        Tensor dx = Tensor::zeros(xv.shape(), xv.dtype());
                        Tensor dw = Tensor::zeros(wv.shape(), wv.dtype());
                        Tensor db = Tensor::zeros({d.Co}, xv.dtype());
                        dispatch(xv.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            conv2d_bwd<T>(d, xv.data<const T>().data(), wv.data<const T>().data(),
                                          gout.data<const T>().data(), dx.data<T>().data(),
                                          dw.data<T>().data(), db.data<T>().data());
                        });
                        return std::vector<Tensor>{std::move(dx), std::move(dw), std::move(db)};
                    });
}

namespace {

struct TconvDims {
    std::int64_t N, H, W, Ci, Kh, Kw, Co, Ho, Wo;
    int stride, pad;
};

TconvDims tconv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    require(x.rank() == 4, "transposed_conv2d: x must be {N,H,W,Cin}");
    require(w.rank() == 4, "transposed_conv2d: w must be {Kh,Kw,Cin,Cout}");
    require(stride >= 1, "transposed_conv2d: stride must be >= 1");
    TconvDims d{};
    d.N = x.dim(0); d.H = x.dim(1); d.W = x.dim(2); d.Ci = x.dim(3);
    d.Kh = w.dim(0); d.Kw = w.dim(1); d.Co = w.dim(3);
    require(w.dim(2) == d.Ci, "transposed_conv2d: weight Cin extent mismatch");
    require(b.rank() == 1 && b.dim(0) == d.Co, "transposed_conv2d: bias must be {Cout}");
    d.stride = stride; d.pad = pad;
    d.Ho = (d.H - 1) * stride - 2 * pad + d.Kh;
    d.Wo = (d.W - 1) * stride - 2 * pad + d.Kw;
    require(d.Ho > 0 && d.Wo > 0, "transposed_conv2d: non-positive output extent");
    return d;
}

} // namespace

ValueId transposed_conv2d(Graph& g, ValueId x, ValueId w, ValueId b, int stride, int pad) {
    const Tensor& xv = g.val(x);
    const Tensor& wv = g.val(w);
    const Tensor& bv = g.val(b);
    detail::require_dtype(xv, wv, "transposed_conv2d");
    const TconvDims d = tconv_dims(xv, wv, bv, stride, pad);

    Tensor out({d.N, d.Ho, d.Wo, d.Co}, xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xd = xv.data<const T>();
        auto wd = wv.data<const T>();
        auto bd = bv.data<const T>();
        auto o = out.data<T>();
        for (std::int64_t i = 0; i < out.numel(); ++i) o[static_cast<std::size_t>(i)] = bd[static_cast<std::size_t>(i % d.Co)];
        for (std::int64_t n = 0; n < d.N; ++n)
            for (std::int64_t iy = 0; iy < d.H; ++iy)
                for (std::int64_t ix = 0; ix < d.W; ++ix) {
                    const T* xrow = xd.data() + ((n * d.H + iy) * d.W + ix) * d.Ci;
                    for (std::int64_t kh = 0; kh < d.Kh; ++kh) {
                        const std::int64_t oy = iy * d.stride + kh - d.pad;
                        if (oy < 0 || oy >= d.Ho) continue;
                        for (std::int64_t kw = 0; kw < d.Kw; ++kw) {
                            const std::int64_t ox = ix * d.stride + kw - d.pad;
                            if (ox < 0 || ox >= d.Wo) continue;
                            T* orow = o.data() + ((n * d.Ho + oy) * d.Wo + ox) * d.Co;
                            for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
                                const T xvv = xrow[ci];
                                const T* wrow = wd.data() + ((kh * d.Kw + kw) * d.Ci + ci) * d.Co;
                                for (std::int64_t co = 0; co < d.Co; ++co) orow[co] += xvv * wrow[co];
                            }
                        }
                    }
                }
    });
    return g.record(
        "transposed_conv2d", {x, w, b}, std::move(out),
        [d](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
            const Tensor& xv = gr.val(n.inputs[0]);
            const Tensor& wv = gr.val(n.inputs[1]);
            Tensor dx = Tensor::zeros(xv.shape(), xv.dtype());
            Tensor dw = Tensor::zeros(wv.shape(), wv.dtype());
            Tensor db = Tensor::zeros({d.Co}, xv.dtype());
            dispatch(xv.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto xd = xv.data<const T>();
                auto wd = wv.data<const T>();
                auto go = gout.data<const T>();
                auto dxd = dx.data<T>();
                auto dwd = dw.data<T>();
                auto dbd = db.data<T>();
                for (std::int64_t i = 0; i < gout.numel(); ++i)
                    dbd[static_cast<std::size_t>(i % d.Co)] += go[static_cast<std::size_t>(i)];
                for (std::int64_t n2 = 0; n2 < d.N; ++n2)
                    for (std::int64_t iy = 0; iy < d.H; ++iy)
                        for (std::int64_t ix = 0; ix < d.W; ++ix) {
                            const T* xrow = xd.data() + ((n2 * d.H + iy) * d.W + ix) * d.Ci;
                            T* dxrow = dxd.data() + ((n2 * d.H + iy) * d.W + ix) * d.Ci;
                            for (std::int64_t kh = 0; kh < d.Kh; ++kh) {
                                const std::int64_t oy = iy * d.stride + kh - d.pad;
                                if (oy < 0 || oy >= d.Ho) continue;
                                for (std::int64_t kw = 0; kw < d.Kw; ++kw) {
                                    const std::int64_t ox = ix * d.stride + kw - d.pad;
                                    if (ox < 0 || ox >= d.Wo) continue;
                                    const T* grow =
                                        go.data() + ((n2 * d.Ho + oy) * d.Wo + ox) * d.Co;
                                    for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
                                        const std::int64_t wbase =
                                            ((kh * d.Kw + kw) * d.Ci + ci) * d.Co;
                                        T acc = T(0);
                                        for (std::int64_t co = 0; co < d.Co; ++co) {
                                            acc += grow[co] * wd[static_cast<std::size_t>(wbase + co)];
                                            dwd[static_cast<std::size_t>(wbase + co)] +=
                                                grow[co] * xrow[ci];
                                        }
                                        dxrow[ci] += acc;
                                    }
                                }
                            }
                        }
            });
            return std::vector<Tensor>{std::move(dx), std::move(dw), std::move(db)};
        });
}

ValueId max_pool2d(Graph& g, ValueId x, int kernel, int stride) {
    const Tensor& xv = g.val(x);
    require(xv.rank() == 4, "max_pool2d: x must be {N,H,W,C}");
    require(kernel >= 1 && stride >= 1, "max_pool2d: kernel and stride must be >= 1");
    const std::int64_t N = xv.dim(0), H = xv.dim(1), W = xv.dim(2), C = xv.dim(3);
    const std::int64_t Ho = (H - kernel) / stride + 1;
    const std::int64_t Wo = (W - kernel) / stride + 1;
    require(Ho > 0 && Wo > 0, "max_pool2d: non-positive output extent");

    Tensor out({N, Ho, Wo, C}, xv.dtype());
    // flat source index per output element; ties resolve to the first max in scan order
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xd = xv.data<const T>();
        auto o = out.data<T>();
        std::size_t oi = 0;
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t oy = 0; oy < Ho; ++oy)
                for (std::int64_t ox = 0; ox < Wo; ++ox)
                    for (std::int64_t c = 0; c < C; ++c, ++oi) {
                        T best{};
                        std::int64_t best_idx = -1;
                        for (std::int64_t ky = 0; ky < kernel; ++ky)
                            for (std::int64_t kx = 0; kx < kernel; ++kx) {
                                const std::int64_t iy = oy * stride + ky;
                                const std::int64_t ix = ox * stride + kx;
                                const std::int64_t idx = ((n * H + iy) * W + ix) * C + c;
                                const T v = xd[static_cast<std::size_t>(idx)];
                                if (best_idx < 0 || v > best) {
                                    best = v;
                                    best_idx = idx;
                                }
                            }
                        o[oi] = best;
                        argmax[oi] = best_idx;
                    }
    });
    return g.record("max_pool2d", {x}, std::move(out),
                    [argmax = std::move(argmax)](const Graph& gr, const Graph::Node& n,
                                                 const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        Tensor dx = Tensor::zeros(xv.shape(), xv.dtype());
                        for (std::int64_t i = 0; i < gout.numel(); ++i) {
                            const std::int64_t src = argmax[static_cast<std::size_t>(i)];
                            dx.set(src, dx.get(src) + gout.get(i));
                        }
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

} // namespace vmcnet::ops
