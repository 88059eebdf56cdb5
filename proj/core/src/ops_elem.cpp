#include "vmcnet/ops.hpp"
#include "vmcnet/rng.hpp"

#include "kernels.hpp"

#include <cmath>
#include <numbers>

namespace vmcnet::ops {

using detail::dispatch;
using detail::require;

ValueId gelu(Graph& g, ValueId x) {
    const Tensor& xv = g.val(x);
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i) {
            const double v = static_cast<double>(xin[i]);
            o[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)));
        }
    });
    return g.record("gelu", {x}, std::move(out),
                    [](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        Tensor dx(xv.shape(), xv.dtype());
                        dispatch(xv.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto xin = xv.data<const T>();
                            auto go = gout.data<const T>();
                            auto d = dx.data<T>();
                            const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
                            for (std::size_t i = 0; i < d.size(); ++i) {
                                const double v = static_cast<double>(xin[i]);
                                const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
                                const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                                d[i] = static_cast<T>(static_cast<double>(go[i]) * (cdf + v * pdf));
                            }
                        });
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId relu(Graph& g, ValueId x) {
    const Tensor& xv = g.val(x);
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = xin[i] > T(0) ? xin[i] : T(0);
    });
    return g.record("relu", {x}, std::move(out),
                    [](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        Tensor dx(xv.shape(), xv.dtype());
                        dispatch(xv.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto xin = xv.data<const T>();
                            auto go = gout.data<const T>();
                            auto d = dx.data<T>();
                            for (std::size_t i = 0; i < d.size(); ++i)
                                d[i] = xin[i] > T(0) ? go[i] : T(0);
                        });
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId softmax(Graph& g, ValueId x) {
    const Tensor& xv = g.val(x);
    require(xv.rank() >= 1, "softmax: rank must be >= 1");
    const std::int64_t K = xv.shape().back();
    require(K >= 1, "softmax: last extent must be >= 1");
    const std::int64_t rows = xv.numel() / K;
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto o = out.data<T>();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* row = xin.data() + r * K;
            double mx = static_cast<double>(row[0]);
            for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
            double denom = 0.0;
            for (std::int64_t k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k]) - mx);
            for (std::int64_t k = 0; k < K; ++k)
                o[static_cast<std::size_t>(r * K + k)] =
                    static_cast<T>(std::exp(static_cast<double>(row[k]) - mx) / denom);
        }
    });
    return g.record("softmax", {x}, std::move(out),
                    [K, rows](const Graph&, const Graph::Node& n, const Tensor& gout) {
                        // dx = y * (g - sum(g*y)) per row
                        Tensor dx(n.value.shape(), n.value.dtype());
                        dispatch(n.value.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto y = n.value.data<const T>();
                            auto go = gout.data<const T>();
                            auto d = dx.data<T>();
                            for (std::int64_t r = 0; r < rows; ++r) {
                                double dot = 0.0;
                                for (std::int64_t k = 0; k < K; ++k) {
                                    const auto i = static_cast<std::size_t>(r * K + k);
                                    dot += static_cast<double>(go[i]) * static_cast<double>(y[i]);
                                }
                                for (std::int64_t k = 0; k < K; ++k) {
                                    const auto i = static_cast<std::size_t>(r * K + k);
                                    d[i] = static_cast<T>(static_cast<double>(y[i]) *
                                                          (static_cast<double>(go[i]) - dot));
                                }
                            }
                        });
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId dropout(Graph& g, ValueId x, double rate, std::uint64_t seed, bool train) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    const Tensor& xv = g.val(x);
    if (!train || rate == 0.0) {
        Tensor out = xv.clone();
        return g.record("dropout", {x}, std::move(out),
                        [](const Graph&, const Graph::Node&, const Tensor& gout) {
                            return std::vector<Tensor>{gout.clone()};
                        });
    }
    // keep mask is a pure function of (seed, flat index)
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(xv.numel()));
    Prng rng(seed, std::uint64_t{0x6d61736bull});
    for (auto& k : keep) k = rng.uniform() >= rate ? 1 : 0;
    const double inv_keep = 1.0 / (1.0 - rate);
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = keep[i] ? static_cast<T>(static_cast<double>(xin[i]) * inv_keep) : T(0);
    });
    return g.record("dropout", {x}, std::move(out),
                    [keep = std::move(keep), inv_keep](const Graph&, const Graph::Node& n,
                                                       const Tensor& gout) {
                        Tensor dx(n.value.shape(), n.value.dtype());
                        dispatch(n.value.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto go = gout.data<const T>();
                            auto d = dx.data<T>();
                            for (std::size_t i = 0; i < d.size(); ++i)
                                d[i] = keep[i] ? static_cast<T>(static_cast<double>(go[i]) * inv_keep)
                                               : T(0);
                        });
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId add(Graph& g, ValueId a, ValueId b) {
    const Tensor& av = g.val(a);
    const Tensor& bv = g.val(b);
    detail::require_dtype(av, bv, "add");
    require(av.shape() == bv.shape(), "add: shape mismatch " + shape_str(av.shape()) + " vs " +
                                          shape_str(bv.shape()));
    Tensor out(av.shape(), av.dtype());
    dispatch(av.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto x = av.data<const T>();
        auto y = bv.data<const T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    });
    return g.record("add", {a, b}, std::move(out),
                    [](const Graph&, const Graph::Node&, const Tensor& gout) {
                        return std::vector<Tensor>{gout.clone(), gout.clone()};
                    });
}

ValueId add_rowvec(Graph& g, ValueId x, ValueId v) {
    const Tensor& xv = g.val(x);
    const Tensor& vv = g.val(v);
    detail::require_dtype(xv, vv, "add_rowvec");
    require(vv.rank() == 1 && xv.rank() >= 1 && xv.shape().back() == vv.dim(0),
            "add_rowvec: vector " + shape_str(vv.shape()) + " does not match last axis of " +
                shape_str(xv.shape()));
    const std::int64_t D = vv.dim(0);
    const std::int64_t rows = xv.numel() / D;
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto vin = vv.data<const T>();
        auto o = out.data<T>();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t d = 0; d < D; ++d)
                o[static_cast<std::size_t>(r * D + d)] =
                    xin[static_cast<std::size_t>(r * D + d)] + vin[static_cast<std::size_t>(d)];
    });
    return g.record("add_rowvec", {x, v}, std::move(out),
                    [D, rows](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& vv = gr.val(n.inputs[1]);
                        Tensor dv = Tensor::zeros(vv.shape(), vv.dtype());
                        dispatch(vv.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto go = gout.data<const T>();
                            auto d = dv.data<T>();
                            for (std::int64_t r = 0; r < rows; ++r)
                                for (std::int64_t k = 0; k < D; ++k)
                                    d[static_cast<std::size_t>(k)] +=
                                        go[static_cast<std::size_t>(r * D + k)];
                        });
                        return std::vector<Tensor>{gout.clone(), std::move(dv)};
                    });
}

ValueId scale(Graph& g, ValueId x, double c) {
    const Tensor& xv = g.val(x);
    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = xv.data<const T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = static_cast<T>(static_cast<double>(xin[i]) * c);
    });
    return g.record("scale", {x}, std::move(out),
                    [c](const Graph&, const Graph::Node& n, const Tensor& gout) {
                        Tensor dx(n.value.shape(), n.value.dtype());
                        dispatch(n.value.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            auto go = gout.data<const T>();
                            auto d = dx.data<T>();
                            for (std::size_t i = 0; i < d.size(); ++i)
                                d[i] = static_cast<T>(static_cast<double>(go[i]) * c);
                        });
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId sum_all(Graph& g, ValueId x) {
    const Tensor& xv = g.val(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) s += xv.get(i);
    return g.record("sum_all", {x}, Tensor::scalar(s, xv.dtype()),
                    [](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        return std::vector<Tensor>{
                            Tensor::full(xv.shape(), gout.get(0), xv.dtype())};
                    });
}

ValueId weighted_sum(Graph& g, ValueId x, Tensor probe) {
    const Tensor& xv = g.val(x);
    require(probe.shape() == xv.shape(), "weighted_sum: probe shape mismatch");
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) s += xv.get(i) * probe.get(i);
    return g.record("weighted_sum", {x}, Tensor::scalar(s, xv.dtype()),
                    [probe = probe.to(Dtype::f64)](const Graph& gr, const Graph::Node& n,
                                                   const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        Tensor dx(xv.shape(), xv.dtype());
                        const double go = gout.get(0);
                        for (std::int64_t i = 0; i < dx.numel(); ++i)
                            dx.set(i, go * probe.get(i));
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

ValueId mse(Graph& g, ValueId x, Tensor target) {
    const Tensor& xv = g.val(x);
    require(target.shape() == xv.shape(), "mse: target shape " + shape_str(target.shape()) +
                                              " does not match " + shape_str(xv.shape()));
    const double inv_n = 1.0 / static_cast<double>(xv.numel());
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) {
        const double d = xv.get(i) - target.get(i);
        s += d * d;
    }
    return g.record("mse", {x}, Tensor::scalar(s * inv_n, xv.dtype()),
                    [target = target.to(Dtype::f64), inv_n](const Graph& gr, const Graph::Node& n,
                                                            const Tensor& gout) {
                        const Tensor& xv = gr.val(n.inputs[0]);
                        Tensor dx(xv.shape(), xv.dtype());
                        const double go = gout.get(0);
                        for (std::int64_t i = 0; i < dx.numel(); ++i)
                            dx.set(i, go * 2.0 * inv_n * (xv.get(i) - target.get(i)));
                        return std::vector<Tensor>{std::move(dx)};
                    });
}

} // namespace vmcnet::ops
