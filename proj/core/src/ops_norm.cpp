#include "vmcnet/ops.hpp"

#include "kernels.hpp"

#include <cmath>

namespace vmcnet::ops {

using detail::dispatch;
using detail::require;

ValueId layer_norm(Graph& g, ValueId x, ValueId gamma, ValueId beta, double eps) {
    const Tensor& xv = g.val(x);
    const Tensor& gv = g.val(gamma);
    const Tensor& bv = g.val(beta);
    detail::require_dtype(xv, gv, "layer_norm");
    detail::require_dtype(xv, bv, "layer_norm");
    require(xv.rank() >= 1, "layer_norm: rank must be >= 1");
    const std::int64_t D = xv.shape().back();
    require(gv.rank() == 1 && gv.dim(0) == D && bv.rank() == 1 && bv.dim(0) == D,
            "layer_norm: gamma/beta must be {D}");
    const std::int64_t rows = xv.numel() / D;

    Tensor out(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xd = xv.data<const T>();
        auto gd = gv.data<const T>();
        auto bd = bv.data<const T>();
        auto o = out.data<T>();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* row = xd.data() + r * D;
            double mu = 0.0;
            for (std::int64_t d = 0; d < D; ++d) mu += static_cast<double>(row[d]);
            mu /= static_cast<double>(D);
            double var = 0.0;
            for (std::int64_t d = 0; d < D; ++d) {
                const double c = static_cast<double>(row[d]) - mu;
                var += c * c;
            }
            var /= static_cast<double>(D);
            const double inv_std = 1.0 / std::sqrt(var + eps);
            for (std::int64_t d = 0; d < D; ++d) {
                const double xhat = (static_cast<double>(row[d]) - mu) * inv_std;
                o[static_cast<std::size_t>(r * D + d)] =
                    static_cast<T>(xhat * static_cast<double>(gd[static_cast<std::size_t>(d)]) +
                                   static_cast<double>(bd[static_cast<std::size_t>(d)]));
            }
        }
    });
    return g.record(
        "layer_norm", {x, gamma, beta}, std::move(out),
        [rows, D, eps](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
            const Tensor& xv = gr.val(n.inputs[0]);
            const Tensor& gv = gr.val(n.inputs[1]);
            Tensor dx(xv.shape(), xv.dtype());
            Tensor dgamma = Tensor::zeros({D}, xv.dtype());
            Tensor dbeta = Tensor::zeros({D}, xv.dtype());
            dispatch(xv.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto xd = xv.data<const T>();
                auto gd = gv.data<const T>();
                auto go = gout.data<const T>();
                auto dxd = dx.data<T>();
                auto dgd = dgamma.data<T>();
                auto dbd = dbeta.data<T>();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* row = xd.data() + r * D;
                    const T* grow = go.data() + r * D;
                    double mu = 0.0;
                    for (std::int64_t d = 0; d < D; ++d) mu += static_cast<double>(row[d]);
                    mu /= static_cast<double>(D);
                    double var = 0.0;
                    for (std::int64_t d = 0; d < D; ++d) {
                        const double c = static_cast<double>(row[d]) - mu;
                        var += c * c;
                    }
                    var /= static_cast<double>(D);
                    const double inv_std = 1.0 / std::sqrt(var + eps);
                    // dxhat, then the two coupled reductions for mu/var
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::int64_t d = 0; d < D; ++d) {
                        const double xhat = (static_cast<double>(row[d]) - mu) * inv_std;
                        const double dxh = static_cast<double>(grow[d]) *
                                           static_cast<double>(gd[static_cast<std::size_t>(d)]);
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xhat;
                        dgd[static_cast<std::size_t>(d)] +=
                            static_cast<T>(static_cast<double>(grow[d]) * xhat);
                        dbd[static_cast<std::size_t>(d)] += static_cast<T>(grow[d]);
                    }
                    const double inv_D = 1.0 / static_cast<double>(D);
                    for (std::int64_t d = 0; d < D; ++d) {
                        const double xhat = (static_cast<double>(row[d]) - mu) * inv_std;
                        const double dxh = static_cast<double>(grow[d]) *
                                           static_cast<double>(gd[static_cast<std::size_t>(d)]);
                        dxd[static_cast<std::size_t>(r * D + d)] = static_cast<T>(
                            inv_std * (dxh - inv_D * sum_dxhat - xhat * inv_D * sum_dxhat_xhat));
                    }
                }
            });
            return std::vector<Tensor>{std::move(dx), std::move(dgamma), std::move(dbeta)};
        });
}

ValueId batch_norm(Graph& g, ValueId x, ValueId gamma, ValueId beta, BnState* state, bool train,
                   double momentum, double eps) {
    const Tensor& xv = g.val(x);
    const Tensor& gv = g.val(gamma);
    const Tensor& bv = g.val(beta);
    require(xv.rank() == 4, "batch_norm: expects {N,H,W,C}");
    const std::int64_t C = xv.dim(3);
    require(gv.rank() == 1 && gv.dim(0) == C && bv.rank() == 1 && bv.dim(0) == C,
            "batch_norm: gamma/beta must be {C}");
    require(state != nullptr, "batch_norm: state is required");
    const std::int64_t m = xv.dim(0) * xv.dim(1) * xv.dim(2);

    std::vector<double> mean(static_cast<std::size_t>(C)), var(static_cast<std::size_t>(C));
    if (train) {
        for (std::int64_t i = 0; i < xv.numel(); ++i)
            mean[static_cast<std::size_t>(i % C)] += xv.get(i);
        for (auto& v : mean) v /= static_cast<double>(m);
        for (std::int64_t i = 0; i < xv.numel(); ++i) {
            const double c = xv.get(i) - mean[static_cast<std::size_t>(i % C)];
            var[static_cast<std::size_t>(i % C)] += c * c;
        }
        for (auto& v : var) v /= static_cast<double>(m);

        if (!state->initialized()) {
            state->running_mean = Tensor::zeros({C}, Dtype::f64);
            state->running_var = Tensor::full({C}, 1.0, Dtype::f64);
        }
        for (std::int64_t c = 0; c < C; ++c) {
            state->running_mean.set(c, (1.0 - momentum) * state->running_mean.get(c) +
                                           momentum * mean[static_cast<std::size_t>(c)]);
            state->running_var.set(c, (1.0 - momentum) * state->running_var.get(c) +
                                          momentum * var[static_cast<std::size_t>(c)]);
        }
    } else {
        if (!state->initialized())
            throw std::runtime_error("batch_norm: eval mode before any state initialization");
        for (std::int64_t c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = state->running_mean.get(c);
            var[static_cast<std::size_t>(c)] = state->running_var.get(c);
            if (!std::isfinite(mean[static_cast<std::size_t>(c)]) ||
                !std::isfinite(var[static_cast<std::size_t>(c)]))
                throw std::runtime_error("batch_norm: non-finite running statistics");
        }
    }

    Tensor out(xv.shape(), xv.dtype());
    for (std::int64_t i = 0; i < xv.numel(); ++i) {
        const auto c = static_cast<std::size_t>(i % C);
        const double xhat = (xv.get(i) - mean[c]) / std::sqrt(var[c] + eps);
        out.set(i, xhat * gv.get(static_cast<std::int64_t>(c)) + bv.get(static_cast<std::int64_t>(c)));
    }

    return g.record(
        "batch_norm", {x, gamma, beta}, std::move(out),
        [mean, var, m, C, eps, train](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
            const Tensor& xv = gr.val(n.inputs[0]);
            const Tensor& gv = gr.val(n.inputs[1]);
            Tensor dx(xv.shape(), xv.dtype());
            Tensor dgamma = Tensor::zeros({C}, xv.dtype());
            Tensor dbeta = Tensor::zeros({C}, xv.dtype());
            std::vector<double> inv_std(static_cast<std::size_t>(C));
            for (std::int64_t c = 0; c < C; ++c)
                inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);

            std::vector<double> sum_g(static_cast<std::size_t>(C)), sum_gx(static_cast<std::size_t>(C));
            for (std::int64_t i = 0; i < xv.numel(); ++i) {
                const auto c = static_cast<std::size_t>(i % C);
                const double xhat = (xv.get(i) - mean[c]) * inv_std[c];
                const double go = gout.get(i);
                sum_g[c] += go;
                sum_gx[c] += go * xhat;
                dgamma.set(static_cast<std::int64_t>(c),
                           dgamma.get(static_cast<std::int64_t>(c)) + go * xhat);
                dbeta.set(static_cast<std::int64_t>(c),
                          dbeta.get(static_cast<std::int64_t>(c)) + go);
            }
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::int64_t i = 0; i < xv.numel(); ++i) {
                const auto c = static_cast<std::size_t>(i % C);
                const double xhat = (xv.get(i) - mean[c]) * inv_std[c];
                const double go = gout.get(i);
                const double gamma_c = gv.get(static_cast<std::int64_t>(c));
                double d;
                if (train) {
                    d = gamma_c * inv_std[c] *
                        (go - inv_m * sum_g[c] - xhat * inv_m * sum_gx[c]);
                } else {
                    d = gamma_c * inv_std[c] * go; // running stats are constants
                }
                dx.set(i, d);
            }
            return std::vector<Tensor>{std::move(dx), std::move(dgamma), std::move(dbeta)};
        });
}

} // namespace vmcnet::ops
