#include "vmcnet/ops.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <numeric>

namespace vmcnet::ops {

using detail::dispatch;
using detail::require;

ValueId reshape(Graph& g, ValueId x, Shape shape) {
    Tensor out = g.val(x).reshaped(std::move(shape));
    return g.record("reshape", {x}, std::move(out),
                    [](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        return std::vector<Tensor>{gout.reshaped(gr.val(n.inputs[0]).shape())};
                    });
}

namespace {

Tensor permute_kernel(const Tensor& x, const std::vector<int>& dims) {
    const std::size_t r = x.rank();
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(static_cast<std::size_t>(dims[i]));
    Tensor out(out_shape, x.dtype());

    std::vector<std::int64_t> in_strides(r, 1), out_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) {
        in_strides[i - 1] = in_strides[i] * x.dim(i);
        out_strides[i - 1] = out_strides[i] * out_shape[i];
    }
    detail::dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xin = x.data<const T>();
        auto o = out.data<T>();
        std::vector<std::int64_t> idx(r, 0);
        for (std::int64_t flat = 0; flat < x.numel(); ++flat) {
            std::int64_t src = 0;
            for (std::size_t i = 0; i < r; ++i)
                src += idx[static_cast<std::size_t>(dims[i])] * in_strides[static_cast<std::size_t>(dims[i])];
            // idx runs in output order, so flat is the output offset
            o[static_cast<std::size_t>(flat)] = xin[static_cast<std::size_t>(src)];
            for (std::size_t i = r; i-- > 0;) {
                if (++idx[i] < out_shape[i]) break;
                idx[i] = 0;
            }
        }
    });
    return out;
}

} // namespace

ValueId permute(Graph& g, ValueId x, std::vector<int> dims) {
    const Tensor& xv = g.val(x);
    require(dims.size() == xv.rank(), "permute: dims rank mismatch");
    std::vector<int> check = dims;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i)
        require(check[i] == static_cast<int>(i), "permute: dims is not a permutation");

    Tensor out = permute_kernel(xv, dims);
    return g.record("permute", {x}, std::move(out),
                    [dims](const Graph&, const Graph::Node&, const Tensor& gout) {
                        std::vector<int> inv(dims.size());
                        for (std::size_t i = 0; i < dims.size(); ++i)
                            inv[static_cast<std::size_t>(dims[i])] = static_cast<int>(i);
                        return std::vector<Tensor>{permute_kernel(gout, inv)};
                    });
}

namespace {

struct AxisBlocks {
    std::int64_t outer, axis, inner;
};

AxisBlocks axis_blocks(const Shape& s, int axis) {
    AxisBlocks b{1, s[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) b.outer *= s[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) b.inner *= s[i];
    return b;
}

} // namespace

ValueId concat(Graph& g, std::span<const ValueId> parts, int axis) {
    require(!parts.empty(), "concat: needs at least one input");
    const Tensor& first = g.val(parts[0]);
    require(axis >= 0 && static_cast<std::size_t>(axis) < first.rank(), "concat: axis out of range");
    Shape out_shape = first.shape();
    std::vector<std::int64_t> sizes;
    sizes.reserve(parts.size());
    std::int64_t total = 0;
    for (ValueId p : parts) {
        const Tensor& t = g.val(p);
        detail::require_dtype(first, t, "concat");
        require(t.rank() == first.rank(), "concat: rank mismatch");
        for (std::size_t i = 0; i < t.rank(); ++i)
            require(static_cast<int>(i) == axis || t.dim(i) == first.dim(i),
                    "concat: extent mismatch off the concat axis");
        sizes.push_back(t.dim(static_cast<std::size_t>(axis)));
        total += sizes.back();
    }
    out_shape[static_cast<std::size_t>(axis)] = total;
    Tensor out(out_shape, first.dtype());

    const AxisBlocks b = axis_blocks(out_shape, axis);
    dispatch(first.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto o = out.data<T>();
        std::int64_t start = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const Tensor& t = g.val(parts[p]);
            auto src = t.data<const T>();
            const std::int64_t a = sizes[p];
            for (std::int64_t ou = 0; ou < b.outer; ++ou)
                std::copy_n(src.data() + ou * a * b.inner, a * b.inner,
                            o.data() + (ou * total + start) * b.inner);
            start += a;
        }
    });

    std::vector<ValueId> inputs(parts.begin(), parts.end());
    return g.record("concat", std::move(inputs), std::move(out),
                    [axis, sizes, b, total](const Graph& gr, const Graph::Node& n,
                                            const Tensor& gout) {
                        std::vector<Tensor> grads;
                        grads.reserve(n.inputs.size());
                        std::int64_t start = 0;
                        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
                            const Tensor& in = gr.val(n.inputs[p]);
                            Tensor gpart(in.shape(), in.dtype());
                            dispatch(in.dtype(), [&](auto tag) {
                                using T = decltype(tag);
                                auto go = gout.data<const T>();
                                auto d = gpart.data<T>();
                                const std::int64_t a = sizes[p];
                                for (std::int64_t ou = 0; ou < b.outer; ++ou)
                                    std::copy_n(go.data() + (ou * total + start) * b.inner,
                                                a * b.inner, d.data() + ou * a * b.inner);
                            });
                            start += sizes[p];
                            grads.push_back(std::move(gpart));
                        }
                        return grads;
                    });
}

std::vector<ValueId> split(Graph& g, ValueId x, int axis, std::span<const std::int64_t> sizes) {
    const Tensor& xv = g.val(x);
    require(axis >= 0 && static_cast<std::size_t>(axis) < xv.rank(), "split: axis out of range");
    const std::int64_t total = xv.dim(static_cast<std::size_t>(axis));
    require(std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) == total,
            "split: sizes do not cover the axis");
    const AxisBlocks b = axis_blocks(xv.shape(), axis);

    std::vector<ValueId> result;
    result.reserve(sizes.size());
    std::int64_t start = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
        const std::int64_t a = sizes[p];
        Shape part_shape = xv.shape();
        part_shape[static_cast<std::size_t>(axis)] = a;
        Tensor part(part_shape, xv.dtype());
        dispatch(xv.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto src = xv.data<const T>();
            auto o = part.data<T>();
            for (std::int64_t ou = 0; ou < b.outer; ++ou)
                std::copy_n(src.data() + (ou * total + start) * b.inner, a * b.inner,
                            o.data() + ou * a * b.inner);
        });
        const std::int64_t part_start = start;
        result.push_back(g.record(
            "split", {x}, std::move(part),
            [axis, b, total, a, part_start](const Graph& gr, const Graph::Node& n,
                                            const Tensor& gout) {
                const Tensor& in = gr.val(n.inputs[0]);
                Tensor dx = Tensor::zeros(in.shape(), in.dtype());
                dispatch(in.dtype(), [&](auto tag) {
                    using T = decltype(tag);
                    auto go = gout.data<const T>();
                    auto d = dx.data<T>();
                    for (std::int64_t ou = 0; ou < b.outer; ++ou)
                        std::copy_n(go.data() + ou * a * b.inner, a * b.inner,
                                    d.data() + (ou * total + part_start) * b.inner);
                });
                return std::vector<Tensor>{std::move(dx)};
            }));
        start += a;
    }
    return result;
}

} // namespace vmcnet::ops
