#include "vmcnet/ops.hpp"

#include "kernels.hpp"

namespace vmcnet::ops {

using detail::dispatch;
using detail::require;

ValueId linear(Graph& g, ValueId x, ValueId w, ValueId b) {
    const Tensor& xv = g.val(x);
    const Tensor& wv = g.val(w);
    const Tensor& bv = g.val(b);
    detail::require_dtype(xv, wv, "linear");
    detail::require_dtype(xv, bv, "linear");
    require(wv.rank() == 2, "linear: weight must be rank 2");
    require(xv.rank() >= 1 && xv.shape().back() == wv.dim(0),
            "linear: last extent of x " + shape_str(xv.shape()) + " must equal Din " +
                std::to_string(wv.dim(0)));
    const std::int64_t din = wv.dim(0);
    const std::int64_t dout = wv.dim(1);
    require(bv.rank() == 1 && bv.dim(0) == dout, "linear: bias must be {Dout}");
    const std::int64_t rows = xv.numel() / din;

    Shape out_shape = xv.shape();
    out_shape.back() = dout;
    Tensor out(out_shape, xv.dtype());
    dispatch(xv.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xd = xv.data<const T>();
        auto wd = wv.data<const T>();
        auto bd = bv.data<const T>();
        auto o = out.data<T>();
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t j = 0; j < dout; ++j) o[static_cast<std::size_t>(r * dout + j)] = bd[static_cast<std::size_t>(j)];
            for (std::int64_t k = 0; k < din; ++k) {
                const T xv_rk = xd[static_cast<std::size_t>(r * din + k)];
                const T* wrow = wd.data() + k * dout;
                T* orow = o.data() + r * dout;
                for (std::int64_t j = 0; j < dout; ++j) orow[j] += xv_rk * wrow[j];
            }
        }
    });
    return g.record(
        "linear", {x, w, b}, std::move(out),
        [rows, din, dout](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
            const Tensor& xv = gr.val(n.inputs[0]);
            const Tensor& wv = gr.val(n.inputs[1]);
            Tensor dx(xv.shape(), xv.dtype());
            Tensor dw = Tensor::zeros(wv.shape(), wv.dtype());
            Tensor db = Tensor::zeros({dout}, xv.dtype());
            dispatch(xv.dtype(), [&](auto tag) {
                using T = decltype(tag);
                auto xd = xv.data<const T>();
                auto wd = wv.data<const T>();
                auto go = gout.data<const T>();
                auto dxd = dx.data<T>();
                auto dwd = dw.data<T>();
                auto dbd = db.data<T>();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* grow = go.data() + r * dout;
                    for (std::int64_t j = 0; j < dout; ++j) dbd[static_cast<std::size_t>(j)] += grow[j];
                    for (std::int64_t k = 0; k < din; ++k) {
                        const T* wrow = wd.data() + k * dout;
                        T acc = T(0);
                        for (std::int64_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
                        dxd[static_cast<std::size_t>(r * din + k)] = acc;
                        const T xv_rk = xd[static_cast<std::size_t>(r * din + k)];
                        T* dwrow = dwd.data() + k * dout;
                        for (std::int64_t j = 0; j < dout; ++j) dwrow[j] += xv_rk * grow[j];
                    }
                }
            });
            return std::vector<Tensor>{std::move(dx), std::move(dw), std::move(db)};
        });
}

namespace {

// c {B,M,N} += a {B,M,K} x b {B,K,N}, with optional transposes on a/b views.
template <class T>
void bmm_accum(const T* a, bool ta, const T* b, bool tb, T* c, std::int64_t B, std::int64_t M,
               std::int64_t N, std::int64_t K) {
    for (std::int64_t z = 0; z < B; ++z) {
        const T* az = a + z * M * K;
        const T* bz = b + z * K * N;
        T* cz = c + z * M * N;
        for (std::int64_t i = 0; i < M; ++i)
            for (std::int64_t k = 0; k < K; ++k) {
                const T av = ta ? az[k * M + i] : az[i * K + k];
                const T* brow = tb ? bz + k : bz + k * N;
                T* crow = cz + i * N;
                if (tb)
                    for (std::int64_t j = 0; j < N; ++j) crow[j] += av * brow[j * K];
                else
                    for (std::int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
    }
}

} // namespace

ValueId matmul(Graph& g, ValueId a, ValueId b) {
    const Tensor& av = g.val(a);
    const Tensor& bv = g.val(b);
    detail::require_dtype(av, bv, "matmul");
    require(av.rank() >= 2 && bv.rank() == av.rank(), "matmul: rank mismatch");
    const std::size_t r = av.rank();
    std::int64_t B = 1;
    for (std::size_t i = 0; i + 2 < r; ++i) {
        require(av.dim(i) == bv.dim(i), "matmul: batch extent mismatch");
        B *= av.dim(i);
    }
    const std::int64_t M = av.dim(r - 2), K = av.dim(r - 1);
    require(bv.dim(r - 2) == K, "matmul: inner extents differ");
    const std::int64_t N = bv.dim(r - 1);

    Shape out_shape = av.shape();
    out_shape[r - 1] = N;
    Tensor out = Tensor::zeros(out_shape, av.dtype());
    dispatch(av.dtype(), [&](auto tag) {
        using T = decltype(tag);
        bmm_accum<T>(av.data<const T>().data(), false, bv.data<const T>().data(), false,
                     out.data<T>().data(), B, M, N, K);
    });
    return g.record("matmul", {a, b}, std::move(out),
                    [B, M, N, K](const Graph& gr, const Graph::Node& n, const Tensor& gout) {
                        const Tensor& av = gr.val(n.inputs[0]);
                        const Tensor& bv = gr.val(n.inputs[1]);
                        Tensor da = Tensor::zeros(av.shape(), av.dtype());
                        Tensor db = Tensor::zeros(bv.shape(), bv.dtype());
                        dispatch(av.dtype(), [&](auto tag) {
                            using T = decltype(tag);
                            // da = gout x b^T, db = a^T x gout
                            bmm_accum<T>(gout.data<const T>().data(), false,
                                         bv.data<const T>().data(), true, da.data<T>().data(), B,
                                         M, K, N);
                            bmm_accum<T>(av.data<const T>().data(), true,
                                         gout.data<const T>().data(), false, db.data<T>().data(),
                                         B, K, N, M);
                        });
                        return std::vector<Tensor>{std::move(da), std::move(db)};
                    });
}

} // namespace vmcnet::ops
