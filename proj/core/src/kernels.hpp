#pragma once

// Internal kernel helpers shared by the op implementations. Not installed.

#include "vmcnet/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vmcnet::detail {

template <class F>
decltype(auto) dispatch(Dtype dt, F&& f) {
    if (dt == Dtype::f32) return f(float{});
    return f(double{});
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw std::invalid_argument(std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) +
                                    " and " + dtype_name(b.dtype()));
}

// Align-corners-false bilinear tap: normalized (u,v) over a H x W grid maps
// to pixel coords (u*W - 0.5, v*H - 0.5); the four surrounding cell centers
// get the usual fractional weights and out-of-grid corners contribute zero.
struct BilinearTaps {
    std::int64_t x0, y0;
    double fx, fy; // fraction toward (x0+1, y0+1)
};

inline BilinearTaps bilinear_taps(double u, double v, std::int64_t W, std::int64_t H) {
    const double px = u * static_cast<double>(W) - 0.5;
    const double py = v * static_cast<double>(H) - 0.5;
    const double bx = std::floor(px);
    const double by = std::floor(py);
    return {static_cast<std::int64_t>(bx), static_cast<std::int64_t>(by), px - bx, py - by};
}

struct CornerIter {
    // corner c in 0..3: (x0 + c%2, y0 + c/2), weight per fraction
    static double weight(const BilinearTaps& t, int c) {
        const double wx = (c % 2) ? t.fx : 1.0 - t.fx;
        const double wy = (c / 2) ? t.fy : 1.0 - t.fy;
        return wx * wy;
    }
    static std::int64_t cx(const BilinearTaps& t, int c) { return t.x0 + (c % 2); }
    static std::int64_t cy(const BilinearTaps& t, int c) { return t.y0 + (c / 2); }
    static bool inside(const BilinearTaps& t, int c, std::int64_t W, std::int64_t H) {
        const std::int64_t x = cx(t, c), y = cy(t, c);
        return x >= 0 && x < W && y >= 0 && y < H;
    }
};

} // namespace vmcnet::detail
