#pragma once

#include "vmcnet/graph.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vmcnet::ops {

// ---- convolution family ----------------------------------------------------

/// x {N,H,W,Cin}, w {Kh,Kw,Cin/groups,Cout}, b {Cout}. Zero padding, output
/// extent floor((H + 2*pad - Kh)/stride) + 1.
ValueId conv2d(Graph& g, ValueId x, ValueId w, ValueId b, int stride, int pad, int groups = 1);

/// x {N,H,W,Cin}, w {Kh,Kw,Cin,Cout}, b {Cout}. Output extent
/// (H-1)*stride - 2*pad + Kh; adjoint of conv2d over the spatial scatter.
ValueId transposed_conv2d(Graph& g, ValueId x, ValueId w, ValueId b, int stride, int pad);

ValueId max_pool2d(Graph& g, ValueId x, int kernel, int stride);

// ---- dense / attention primitives -------------------------------------------

/// x {..., Din}, w {Din, Dout}, b {Dout}; applied over the last axis.
ValueId linear(Graph& g, ValueId x, ValueId w, ValueId b);

/// Batched matmul over the last two axes; leading axes must match.
ValueId matmul(Graph& g, ValueId a, ValueId b);

ValueId softmax(Graph& g, ValueId x); // last axis, max-subtraction stabilized

// ---- normalization -----------------------------------------------------------

ValueId layer_norm(Graph& g, ValueId x, ValueId gamma, ValueId beta, double eps = 1e-5);

/// Running statistics for batch_norm; empty tensors mean "never initialized"
/// and make eval mode an error. Train mode normalizes by batch moments over
/// N*H*W and updates the state in place.
struct BnState {
    Tensor running_mean; // {C} once initialized
    Tensor running_var;  // {C}
    bool initialized() const { return running_mean.numel() > 0; }
};

ValueId batch_norm(Graph& g, ValueId x, ValueId gamma, ValueId beta, BnState* state,
                   bool train, double momentum = 0.1, double eps = 1e-5);

// ---- activations / dropout ---------------------------------------------------

ValueId gelu(Graph& g, ValueId x);
ValueId relu(Graph& g, ValueId x);

/// Train mode keeps each element with probability 1-rate and scales by
/// 1/(1-rate); eval mode is the identity. The mask is a pure function of
/// (seed, element index).
ValueId dropout(Graph& g, ValueId x, double rate, std::uint64_t seed, bool train);

// ---- shape ops ---------------------------------------------------------------

ValueId reshape(Graph& g, ValueId x, Shape shape);
ValueId permute(Graph& g, ValueId x, std::vector<int> dims);
ValueId concat(Graph& g, std::span<const ValueId> parts, int axis);
std::vector<ValueId> split(Graph& g, ValueId x, int axis, std::span<const std::int64_t> sizes);

// ---- elementwise / reductions -------------------------------------------------

ValueId add(Graph& g, ValueId a, ValueId b);            // same shape
ValueId add_rowvec(Graph& g, ValueId x, ValueId v);     // v {D} broadcast over rows
ValueId scale(Graph& g, ValueId x, double c);
ValueId sum_all(Graph& g, ValueId x);                   // -> scalar
ValueId weighted_sum(Graph& g, ValueId x, Tensor probe); // dot with a fixed probe -> scalar
ValueId mse(Graph& g, ValueId x, Tensor target);        // mean squared error -> scalar

// ---- sampling ----------------------------------------------------------------

/// f {H,W,C}, locs {P,2} as normalized (u,v) in [0,1] with align-corners-false
/// mapping px = u*W - 0.5. Samples outside the grid contribute zero.
/// Differentiable in both f and locs.
ValueId bilinear_sample(Graph& g, ValueId f, ValueId locs);

/// x {N,H,W,C} -> {N,out_h,out_w,C}; reuses the bilinear_sample coordinate
/// convention (and its zero border policy).
ValueId resize_bilinear(Graph& g, ValueId x, std::int64_t out_h, std::int64_t out_w);

/// Fused multi-scale deformable attention core.
/// value {N,T,D} with T = sum over levels of h_l*w_l, locs
/// {N,T,M,S,K,2} normalized per-level coordinates, attn {N,T,M,S,K} already
/// normalized over (S,K). Heads split D into M contiguous slices.
ValueId msda_core(Graph& g, ValueId value, ValueId locs, ValueId attn,
                  std::vector<std::array<std::int64_t, 2>> level_shapes);

} // namespace vmcnet::ops
