#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gald/tensor.hpp"

namespace gald {

/// Maps the upstream gradient to gradients for each differentiable argument
/// of the op, in declared order (inputs first, then parameters).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct OpResult {
    Tensor value;
    BackwardFn backward;
};

struct ConvSpec {
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t pad = 0;  // zero-fill
    std::size_t groups = 1;
};

struct ConvWeights {
    Tensor kernel;               // (c_out, c_in_per_group, kh, kw)
    std::optional<Tensor> bias;  // (1, c_out, 1, 1)
    ConvSpec spec;
};

/// Multiply-accumulate counter. Counts are a function of shapes and config
/// only, never of data values.
struct MacCounter {
    std::uint64_t macs = 0;
    void add(std::uint64_t m) { macs += m; }
    void reset() { macs = 0; }
};

/// Cross-correlation with zero padding. Backward grads: {d_x, d_kernel} plus
/// {d_bias} when bias is present.
OpResult conv2d(const Tensor& x, const ConvWeights& w);

/// conv2d restricted to groups == channels (per-channel filters).
OpResult depthwise_conv2d(const Tensor& x, const ConvWeights& w);

/// Bilinear interpolation, half-pixel centers with edge clamping. General
/// form, allows shrinking.
OpResult bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// bilinear_resize restricted to out dims >= in dims.
OpResult bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Adaptive average pooling to a bins_h x bins_w grid; window i spans
/// [floor(i*h/bins), floor((i+1)*h/bins)).
OpResult avg_pool_adaptive2(const Tensor& x, std::size_t bins_h, std::size_t bins_w);
OpResult avg_pool_adaptive(const Tensor& x, std::size_t bins);

OpResult sigmoid_op(const Tensor& x);

/// Row softmax over the last (w) axis, max-subtracted for stability.
OpResult softmax_lastdim(const Tensor& x);

/// (B,1,m,p) x (B,1,p,q) -> (B,1,m,q). Adds B*m*p*q to mc when given.
OpResult batched_matmul(const Tensor& a, const Tensor& b, MacCounter* mc = nullptr);

/// (B,1,m,p) -> (B,1,p,m).
OpResult transpose_last2(const Tensor& x);

OpResult add_op(const Tensor& a, const Tensor& b);
OpResult mul_op(const Tensor& a, const Tensor& b);
OpResult scale_op(const Tensor& x, double s);
OpResult concat_channels_op(const Tensor& a, const Tensor& b);
OpResult slice_channels_op(const Tensor& t, std::size_t c0, std::size_t c1);
/// Sum of all elements, returned as a (1,1,1,1) tensor.
OpResult sum_op(const Tensor& x);

}  // namespace gald
