#pragma once

#include <cstdint>
#include <vector>

#include "gald/ga_heads.hpp"
#include "gald/graph.hpp"
#include "gald/nn_ops.hpp"

namespace gald {

enum class Ldv1Strategy { depthwise_conv, bilinear, avg_pool };
enum class BorderMode { masked_softmax, zero_pad_keys };
enum class Arrangement { gald, ldga, parallel };
enum class LdKind { none, v1, v2 };

struct Ldv1Config {
    std::size_t downsample_ratio = 8;
    Ldv1Strategy strategy = Ldv1Strategy::depthwise_conv;
    std::size_t stack_depth = 3;  // stride-2 layers; 2^stack_depth must equal the ratio
};

struct Ldv2Config {
    std::size_t kernel = 5;    // k, odd
    std::size_t dilation = 3;  // r
    std::size_t reduced_channels = 0;
    BorderMode border_mode = BorderMode::masked_softmax;
};

/// Depth-wise downsampler weights; empty for the bilinear / avg_pool
/// strategies, which have nothing learnable.
struct Ldv1Params {
    std::vector<Tensor> depthwise;  // stack of (c,1,3,3) kernels
    std::vector<Tensor*> all_params();
    std::vector<const Tensor*> all_params() const;
};

/// Gradient/param order: theta, phi, g, out_proj, fuse_kernel, fuse_bias.
struct Ldv2Params {
    Tensor theta, phi, g;          // 1x1, 2C -> C'
    Tensor out_proj;               // 1x1, C' -> C
    Tensor fuse_kernel, fuse_bias; // 1x1, 2C -> C
    std::vector<Tensor*> all_params();
    std::vector<const Tensor*> all_params() const;
};

Ldv1Params ldv1_init(const Ldv1Config& cfg, std::size_t channels, std::uint64_t seed);
Ldv2Params ldv2_init(const Ldv2Config& cfg, std::size_t channels, std::uint64_t seed);

/// Mask M = sigmoid(upsample(downsample(x_g))), M in (0,1).
/// Grads: {d_x_g, d_depthwise...}.
OpResult ldv1_mask(const Tensor& x_g, const Ldv1Config& cfg, const Ldv1Params& params);

/// X_gald = M .* X_g + X_g. Grads: {d_x_g, d_m}.
OpResult ldv1_apply(const Tensor& x_g, const Tensor& m);

/// Neighbor gather at dilation r over a k x k offset grid, row-major over
/// (dy, dx). Out-of-bounds entries are zero with valid=false.
struct SampledTensor {
    Tensor values;                 // (n, K*c, h, w); neighbor j occupies channels [j*c,(j+1)*c)
    std::vector<std::uint8_t> valid;  // K*h*w, row-major (j, y, x)
    std::size_t k = 0;
};
SampledTensor sample_neighbors(const Tensor& x, std::size_t k, std::size_t r);

/// Local attention kernel: per position, softmax over the K sampled
/// neighbors of q.k logits, then the weighted sum of values. q,k,v are
/// (n,C',h,w). masked_softmax excludes out-of-bounds neighbors; zero_pad_keys
/// treats them as zero keys and values. Adds n*2*C'*N*K to mc.
/// Grads: {d_q, d_k, d_v}.
OpResult local_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::size_t ksize, std::size_t dilation, BorderMode mode,
                         MacCounter* mc = nullptr);

/// Full LDv2: QKV from concat(x_g, x_l), local attention, projection back to
/// C, then concat with x_l and a 1x1 fuse. pre_fuse output (the projected
/// attention result, before combining with x_l) is exposed for locality
/// probes. Grads: {d_x_g, d_x_l, d_param...}.
OpResult ldv2_forward(const Tensor& x_g, const Tensor& x_l, const Ldv2Config& cfg,
                      const Ldv2Params& params, MacCounter* mc = nullptr,
                      Tensor* pre_fuse = nullptr);

struct GaldConfig {
    Arrangement arrangement = Arrangement::gald;
    GaConfig ga;
    LdKind ld = LdKind::v2;
    Ldv1Config ldv1;
    Ldv2Config ldv2;
};

struct GaldParams {
    GaParams ga;
    Ldv1Params ldv1;
    Ldv2Params ldv2;
    LdKind ld = LdKind::v2;
    std::vector<Tensor*> all_params();
    std::vector<const Tensor*> all_params() const;
};

GaldParams gald_init(const GaldConfig& cfg, std::size_t channels, std::uint64_t seed);

/// Composed head. Output has 2C channels:
///   gald:     concat(LD(GA(x)), x)
///   ldga:     concat(GA(LD(x)), x)
///   parallel: concat(LD(x), GA(x))
/// With ld == none the LD stage is the identity, so gald degenerates to
/// concat(GA(x), x). Grads: {d_x, d_param...} in all_params() order.
OpResult gald_forward(const Tensor& x, const GaldConfig& cfg, const GaldParams& params,
                      MacCounter* mc = nullptr);

/// Graph-level builder for reuse inside the training pipeline.
Var build_gald(const Var& x, const GaldConfig& cfg, const std::vector<Var>& params,
               MacCounter* mc);

}  // namespace gald
