#pragma once

#include <cstdint>
#include <vector>

#include "gald/graph.hpp"
#include "gald/nn_ops.hpp"

namespace gald {

enum class GaKind { psp, aspp, nonlocal, cgnl };

struct GaConfig {
    GaKind kind = GaKind::nonlocal;
    std::size_t reduced_channels = 0;  // C'
    std::vector<std::size_t> psp_bins{1, 2, 3, 6};
    std::vector<std::size_t> aspp_rates{6, 12, 18};
    std::size_t cgnl_groups = 1;
    std::size_t internal_downsample = 2;  // 2 for attention heads, 1 for psp/aspp
};

/// Canonical config for a head kind: psp/aspp keep full resolution, the
/// attention heads downsample by 2 internally.
GaConfig default_ga_config(GaKind kind, std::size_t reduced_channels);

/// Learnable tensors for one head. Only the members relevant to the kind are
/// populated; all_params() yields them in a fixed per-kind order, which is
/// also the gradient order appended after d_x by ga_forward's backward:
///   psp:      psp_branch[0..B-1], fuse_kernel, fuse_bias
///   aspp:     aspp_1x1, aspp_dil[0..R-1], aspp_pool, fuse_kernel, fuse_bias
///   nonlocal: theta, phi, g, out_proj
///   cgnl:     theta, phi, g, out_proj
struct GaParams {
    GaKind kind = GaKind::nonlocal;
    Tensor theta, phi, g, out_proj;
    std::vector<Tensor> psp_branch;
    Tensor aspp_1x1;
    std::vector<Tensor> aspp_dil;
    Tensor aspp_pool;
    Tensor fuse_kernel, fuse_bias;

    std::vector<Tensor*> all_params();
    std::vector<const Tensor*> all_params() const;
};

/// Seeded uniform(-s, s) with s = 1/sqrt(fan_in).
Tensor uniform_init(Shape4 shape, std::uint64_t seed, std::size_t fan_in);

GaParams ga_init(const GaConfig& cfg, std::size_t channels, std::uint64_t seed);

/// X -> X_g at the same (n,c,h,w). Backward grads: {d_x, d_param...} in
/// all_params() order. mc, when given, tracks affinity-stage MACs for the
/// attention heads.
OpResult ga_forward(const Tensor& x, const GaConfig& cfg, const GaParams& params,
                    MacCounter* mc = nullptr);

/// Core attention of the non-local head: projections + row-softmax affinity +
/// value product, no downsample, no output projection, no residual. Output is
/// (n, C', h, w). Grads: {d_x, d_theta, d_phi, d_g}.
OpResult nonlocal_attention(const Tensor& x, const Tensor& theta, const Tensor& phi,
                            const Tensor& g, MacCounter* mc = nullptr);

// Graph-level builders, shared with the composed module in ld_modules.
Var build_ga(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
             MacCounter* mc);

}  // namespace gald
