#include "gald/ga_heads.hpp"

#include <cmath>

namespace gald {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t idx) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

OpResult graph_to_op(Var out, Var x, std::vector<Var> params) {
    OpResult r;
    r.value = out->value;
    r.backward = [out = std::move(out), x = std::move(x),
                  params = std::move(params)](const Tensor& go) {
        run_backward(out, go);
        std::vector<Tensor> grads;
        grads.reserve(params.size() + 1);
        grads.push_back(grad_of(x));
        for (const auto& p : params) grads.push_back(grad_of(p));
        return grads;
    };
    return r;
}

Var conv1x1(const Var& x, const Var& kernel) {
    return vconv2d(x, kernel, nullptr, ConvSpec{});
}

}  // namespace

GaConfig default_ga_config(GaKind kind, std::size_t reduced_channels) {
    GaConfig cfg;
    cfg.kind = kind;
    cfg.reduced_channels = reduced_channels;
    cfg.internal_downsample = (kind == GaKind::nonlocal || kind == GaKind::cgnl) ? 2 : 1;
    return cfg;
}

Tensor uniform_init(Shape4 shape, std::uint64_t seed, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::seeded_uniform(shape, seed, -s, s);
}

std::vector<Tensor*> GaParams::all_params() {
    std::vector<Tensor*> out;
    switch (kind) {
        case GaKind::psp:
            for (auto& t : psp_branch) out.push_back(&t);
            out.push_back(&fuse_kernel);
            out.push_back(&fuse_bias);
            break;
        case GaKind::aspp:
            out.push_back(&aspp_1x1);
            for (auto& t : aspp_dil) out.push_back(&t);
            out.push_back(&aspp_pool);
            out.push_back(&fuse_kernel);
            out.push_back(&fuse_bias);
            break;
        case GaKind::nonlocal:
        case GaKind::cgnl:
            out.push_back(&theta);
            out.push_back(&phi);
            out.push_back(&g);
            out.push_back(&out_proj);
            break;
    }
    return out;
}

std::vector<const Tensor*> GaParams::all_params() const {
    auto mut = const_cast<GaParams*>(this)->all_params();
    return {mut.begin(), mut.end()};
}

GaParams ga_init(const GaConfig& cfg, std::size_t channels, std::uint64_t seed) {
    const std::size_t C = channels, Cr = cfg.reduced_channels;
    if (Cr == 0 || Cr > C) throw std::invalid_argument("ga_init: need 0 < reduced_channels <= c");
    GaParams p;
    p.kind = cfg.kind;
    std::size_t i = 0;
    switch (cfg.kind) {
        case GaKind::psp: {
            for (std::size_t b = 0; b < cfg.psp_bins.size(); ++b)
                p.psp_branch.push_back(uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C));
            const std::size_t fuse_in = C + cfg.psp_bins.size() * Cr;
            p.fuse_kernel = uniform_init({C, fuse_in, 1, 1}, mix_seed(seed, i++), fuse_in);
            p.fuse_bias = uniform_init({1, C, 1, 1}, mix_seed(seed, i++), fuse_in);
            break;
        }
        case GaKind::aspp: {
            p.aspp_1x1 = uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C);
            for (std::size_t r = 0; r < cfg.aspp_rates.size(); ++r)
                p.aspp_dil.push_back(uniform_init({Cr, C, 3, 3}, mix_seed(seed, i++), 9 * C));
            p.aspp_pool = uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C);
            const std::size_t fuse_in = (2 + cfg.aspp_rates.size()) * Cr;
            p.fuse_kernel = uniform_init({C, fuse_in, 1, 1}, mix_seed(seed, i++), fuse_in);
            p.fuse_bias = uniform_init({1, C, 1, 1}, mix_seed(seed, i++), fuse_in);
            break;
        }
        case GaKind::nonlocal: {
            p.theta = uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C);
            p.phi = uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C);
            p.g = uniform_init({Cr, C, 1, 1}, mix_seed(seed, i++), C);
            p.out_proj = uniform_init({C, Cr, 1, 1}, mix_seed(seed, i++), Cr);
            break;
        }
        case GaKind::cgnl: {
            const std::size_t gc = cfg.cgnl_groups;
            if (gc == 0 || C % gc != 0 || Cr % gc != 0)
                throw std::invalid_argument("ga_init: c and c' must be divisible by cgnl_groups");
            p.theta = uniform_init({Cr, C / gc, 1, 1}, mix_seed(seed, i++), C / gc);
            p.phi = uniform_init({Cr, C / gc, 1, 1}, mix_seed(seed, i++), C / gc);
            p.g = uniform_init({Cr, C / gc, 1, 1}, mix_seed(seed, i++), C / gc);
            p.out_proj = uniform_init({C, Cr / gc, 1, 1}, mix_seed(seed, i++), Cr / gc);
            break;
        }
    }
    return p;
}

namespace {

// (n,c,h,w) -> (n,1,N,c) rows-of-positions matrix.
Var to_positions(const Var& x) {
    const auto s = x->value.shape();
    Var m = vreshape(x, Shape4{s.n, 1, s.c, s.h * s.w});
    return vtranspose_last2(m);
}

Var from_positions(const Var& m, std::size_t c, std::size_t h, std::size_t w) {
    Var t = vtranspose_last2(m);  // (n,1,c,N)
    return vreshape(t, Shape4{t->value.shape().n, c, h, w});
}

Var build_psp(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
              std::size_t C) {
    const auto s = x->value.shape();
    for (std::size_t b : cfg.psp_bins)
        if (b == 0 || b > std::min(s.h, s.w))
            throw std::invalid_argument("ga_psp: bin exceeds spatial dims");
    std::size_t i = 0;
    Var cat = x;
    for (std::size_t b : cfg.psp_bins) {
        Var pooled = vavg_pool_adaptive2(x, b, b);
        Var proj = conv1x1(pooled, params[i++]);
        Var up = vbilinear_upsample(proj, s.h, s.w);
        cat = vconcat_channels(cat, up);
    }
    Var fuse_k = params[i++], fuse_b = params[i++];
    (void)C;
    return vconv2d(cat, fuse_k, fuse_b, ConvSpec{});
}

Var build_aspp(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
               std::size_t C) {
    const auto s = x->value.shape();
    std::size_t i = 0;
    Var cat = conv1x1(x, params[i++]);
    for (std::size_t r : cfg.aspp_rates) {
        if (r == 0) throw std::invalid_argument("ga_aspp: rate must be >= 1");
        ConvSpec sp;
        sp.dilation = r;
        sp.pad = r;
        if (2 * sp.pad + s.h < 2 * r + 1 || 2 * sp.pad + s.w < 2 * r + 1)
            throw std::invalid_argument("ga_aspp: dilated kernel exceeds padded extent");
        cat = vconcat_channels(cat, vconv2d(x, params[i++], nullptr, sp));
    }
    Var pooled = vavg_pool_adaptive2(x, 1, 1);
    Var pool_proj = conv1x1(pooled, params[i++]);
    cat = vconcat_channels(cat, vbilinear_upsample(pool_proj, s.h, s.w));
    Var fuse_k = params[i++], fuse_b = params[i++];
    (void)C;
    return vconv2d(cat, fuse_k, fuse_b, ConvSpec{});
}

// Row-softmax attention over all positions of xd; returns (n,C',h,w).
Var build_nonlocal_core(const Var& xd, const Var& theta, const Var& phi, const Var& g,
                        MacCounter* mc) {
    const auto s = xd->value.shape();
    Var thm = to_positions(conv1x1(xd, theta));  // (n,1,N,C')
    Var phm = to_positions(conv1x1(xd, phi));
    Var gm = to_positions(conv1x1(xd, g));
    Var logits = vbatched_matmul(thm, vtranspose_last2(phm), mc);  // (n,1,N,N)
    Var aff = vsoftmax_lastdim(logits);
    Var y = vbatched_matmul(aff, gm, mc);  // (n,1,N,C')
    return from_positions(y, theta->value.shape().n, s.h, s.w);
}

Var build_nonlocal(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
                   MacCounter* mc) {
    const auto s = x->value.shape();
    const std::size_t ds = cfg.internal_downsample;
    if (ds == 0 || s.h % ds != 0 || s.w % ds != 0)
        throw std::invalid_argument("ga_nonlocal: internal_downsample must divide h and w");
    Var xd = ds > 1 ? vavg_pool_adaptive2(x, s.h / ds, s.w / ds) : x;
    Var core = build_nonlocal_core(xd, params[0], params[1], params[2], mc);
    Var back = conv1x1(core, params[3]);
    if (ds > 1) back = vbilinear_upsample(back, s.h, s.w);
    return vadd(back, x);
}

// Grouped dot-product attention: within each channel group the projected
// features are flattened over space and channel to one axis of length
// M = (C'/g)*N; the affinity collapses to a scalar phi.g per group, applied
// to theta and scaled by 1/M. Cost is linear in N.
Var build_cgnl(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
               MacCounter* mc) {
    const auto s = x->value.shape();
    const std::size_t ds = cfg.internal_downsample;
    const std::size_t gc = cfg.cgnl_groups;
    if (s.c % gc != 0) throw std::invalid_argument("ga_cgnl: c not divisible by groups");
    if (cfg.reduced_channels % gc != 0)
        throw std::invalid_argument("ga_cgnl: reduced_channels not divisible by groups");
    if (ds == 0 || s.h % ds != 0 || s.w % ds != 0)
        throw std::invalid_argument("ga_cgnl: internal_downsample must divide h and w");
    Var xd = ds > 1 ? vavg_pool_adaptive2(x, s.h / ds, s.w / ds) : x;
    const auto sd = xd->value.shape();
    ConvSpec grouped;
    grouped.groups = gc;
    Var thv = vconv2d(xd, params[0], nullptr, grouped);
    Var phv = vconv2d(xd, params[1], nullptr, grouped);
    Var gv = vconv2d(xd, params[2], nullptr, grouped);
    const std::size_t d = cfg.reduced_channels / gc;
    const std::size_t M = d * sd.h * sd.w;
    Var cat;
    for (std::size_t j = 0; j < gc; ++j) {
        Var th = vreshape(vslice_channels(thv, j * d, (j + 1) * d), Shape4{sd.n, 1, 1, M});
        Var ph = vreshape(vslice_channels(phv, j * d, (j + 1) * d), Shape4{sd.n, 1, 1, M});
        Var gg = vreshape(vslice_channels(gv, j * d, (j + 1) * d), Shape4{sd.n, 1, M, 1});
        Var dot = vbatched_matmul(ph, gg, mc);       // (n,1,1,1)
        Var y = vbatched_matmul(dot, th, mc);        // (n,1,1,M)
        y = vscale(y, 1.0 / static_cast<double>(M));
        Var ych = vreshape(y, Shape4{sd.n, d, sd.h, sd.w});
        cat = cat ? vconcat_channels(cat, ych) : ych;
    }
    Var back = vconv2d(cat, params[3], nullptr, grouped);
    if (ds > 1) back = vbilinear_upsample(back, s.h, s.w);
    return vadd(back, x);
}

}  // namespace

Var build_ga(const Var& x, const GaConfig& cfg, const std::vector<Var>& params,
             MacCounter* mc) {
    const std::size_t C = x->value.shape().c;
    if (cfg.reduced_channels > C)
        throw std::invalid_argument("ga_forward: reduced_channels > c");
    switch (cfg.kind) {
        case GaKind::psp: return build_psp(x, cfg, params, C);
        case GaKind::aspp: return build_aspp(x, cfg, params, C);
        case GaKind::nonlocal: return build_nonlocal(x, cfg, params, mc);
        case GaKind::cgnl: return build_cgnl(x, cfg, params, mc);
    }
    throw std::logic_error("build_ga: unreachable");
}

OpResult ga_forward(const Tensor& x, const GaConfig& cfg, const GaParams& params,
                    MacCounter* mc) {
    Var xv = make_leaf(x);
    std::vector<Var> pv;
    for (const Tensor* t : params.all_params()) pv.push_back(make_leaf(*t));
    Var out = build_ga(xv, cfg, pv, mc);
    return graph_to_op(out, xv, pv);
}

OpResult nonlocal_attention(const Tensor& x, const Tensor& theta, const Tensor& phi,
                            const Tensor& g, MacCounter* mc) {
    Var xv = make_leaf(x);
    std::vector<Var> pv{make_leaf(theta), make_leaf(phi), make_leaf(g)};
    Var out = build_nonlocal_core(xv, pv[0], pv[1], pv[2], mc);
    return graph_to_op(out, xv, pv);
}

}  // namespace gald
