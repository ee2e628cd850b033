#include "gald/ld_modules.hpp"

#include <cmath>
#include <limits>

namespace gald {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t idx) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

OpResult graph_to_op(Var out, std::vector<Var> inputs, std::vector<Var> params) {
    OpResult r;
    r.value = out->value;
    r.backward = [out = std::move(out), inputs = std::move(inputs),
                  params = std::move(params)](const Tensor& go) {
        run_backward(out, go);
        std::vector<Tensor> grads;
        grads.reserve(inputs.size() + params.size());
        for (const auto& v : inputs) grads.push_back(grad_of(v));
        for (const auto& p : params) grads.push_back(grad_of(p));
        return grads;
    };
    return r;
}

Var conv1x1(const Var& x, const Var& kernel, const Var& bias = nullptr) {
    return vconv2d(x, kernel, bias, ConvSpec{});
}

}  // namespace

std::vector<Tensor*> Ldv1Params::all_params() {
    std::vector<Tensor*> out;
    for (auto& t : depthwise) out.push_back(&t);
    return out;
}
std::vector<const Tensor*> Ldv1Params::all_params() const {
    auto mut = const_cast<Ldv1Params*>(this)->all_params();
    return {mut.begin(), mut.end()};
}

std::vector<Tensor*> Ldv2Params::all_params() {
    return {&theta, &phi, &g, &out_proj, &fuse_kernel, &fuse_bias};
}
std::vector<const Tensor*> Ldv2Params::all_params() const {
    auto mut = const_cast<Ldv2Params*>(this)->all_params();
    return {mut.begin(), mut.end()};
}

Ldv1Params ldv1_init(const Ldv1Config& cfg, std::size_t channels, std::uint64_t seed) {
    Ldv1Params p;
    if (cfg.strategy == Ldv1Strategy::depthwise_conv) {
        if ((std::size_t{1} << cfg.stack_depth) != cfg.downsample_ratio)
            throw std::invalid_argument(
                "ldv1_init: stride-2 stack of depth " + std::to_string(cfg.stack_depth) +
                " does not realize downsample ratio " + std::to_string(cfg.downsample_ratio));
        for (std::size_t i = 0; i < cfg.stack_depth; ++i)
            p.depthwise.push_back(uniform_init({channels, 1, 3, 3}, mix_seed(seed, i), 9));
    }
    return p;
}

Ldv2Params ldv2_init(const Ldv2Config& cfg, std::size_t channels, std::uint64_t seed) {
    if (cfg.kernel % 2 == 0 || cfg.kernel == 0)
        throw std::invalid_argument("ldv2_init: kernel must be odd");
    if (cfg.dilation == 0) throw std::invalid_argument("ldv2_init: dilation must be >= 1");
    const std::size_t C = channels, Cr = cfg.reduced_channels;
    if (Cr == 0) throw std::invalid_argument("ldv2_init: reduced_channels must be positive");
    Ldv2Params p;
    p.theta = uniform_init({Cr, 2 * C, 1, 1}, mix_seed(seed, 0), 2 * C);
    p.phi = uniform_init({Cr, 2 * C, 1, 1}, mix_seed(seed, 1), 2 * C);
    p.g = uniform_init({Cr, 2 * C, 1, 1}, mix_seed(seed, 2), 2 * C);
    p.out_proj = uniform_init({C, Cr, 1, 1}, mix_seed(seed, 3), Cr);
    p.fuse_kernel = uniform_init({C, 2 * C, 1, 1}, mix_seed(seed, 4), 2 * C);
    p.fuse_bias = uniform_init({1, C, 1, 1}, mix_seed(seed, 5), 2 * C);
    return p;
}

namespace {

Var build_ldv1_mask(const Var& x_g, const Ldv1Config& cfg, const std::vector<Var>& dw) {
    const auto s = x_g->value.shape();
    const std::size_t d = cfg.downsample_ratio;
    if (d == 0 || s.h % d != 0 || s.w % d != 0)
        throw std::invalid_argument("ldv1_mask: downsample ratio must divide h and w");
    Var down = x_g;
    switch (cfg.strategy) {
        case Ldv1Strategy::depthwise_conv: {
            if ((std::size_t{1} << cfg.stack_depth) != d)
                throw std::invalid_argument("ldv1_mask: stack_depth inconsistent with ratio");
            ConvSpec sp;
            sp.stride = 2;
            sp.pad = 1;
            sp.groups = s.c;
            for (std::size_t i = 0; i < cfg.stack_depth; ++i)
                down = vconv2d(down, dw[i], nullptr, sp);
            break;
        }
        case Ldv1Strategy::bilinear:
            down = vbilinear_resize(x_g, s.h / d, s.w / d);
            break;
        case Ldv1Strategy::avg_pool:
            down = vavg_pool_adaptive2(x_g, s.h / d, s.w / d);
            break;
    }
    return vsigmoid(vbilinear_upsample(down, s.h, s.w));
}

}  // namespace

OpResult ldv1_mask(const Tensor& x_g, const Ldv1Config& cfg, const Ldv1Params& params) {
    Var xv = make_leaf(x_g);
    std::vector<Var> pv;
    for (const Tensor* t : params.all_params()) pv.push_back(make_leaf(*t));
    Var out = build_ldv1_mask(xv, cfg, pv);
    return graph_to_op(out, {xv}, pv);
}

OpResult ldv1_apply(const Tensor& x_g, const Tensor& m) {
    if (!(x_g.shape() == m.shape()))
        throw std::invalid_argument("ldv1_apply: shape mismatch");
    Tensor out(x_g.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = m[i] * x_g[i] + x_g[i];
    Tensor xc = x_g, mc = m;
    auto backward = [xc, mc](const Tensor& go) {
        Tensor gx(xc.shape()), gm(mc.shape());
        for (std::size_t i = 0; i < go.numel(); ++i) {
            gx[i] = go[i] * (mc[i] + 1.0);
            gm[i] = go[i] * xc[i];
        }
        return std::vector<Tensor>{std::move(gx), std::move(gm)};
    };
    return {std::move(out), std::move(backward)};
}

SampledTensor sample_neighbors(const Tensor& x, std::size_t k, std::size_t r) {
    if (k % 2 == 0 || k == 0) throw std::invalid_argument("sample_neighbors: k must be odd");
    if (r == 0) throw std::invalid_argument("sample_neighbors: r must be >= 1");
    const auto s = x.shape();
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k - 1) / 2;
    const std::size_t K = k * k;
    SampledTensor out;
    out.k = k;
    out.values = Tensor(Shape4{s.n, K * s.c, s.h, s.w});
    out.valid.assign(K * s.h * s.w, 0);
    for (std::ptrdiff_t dy = -half; dy <= half; ++dy)
        for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
            const std::size_t j = static_cast<std::size_t>((dy + half) * static_cast<std::ptrdiff_t>(k) +
                                                           (dx + half));
            for (std::size_t y = 0; y < s.h; ++y)
                for (std::size_t xx = 0; xx < s.w; ++xx) {
                    const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + dy * static_cast<std::ptrdiff_t>(r);
                    const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(xx) + dx * static_cast<std::ptrdiff_t>(r);
                    const bool ok = ny >= 0 && ny < static_cast<std::ptrdiff_t>(s.h) &&
                                    nx >= 0 && nx < static_cast<std::ptrdiff_t>(s.w);
                    out.valid[(j * s.h + y) * s.w + xx] = ok ? 1 : 0;
                    if (!ok) continue;
                    for (std::size_t n = 0; n < s.n; ++n)
                        for (std::size_t c = 0; c < s.c; ++c)
                            out.values.at(n, j * s.c + c, y, xx) =
                                x.at(n, c, static_cast<std::size_t>(ny),
                                     static_cast<std::size_t>(nx));
                }
        }
    return out;
}

OpResult local_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::size_t ksize, std::size_t dilation, BorderMode mode,
                         MacCounter* mc) {
    if (!(q.shape() == k.shape()) || !(q.shape() == v.shape()))
        throw std::invalid_argument("local_attention: q/k/v shape mismatch");
    if (ksize % 2 == 0 || ksize == 0)
        throw std::invalid_argument("local_attention: kernel must be odd");
    if (dilation == 0) throw std::invalid_argument("local_attention: dilation must be >= 1");
    const auto s = q.shape();
    const std::size_t C = s.c, H = s.h, W = s.w, K = ksize * ksize;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(ksize - 1) / 2;
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(dilation);
    if (mc) mc->add(static_cast<std::uint64_t>(s.n) * 2 * C * H * W * K);

    // Attention weights are kept for the backward pass; neighbors are cheap
    // to recompute from (j, y, x).
    auto weights = std::make_shared<std::vector<double>>(s.n * H * W * K, 0.0);
    Tensor out(s);
    std::vector<double> logits(K);
    std::vector<std::ptrdiff_t> nys(K), nxs(K);
    std::vector<std::uint8_t> ok(K);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                for (std::size_t j = 0; j < K; ++j) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(j / ksize) - half;
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j % ksize) - half;
                    nys[j] = static_cast<std::ptrdiff_t>(y) + dy * r;
                    nxs[j] = static_cast<std::ptrdiff_t>(x) + dx * r;
                    ok[j] = nys[j] >= 0 && nys[j] < static_cast<std::ptrdiff_t>(H) &&
                            nxs[j] >= 0 && nxs[j] < static_cast<std::ptrdiff_t>(W);
                    if (ok[j]) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < C; ++c)
                            acc += q.at(n, c, y, x) *
                                   k.at(n, c, static_cast<std::size_t>(nys[j]),
                                        static_cast<std::size_t>(nxs[j]));
                        logits[j] = acc;
                    } else {
                        logits[j] = 0.0;  // zero-padded key dot product
                    }
                }
                const bool masked = mode == BorderMode::masked_softmax;
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < K; ++j)
                    if (!masked || ok[j]) m = std::max(m, logits[j]);
                double z = 0.0;
                double* wrow = weights->data() + ((n * H + y) * W + x) * K;
                for (std::size_t j = 0; j < K; ++j) {
                    if (masked && !ok[j]) { wrow[j] = 0.0; continue; }
                    wrow[j] = std::exp(logits[j] - m);
                    z += wrow[j];
                }
                for (std::size_t j = 0; j < K; ++j) wrow[j] /= z;
                for (std::size_t c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < K; ++j) {
                        if (!ok[j]) continue;  // zero value when padded
                        acc += wrow[j] * v.at(n, c, static_cast<std::size_t>(nys[j]),
                                              static_cast<std::size_t>(nxs[j]));
                    }
                    out.at(n, c, y, x) = acc;
                }
            }

    Tensor qc = q, kc = k, vc = v;
    auto backward = [qc, kc, vc, weights, ksize, r, half, mode](const Tensor& go) {
        const auto s = qc.shape();
        const std::size_t C = s.c, H = s.h, W = s.w, K = ksize * ksize;
        const bool masked = mode == BorderMode::masked_softmax;
        Tensor gq(s), gk(s), gv(s);
        std::vector<double> dlog(K);
        std::vector<std::ptrdiff_t> nys(K), nxs(K);
        std::vector<std::uint8_t> ok(K);
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double* wrow = weights->data() + ((n * H + y) * W + x) * K;
                    double wdot = 0.0;
                    for (std::size_t j = 0; j < K; ++j) {
                        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(j / ksize) - half;
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j % ksize) - half;
                        nys[j] = static_cast<std::ptrdiff_t>(y) + dy * r;
                        nxs[j] = static_cast<std::ptrdiff_t>(x) + dx * r;
                        ok[j] = nys[j] >= 0 && nys[j] < static_cast<std::ptrdiff_t>(H) &&
                                nxs[j] >= 0 && nxs[j] < static_cast<std::ptrdiff_t>(W);
                        double d = 0.0;
                        if (ok[j]) {
                            for (std::size_t c = 0; c < C; ++c)
                                d += go.at(n, c, y, x) *
                                     vc.at(n, c, static_cast<std::size_t>(nys[j]),
                                           static_cast<std::size_t>(nxs[j]));
                        }
                        dlog[j] = d;
                        wdot += wrow[j] * d;
                    }
                    for (std::size_t j = 0; j < K; ++j) {
                        if (masked && !ok[j]) continue;
                        const double dl = wrow[j] * (dlog[j] - wdot);
                        if (ok[j]) {
                            const std::size_t ny = static_cast<std::size_t>(nys[j]);
                            const std::size_t nx = static_cast<std::size_t>(nxs[j]);
                            for (std::size_t c = 0; c < C; ++c) {
                                gq.at(n, c, y, x) += dl * kc.at(n, c, ny, nx);
                                gk.at(n, c, ny, nx) += dl * qc.at(n, c, y, x);
                                gv.at(n, c, ny, nx) += wrow[j] * go.at(n, c, y, x);
                            }
                        }
                        // padded neighbors: key and value are constants, no grads
                    }
                }
        return std::vector<Tensor>{std::move(gq), std::move(gk), std::move(gv)};
    };
    return {std::move(out), std::move(backward)};
}

namespace {

struct Ldv2Graph {
    Var out;
    Var pre_fuse;
};

Ldv2Graph build_ldv2(const Var& x_g, const Var& x_l, const Ldv2Config& cfg,
                     const std::vector<Var>& p, MacCounter* mc) {
    if (!(x_g->value.shape() == x_l->value.shape()))
        throw std::invalid_argument("ldv2_forward: x_g/x_l shape mismatch");
    Var xin = vconcat_channels(x_g, x_l);
    Var q = conv1x1(xin, p[0]);
    Var kk = conv1x1(xin, p[1]);
    Var vv = conv1x1(xin, p[2]);
    Var att = make_node(local_attention(q->value, kk->value, vv->value, cfg.kernel,
                                        cfg.dilation, cfg.border_mode, mc),
                        {q, kk, vv});
    Var pre = conv1x1(att, p[3]);
    Var out = vconv2d(vconcat_channels(pre, x_l), p[4], p[5], ConvSpec{});
    return {out, pre};
}

}  // namespace

OpResult ldv2_forward(const Tensor& x_g, const Tensor& x_l, const Ldv2Config& cfg,
                      const Ldv2Params& params, MacCounter* mc, Tensor* pre_fuse) {
    Var xg = make_leaf(x_g), xl = make_leaf(x_l);
    std::vector<Var> pv;
    for (const Tensor* t : params.all_params()) pv.push_back(make_leaf(*t));
    Ldv2Graph g = build_ldv2(xg, xl, cfg, pv, mc);
    if (pre_fuse) *pre_fuse = g.pre_fuse->value;
    return graph_to_op(g.out, {xg, xl}, pv);
}

std::vector<Tensor*> GaldParams::all_params() {
    std::vector<Tensor*> out = ga.all_params();
    if (ld == LdKind::v1)
        for (Tensor* t : ldv1.all_params()) out.push_back(t);
    if (ld == LdKind::v2)
        for (Tensor* t : ldv2.all_params()) out.push_back(t);
    return out;
}
std::vector<const Tensor*> GaldParams::all_params() const {
    auto mut = const_cast<GaldParams*>(this)->all_params();
    return {mut.begin(), mut.end()};
}

GaldParams gald_init(const GaldConfig& cfg, std::size_t channels, std::uint64_t seed) {
    GaldParams p;
    p.ld = cfg.ld;
    p.ga = ga_init(cfg.ga, channels, mix_seed(seed, 100));
    if (cfg.ld == LdKind::v1) p.ldv1 = ldv1_init(cfg.ldv1, channels, mix_seed(seed, 200));
    if (cfg.ld == LdKind::v2) p.ldv2 = ldv2_init(cfg.ldv2, channels, mix_seed(seed, 300));
    return p;
}

Var build_gald(const Var& x, const GaldConfig& cfg, const std::vector<Var>& params,
               MacCounter* mc) {
    // Split the flat param list back into GA and LD portions.
    std::size_t ga_count = 0;
    switch (cfg.ga.kind) {
        case GaKind::psp: ga_count = cfg.ga.psp_bins.size() + 2; break;
        case GaKind::aspp: ga_count = cfg.ga.aspp_rates.size() + 4; break;
        case GaKind::nonlocal:
        case GaKind::cgnl: ga_count = 4; break;
    }
    std::vector<Var> ga_p(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(ga_count));
    std::vector<Var> ld_p(params.begin() + static_cast<std::ptrdiff_t>(ga_count), params.end());

    auto ld_stage = [&](const Var& xg, const Var& xl) -> Var {
        switch (cfg.ld) {
            case LdKind::none:
                return xg;
            case LdKind::v1: {
                Var m = build_ldv1_mask(xg, cfg.ldv1, ld_p);
                return vadd(vmul(m, xg), xg);
            }
            case LdKind::v2:
                return build_ldv2(xg, xl, cfg.ldv2, ld_p, mc).out;
        }
        throw std::logic_error("build_gald: unreachable");
    };

    switch (cfg.arrangement) {
        case Arrangement::gald: {
            Var xg = build_ga(x, cfg.ga, ga_p, mc);
            return vconcat_channels(ld_stage(xg, x), x);
        }
        case Arrangement::ldga: {
            Var ld = ld_stage(x, x);
            return vconcat_channels(build_ga(ld, cfg.ga, ga_p, mc), x);
        }
        case Arrangement::parallel: {
            return vconcat_channels(ld_stage(x, x), build_ga(x, cfg.ga, ga_p, mc));
        }
    }
    throw std::logic_error("build_gald: unreachable");
}

OpResult gald_forward(const Tensor& x, const GaldConfig& cfg, const GaldParams& params,
                      MacCounter* mc) {
    Var xv = make_leaf(x);
    std::vector<Var> pv;
    for (const Tensor* t : params.all_params()) pv.push_back(make_leaf(*t));
    Var out = build_gald(xv, cfg, pv, mc);
    return graph_to_op(out, {xv}, pv);
}

}  // namespace gald
