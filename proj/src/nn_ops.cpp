#include "gald/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace gald {

namespace {

std::size_t conv_out_dim(std::size_t in, std::size_t pad, std::size_t dilation,
                         std::size_t k, std::size_t stride) {
    std::ptrdiff_t eff = static_cast<std::ptrdiff_t>(dilation) * (static_cast<std::ptrdiff_t>(k) - 1) + 1;
    std::ptrdiff_t out = (static_cast<std::ptrdiff_t>(in) + 2 * static_cast<std::ptrdiff_t>(pad) - eff) /
                             static_cast<std::ptrdiff_t>(stride) + 1;
    if (out <= 0) throw std::invalid_argument("conv2d: non-positive output dimension");
    return static_cast<std::size_t>(out);
}

void check_conv(const Tensor& x, const ConvWeights& w) {
    const auto& xs = x.shape();
    const auto& ks = w.kernel.shape();
    const auto& sp = w.spec;
    if (sp.groups == 0 || sp.stride == 0 || sp.dilation == 0)
        throw std::invalid_argument("conv2d: stride/dilation/groups must be positive");
    if (xs.c % sp.groups != 0 || ks.n % sp.groups != 0)
        throw std::invalid_argument("conv2d: channels not divisible by groups");
    if (ks.c != xs.c / sp.groups)
        throw std::invalid_argument("conv2d: kernel c_in_per_group mismatch");
    if (w.bias && !(w.bias->shape() == Shape4{1, ks.n, 1, 1}))
        throw std::invalid_argument("conv2d: bias shape must be (1,c_out,1,1)");
}

}  // namespace

OpResult conv2d(const Tensor& x, const ConvWeights& w) {
    check_conv(x, w);
    const auto xs = x.shape();
    const auto ks = w.kernel.shape();
    const ConvSpec sp = w.spec;
    const std::size_t G = sp.groups;
    const std::size_t cin_g = ks.c, cout = ks.n, cout_g = cout / G;
    const std::size_t oh = conv_out_dim(xs.h, sp.pad, sp.dilation, ks.h, sp.stride);
    const std::size_t ow = conv_out_dim(xs.w, sp.pad, sp.dilation, ks.w, sp.stride);

    Tensor out(Shape4{xs.n, cout, oh, ow});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t g = 0; g < G; ++g)
            for (std::size_t oc = 0; oc < cout_g; ++oc) {
                const std::size_t co = g * cout_g + oc;
                const double b = w.bias ? w.bias->at(0, co, 0, 0) : 0.0;
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        double acc = b;
                        for (std::size_t ic = 0; ic < cin_g; ++ic)
                            for (std::size_t ky = 0; ky < ks.h; ++ky) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * sp.stride + ky * sp.dilation) -
                                    static_cast<std::ptrdiff_t>(sp.pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
                                for (std::size_t kx = 0; kx < ks.w; ++kx) {
                                    const std::ptrdiff_t ix =
                                        static_cast<std::ptrdiff_t>(ox * sp.stride + kx * sp.dilation) -
                                        static_cast<std::ptrdiff_t>(sp.pad);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                                    acc += x.at(n, g * cin_g + ic, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix)) *
                                           w.kernel.at(co, ic, ky, kx);
                                }
                            }
                        out.at(n, co, oy, ox) = acc;
                    }
            }

    const bool has_bias = w.bias.has_value();
    Tensor xc = x;
    Tensor kc = w.kernel;
    auto backward = [xc, kc, sp, has_bias, oh, ow](const Tensor& go) {
        const auto xs = xc.shape();
        const auto ks = kc.shape();
        const std::size_t G = sp.groups;
        const std::size_t cin_g = ks.c, cout_g = ks.n / G;
        Tensor gx(xs), gk(ks);
        Tensor gb(Shape4{1, ks.n, 1, 1});
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t g = 0; g < G; ++g)
                for (std::size_t oc = 0; oc < cout_g; ++oc) {
                    const std::size_t co = g * cout_g + oc;
                    for (std::size_t oy = 0; oy < oh; ++oy)
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const double gv = go.at(n, co, oy, ox);
                            gb.at(0, co, 0, 0) += gv;
                            for (std::size_t ic = 0; ic < cin_g; ++ic)
                                for (std::size_t ky = 0; ky < ks.h; ++ky) {
                                    const std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(oy * sp.stride + ky * sp.dilation) -
                                        static_cast<std::ptrdiff_t>(sp.pad);
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
                                    for (std::size_t kx = 0; kx < ks.w; ++kx) {
                                        const std::ptrdiff_t ix =
                                            static_cast<std::ptrdiff_t>(ox * sp.stride + kx * sp.dilation) -
                                            static_cast<std::ptrdiff_t>(sp.pad);
                                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                                        const std::size_t ci = g * cin_g + ic;
                                        gx.at(n, ci, static_cast<std::size_t>(iy),
                                              static_cast<std::size_t>(ix)) +=
                                            gv * kc.at(co, ic, ky, kx);
                                        gk.at(co, ic, ky, kx) +=
                                            gv * xc.at(n, ci, static_cast<std::size_t>(iy),
                                                       static_cast<std::size_t>(ix));
                                    }
                                }
                        }
                }
        std::vector<Tensor> grads{std::move(gx), std::move(gk)};
        if (has_bias) grads.push_back(std::move(gb));
        return grads;
    };
    return {std::move(out), std::move(backward)};
}

OpResult depthwise_conv2d(const Tensor& x, const ConvWeights& w) {
    if (w.spec.groups != x.shape().c || w.kernel.shape().n != x.shape().c)
        throw std::invalid_argument("depthwise_conv2d: requires groups == c_out == c_in");
    return conv2d(x, w);
}

namespace {

struct LerpAxis {
    std::vector<std::size_t> i0, i1;
    std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

LerpAxis make_axis(std::size_t in, std::size_t out) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const std::size_t i0 = static_cast<std::size_t>(std::floor(src));
        ax.i0[o] = i0;
        ax.i1[o] = std::min(i0 + 1, in - 1);
        ax.w1[o] = src - static_cast<double>(i0);
    }
    return ax;
}

}  // namespace

OpResult bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    const auto xs = x.shape();
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("bilinear_resize: zero output dim");
    if (xs.h == 0 || xs.w == 0) throw std::invalid_argument("bilinear_resize: zero input dim");
    const LerpAxis ay = make_axis(xs.h, out_h);
    const LerpAxis axx = make_axis(xs.w, out_w);
    Tensor out(Shape4{xs.n, xs.c, out_h, out_w});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t c = 0; c < xs.c; ++c)
            for (std::size_t oy = 0; oy < out_h; ++oy)
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const double wy = ay.w1[oy], wx = axx.w1[ox];
                    out.at(n, c, oy, ox) =
                        (1 - wy) * ((1 - wx) * x.at(n, c, ay.i0[oy], axx.i0[ox]) +
                                    wx * x.at(n, c, ay.i0[oy], axx.i1[ox])) +
                        wy * ((1 - wx) * x.at(n, c, ay.i1[oy], axx.i0[ox]) +
                              wx * x.at(n, c, ay.i1[oy], axx.i1[ox]));
                }
    auto backward = [xs, ay, axx, out_h, out_w](const Tensor& go) {
        Tensor gx(xs);
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t c = 0; c < xs.c; ++c)
                for (std::size_t oy = 0; oy < out_h; ++oy)
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const double g = go.at(n, c, oy, ox);
                        const double wy = ay.w1[oy], wx = axx.w1[ox];
                        gx.at(n, c, ay.i0[oy], axx.i0[ox]) += g * (1 - wy) * (1 - wx);
                        gx.at(n, c, ay.i0[oy], axx.i1[ox]) += g * (1 - wy) * wx;
                        gx.at(n, c, ay.i1[oy], axx.i0[ox]) += g * wy * (1 - wx);
                        gx.at(n, c, ay.i1[oy], axx.i1[ox]) += g * wy * wx;
                    }
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    if (out_h < x.shape().h || out_w < x.shape().w)
        throw std::invalid_argument("bilinear_upsample: output dims must be >= input dims");
    return bilinear_resize(x, out_h, out_w);
}

OpResult avg_pool_adaptive2(const Tensor& x, std::size_t bins_h, std::size_t bins_w) {
    const auto xs = x.shape();
    if (bins_h == 0 || bins_w == 0 || bins_h > xs.h || bins_w > xs.w)
        throw std::invalid_argument("avg_pool_adaptive: bins must be in [1, spatial dim]");
    auto lo = [](std::size_t i, std::size_t dim, std::size_t bins) { return i * dim / bins; };
    Tensor out(Shape4{xs.n, xs.c, bins_h, bins_w});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t c = 0; c < xs.c; ++c)
            for (std::size_t by = 0; by < bins_h; ++by)
                for (std::size_t bx = 0; bx < bins_w; ++bx) {
                    const std::size_t y0 = lo(by, xs.h, bins_h), y1 = lo(by + 1, xs.h, bins_h);
                    const std::size_t x0 = lo(bx, xs.w, bins_w), x1 = lo(bx + 1, xs.w, bins_w);
                    double acc = 0.0;
                    for (std::size_t y = y0; y < y1; ++y)
                        for (std::size_t xx = x0; xx < x1; ++xx) acc += x.at(n, c, y, xx);
                    out.at(n, c, by, bx) = acc / static_cast<double>((y1 - y0) * (x1 - x0));
                }
    auto backward = [xs, bins_h, bins_w, lo](const Tensor& go) {
        Tensor gx(xs);
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t c = 0; c < xs.c; ++c)
                for (std::size_t by = 0; by < bins_h; ++by)
                    for (std::size_t bx = 0; bx < bins_w; ++bx) {
                        const std::size_t y0 = lo(by, xs.h, bins_h), y1 = lo(by + 1, xs.h, bins_h);
                        const std::size_t x0 = lo(bx, xs.w, bins_w), x1 = lo(bx + 1, xs.w, bins_w);
                        const double g = go.at(n, c, by, bx) /
                                         static_cast<double>((y1 - y0) * (x1 - x0));
                        for (std::size_t y = y0; y < y1; ++y)
                            for (std::size_t xx = x0; xx < x1; ++xx) gx.at(n, c, y, xx) += g;
                    }
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult avg_pool_adaptive(const Tensor& x, std::size_t bins) {
    return avg_pool_adaptive2(x, bins, bins);
}

OpResult sigmoid_op(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double v = x[i];
        out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    Tensor yc = out;
    auto backward = [yc](const Tensor& go) {
        Tensor gx(yc.shape());
        for (std::size_t i = 0; i < yc.numel(); ++i) gx[i] = go[i] * yc[i] * (1.0 - yc[i]);
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult softmax_lastdim(const Tensor& x) {
    const auto xs = x.shape();
    const std::size_t rows = xs.n * xs.c * xs.h, K = xs.w;
    if (K == 0) throw std::invalid_argument("softmax_lastdim: empty rows");
    Tensor out(xs);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * K;
        double m = x[base];
        for (std::size_t j = 1; j < K; ++j) m = std::max(m, x[base + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            out[base + j] = std::exp(x[base + j] - m);
            z += out[base + j];
        }
        for (std::size_t j = 0; j < K; ++j) out[base + j] /= z;
    }
    Tensor yc = out;
    auto backward = [yc, rows, K](const Tensor& go) {
        Tensor gx(yc.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t base = r * K;
            double dot = 0.0;
            for (std::size_t j = 0; j < K; ++j) dot += go[base + j] * yc[base + j];
            for (std::size_t j = 0; j < K; ++j)
                gx[base + j] = yc[base + j] * (go[base + j] - dot);
        }
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult batched_matmul(const Tensor& a, const Tensor& b, MacCounter* mc) {
    const auto as = a.shape(), bs = b.shape();
    if (as.c != 1 || bs.c != 1 || as.n != bs.n || as.w != bs.h)
        throw std::invalid_argument("batched_matmul: expected (B,1,m,p) x (B,1,p,q), got " +
                                    as.str() + " x " + bs.str());
    const std::size_t B = as.n, m = as.h, p = as.w, q = bs.w;
    if (mc) mc->add(static_cast<std::uint64_t>(B) * m * p * q);
    Tensor out(Shape4{B, 1, m, q});
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < q; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < p; ++k)
                    acc += a.at(n, 0, i, k) * b.at(n, 0, k, j);
                out.at(n, 0, i, j) = acc;
            }
    Tensor ac = a, bc = b;
    auto backward = [ac, bc, B, m, p, q](const Tensor& go) {
        Tensor ga(ac.shape()), gb(bc.shape());
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < p; ++k) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < q; ++j)
                        acc += go.at(n, 0, i, j) * bc.at(n, 0, k, j);
                    ga.at(n, 0, i, k) = acc;
                }
            for (std::size_t k = 0; k < p; ++k)
                for (std::size_t j = 0; j < q; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        acc += ac.at(n, 0, i, k) * go.at(n, 0, i, j);
                    gb.at(n, 0, k, j) = acc;
                }
        }
        return std::vector<Tensor>{std::move(ga), std::move(gb)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult transpose_last2(const Tensor& x) {
    const auto xs = x.shape();
    if (xs.c != 1) throw std::invalid_argument("transpose_last2: expected (B,1,m,p)");
    Tensor out(Shape4{xs.n, 1, xs.w, xs.h});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t i = 0; i < xs.h; ++i)
            for (std::size_t j = 0; j < xs.w; ++j) out.at(n, 0, j, i) = x.at(n, 0, i, j);
    auto backward = [xs](const Tensor& go) {
        Tensor gx(xs);
        for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t i = 0; i < xs.h; ++i)
                for (std::size_t j = 0; j < xs.w; ++j) gx.at(n, 0, i, j) = go.at(n, 0, j, i);
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult add_op(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) throw std::invalid_argument("add_op: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    auto backward = [](const Tensor& go) { return std::vector<Tensor>{go, go}; };
    return {std::move(out), backward};
}

OpResult mul_op(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) throw std::invalid_argument("mul_op: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    Tensor ac = a, bc = b;
    auto backward = [ac, bc](const Tensor& go) {
        Tensor ga(ac.shape()), gb(bc.shape());
        for (std::size_t i = 0; i < go.numel(); ++i) {
            ga[i] = go[i] * bc[i];
            gb[i] = go[i] * ac[i];
        }
        return std::vector<Tensor>{std::move(ga), std::move(gb)};
    };
    return {std::move(out), std::move(backward)};
}

OpResult scale_op(const Tensor& x, double s) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * s;
    auto backward = [s](const Tensor& go) {
        Tensor gx(go.shape());
        for (std::size_t i = 0; i < go.numel(); ++i) gx[i] = go[i] * s;
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), backward};
}

OpResult concat_channels_op(const Tensor& a, const Tensor& b) {
    Tensor out = concat_channels(a, b);
    const std::size_t ca = a.shape().c, cb = b.shape().c;
    auto backward = [ca, cb](const Tensor& go) {
        return std::vector<Tensor>{slice_channels(go, 0, ca), slice_channels(go, ca, ca + cb)};
    };
    return {std::move(out), backward};
}

OpResult slice_channels_op(const Tensor& t, std::size_t c0, std::size_t c1) {
    Tensor out = slice_channels(t, c0, c1);
    const auto ts = t.shape();
    auto backward = [ts, c0, c1](const Tensor& go) {
        Tensor gx(ts);
        for (std::size_t n = 0; n < ts.n; ++n)
            for (std::size_t c = c0; c < c1; ++c)
                for (std::size_t y = 0; y < ts.h; ++y)
                    for (std::size_t x = 0; x < ts.w; ++x)
                        gx.at(n, c, y, x) = go.at(n, c - c0, y, x);
        return std::vector<Tensor>{std::move(gx)};
    };
    return {std::move(out), backward};
}

OpResult sum_op(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
    Tensor out(Shape4{1, 1, 1, 1});
    out[0] = acc;
    const auto xs = x.shape();
    auto backward = [xs](const Tensor& go) {
        return std::vector<Tensor>{Tensor::constant(xs, go[0])};
    };
    return {std::move(out), backward};
}

}  // namespace gald
