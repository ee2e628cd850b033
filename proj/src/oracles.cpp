#include "gald/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace gald {
namespace oracles {

Tensor dense_attention_oracle(const Tensor& x, const Tensor& theta, const Tensor& phi,
                              const Tensor& g) {
    const auto s = x.shape();
    const std::size_t N = s.h * s.w;
    if (N > 64) throw std::invalid_argument("dense_attention_oracle: N > 64 refused");
    const std::size_t C = s.c;
    const std::size_t Cr = theta.shape().n;
    if (theta.shape().c != C || phi.shape().c != C || g.shape().c != C ||
        phi.shape().n != Cr || g.shape().n != Cr)
        throw std::invalid_argument("dense_attention_oracle: projection shape mismatch");

    Tensor out(Shape4{s.n, Cr, s.h, s.w});
    std::vector<double> xt(N * Cr), xp(N * Cr), xg(N * Cr);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t y = i / s.w, xx = i % s.w;
            for (std::size_t r = 0; r < Cr; ++r) {
                double t = 0.0, p = 0.0, gg = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    const double v = x.at(n, c, y, xx);
                    t += theta.at(r, c, 0, 0) * v;
                    p += phi.at(r, c, 0, 0) * v;
                    gg += g.at(r, c, 0, 0) * v;
                }
                xt[i * Cr + r] = t;
                xp[i * Cr + r] = p;
                xg[i * Cr + r] = gg;
            }
        }
        for (std::size_t i = 0; i < N; ++i) {
            std::vector<double> row(N);
            double m = -1e300;
            for (std::size_t j = 0; j < N; ++j) {
                double dot = 0.0;
                for (std::size_t r = 0; r < Cr; ++r) dot += xt[i * Cr + r] * xp[j * Cr + r];
                row[j] = dot;
                m = std::max(m, dot);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                row[j] = std::exp(row[j] - m);
                z += row[j];
            }
            const std::size_t y = i / s.w, xx = i % s.w;
            for (std::size_t r = 0; r < Cr; ++r) {
                double acc = 0.0;
                for (std::size_t j = 0; j < N; ++j) acc += (row[j] / z) * xg[j * Cr + r];
                out.at(n, r, y, xx) = acc;
            }
        }
    }
    return out;
}

Tensor naive_conv_oracle(const Tensor& x, const ConvWeights& w) {
    const auto xs = x.shape();
    const auto ks = w.kernel.shape();
    const auto sp = w.spec;
    const std::size_t G = sp.groups;
    const std::size_t cin_g = ks.c, cout_g = ks.n / G;
    const std::ptrdiff_t eff_h = static_cast<std::ptrdiff_t>(sp.dilation * (ks.h - 1) + 1);
    const std::ptrdiff_t eff_w = static_cast<std::ptrdiff_t>(sp.dilation * (ks.w - 1) + 1);
    const std::ptrdiff_t oh = (static_cast<std::ptrdiff_t>(xs.h + 2 * sp.pad) - eff_h) /
                                  static_cast<std::ptrdiff_t>(sp.stride) + 1;
    const std::ptrdiff_t ow = (static_cast<std::ptrdiff_t>(xs.w + 2 * sp.pad) - eff_w) /
                                  static_cast<std::ptrdiff_t>(sp.stride) + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("naive_conv_oracle: empty output");

    Tensor out(Shape4{xs.n, ks.n, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
    for (std::size_t n = 0; n < xs.n; ++n)
        for (std::size_t co = 0; co < ks.n; ++co)
            for (std::ptrdiff_t oy = 0; oy < oh; ++oy)
                for (std::ptrdiff_t ox = 0; ox < ow; ++ox) {
                    const std::size_t g = co / cout_g;
                    double acc = w.bias ? w.bias->at(0, co, 0, 0) : 0.0;
                    for (std::size_t ic = 0; ic < cin_g; ++ic)
                        for (std::size_t ky = 0; ky < ks.h; ++ky)
                            for (std::size_t kx = 0; kx < ks.w; ++kx) {
                                const std::ptrdiff_t iy =
                                    oy * static_cast<std::ptrdiff_t>(sp.stride) +
                                    static_cast<std::ptrdiff_t>(ky * sp.dilation) -
                                    static_cast<std::ptrdiff_t>(sp.pad);
                                const std::ptrdiff_t ix =
                                    ox * static_cast<std::ptrdiff_t>(sp.stride) +
                                    static_cast<std::ptrdiff_t>(kx * sp.dilation) -
                                    static_cast<std::ptrdiff_t>(sp.pad);
                                double xv = 0.0;  // zero padding
                                if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(xs.h) &&
                                    ix >= 0 && ix < static_cast<std::ptrdiff_t>(xs.w))
                                    xv = x.at(n, g * cin_g + ic, static_cast<std::size_t>(iy),
                                              static_cast<std::size_t>(ix));
                                acc += xv * w.kernel.at(co, ic, ky, kx);
                            }
                    out.at(n, co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) = acc;
                }
    return out;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
    if (!(eps > 0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(probe);
        probe[i] = orig - eps;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite objective value");
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

GradReport gradcheck(const std::function<OpResult(const std::vector<Tensor>&)>& op,
                     const std::vector<Tensor>& args, double eps,
                     const std::vector<std::string>& names) {
    OpResult base = op(args);
    Tensor seed = Tensor::ones(base.value.shape());
    std::vector<Tensor> analytic = base.backward(seed);
    if (analytic.size() != args.size())
        throw std::invalid_argument("gradcheck: op backward arity != argument count");

    GradReport report;
    for (std::size_t a = 0; a < args.size(); ++a) {
        auto f = [&op, &args, a](const Tensor& probe) {
            std::vector<Tensor> mod = args;
            mod[a] = probe;
            const Tensor& out = op(mod).value;
            double s = 0.0;
            for (std::size_t i = 0; i < out.numel(); ++i) s += out[i];
            return s;
        };
        Tensor fd = finite_diff_grad(f, args[a], eps);
        TensorGradReport tr;
        tr.name = a < names.size() ? names[a] : ("arg" + std::to_string(a));
        for (std::size_t i = 0; i < fd.numel(); ++i) {
            const double abs_err = std::fabs(analytic[a][i] - fd[i]);
            const double denom = std::max({1.0, std::fabs(fd[i]), std::fabs(analytic[a][i])});
            const double rel = abs_err / denom;
            if (rel > tr.max_rel_err) {
                tr.max_rel_err = rel;
                tr.argmax = i;
            }
            tr.max_abs_err = std::max(tr.max_abs_err, abs_err);
        }
        report.max_rel_err = std::max(report.max_rel_err, tr.max_rel_err);
        report.per_tensor.push_back(std::move(tr));
    }
    return report;
}

}  // namespace oracles
}  // namespace gald
