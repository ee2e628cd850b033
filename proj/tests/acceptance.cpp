// Acceptance gate: one pass/fail line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gald/bench.hpp"
#include "gald/ga_heads.hpp"
#include "gald/ld_modules.hpp"
#include "gald/metrics.hpp"
#include "gald/oracles.hpp"
#include "gald/toy_pipeline.hpp"

using namespace gald;
using oracles::dense_attention_oracle;
using oracles::gradcheck;

namespace {

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, double secs) {
    std::printf("[%s] %s: %s (%.1fs)\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!pass) ++failures;
}

double run_timed(const std::function<bool(std::string&)>& fn, const std::string& id) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
        pass = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, pass, detail, secs);
    return secs;
}

bool c01_dense_oracle(std::string& detail) {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Tensor x = Tensor::seeded_uniform({1, 4, 4, 4}, seed, -1, 1);
        Tensor th = uniform_init({2, 4, 1, 1}, seed + 1000, 4);
        Tensor ph = uniform_init({2, 4, 1, 1}, seed + 2000, 4);
        Tensor g = uniform_init({2, 4, 1, 1}, seed + 3000, 4);
        worst = std::max(worst, max_abs_diff(nonlocal_attention(x, th, ph, g).value,
                                             dense_attention_oracle(x, th, ph, g)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "attention core vs dense oracle, 20 seeds, max|err|=%.2e tol 1e-10",
                  worst);
    detail = buf;
    return worst < 1e-10;
}

bool c02_full_coverage(std::string& detail) {
    // k = 2*max(h,w)-1 makes the local window cover the whole 3x3 grid
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Tensor x = Tensor::seeded_uniform({1, 3, 3, 3}, seed, -1, 1);
        Tensor th = uniform_init({2, 3, 1, 1}, seed + 1000, 3);
        Tensor ph = uniform_init({2, 3, 1, 1}, seed + 2000, 3);
        Tensor g = uniform_init({2, 3, 1, 1}, seed + 3000, 3);
        Tensor q = conv2d(x, ConvWeights{th, std::nullopt, {}}).value;
        Tensor k = conv2d(x, ConvWeights{ph, std::nullopt, {}}).value;
        Tensor v = conv2d(x, ConvWeights{g, std::nullopt, {}}).value;
        Tensor got = local_attention(q, k, v, 5, 1, BorderMode::masked_softmax).value;
        worst = std::max(worst, max_abs_diff(got, dense_attention_oracle(x, th, ph, g)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf,
                  "full-coverage local attention vs dense oracle, 20 seeds, max|err|=%.2e tol 1e-10",
                  worst);
    detail = buf;
    return worst < 1e-10;
}

bool c03_gradcheck(std::string& detail) {
    double worst = 0;
    auto check = [&worst](const std::function<OpResult(const std::vector<Tensor>&)>& op,
                          const std::vector<Tensor>& args) {
        worst = std::max(worst, gradcheck(op, args).max_rel_err);
    };
    for (std::uint64_t s = 0; s < 10; ++s) {
        Tensor x = Tensor::seeded_uniform({1, 2, 4, 4}, s, -1, 1);
        Tensor x2 = Tensor::seeded_uniform({1, 2, 4, 4}, s + 50, -1, 1);
        Tensor k33 = uniform_init({2, 2, 3, 3}, s + 100, 18);
        Tensor kdw = uniform_init({2, 1, 3, 3}, s + 150, 9);
        Tensor b = uniform_init({1, 2, 1, 1}, s + 200, 18);
        ConvSpec pad1;
        pad1.pad = 1;
        // primitives
        check([pad1](const std::vector<Tensor>& a) {
            return conv2d(a[0], ConvWeights{a[1], a[2], pad1});
        }, {x, k33, b});
        ConvSpec dw = pad1;
        dw.groups = 2;
        check([dw](const std::vector<Tensor>& a) {
            return depthwise_conv2d(a[0], ConvWeights{a[1], std::nullopt, dw});
        }, {x, kdw});
        check([](const std::vector<Tensor>& a) { return bilinear_resize(a[0], 3, 3); }, {x});
        check([](const std::vector<Tensor>& a) { return bilinear_upsample(a[0], 6, 7); }, {x});
        check([](const std::vector<Tensor>& a) { return avg_pool_adaptive(a[0], 2); }, {x});
        check([](const std::vector<Tensor>& a) { return avg_pool_adaptive2(a[0], 1, 3); }, {x});
        check([](const std::vector<Tensor>& a) { return sigmoid_op(a[0]); }, {x});
        check([](const std::vector<Tensor>& a) { return softmax_lastdim(a[0]); }, {x});
        check([](const std::vector<Tensor>& a) { return batched_matmul(a[0], a[1]); },
              {Tensor::seeded_uniform({1, 1, 3, 4}, s + 300, -1, 1),
               Tensor::seeded_uniform({1, 1, 4, 2}, s + 350, -1, 1)});
        check([](const std::vector<Tensor>& a) { return transpose_last2(a[0]); },
              {Tensor::seeded_uniform({1, 1, 3, 4}, s + 375, -1, 1)});
        check([](const std::vector<Tensor>& a) { return add_op(a[0], a[1]); }, {x, x2});
        check([](const std::vector<Tensor>& a) { return mul_op(a[0], a[1]); }, {x, x2});
        check([](const std::vector<Tensor>& a) { return scale_op(a[0], -1.7); }, {x});
        check([](const std::vector<Tensor>& a) { return concat_channels_op(a[0], a[1]); },
              {x, x2});
        check([](const std::vector<Tensor>& a) { return slice_channels_op(a[0], 1, 2); }, {x});
        check([](const std::vector<Tensor>& a) { return sum_op(a[0]); }, {x});
        // GA heads
        for (GaKind kind : {GaKind::psp, GaKind::aspp, GaKind::nonlocal, GaKind::cgnl}) {
            GaConfig cfg = default_ga_config(kind, 2);
            cfg.psp_bins = {1, 2};
            cfg.aspp_rates = {1, 2};
            GaParams tmpl = ga_init(cfg, 2, s + 400);
            std::vector<Tensor> args{x};
            for (const Tensor* t : tmpl.all_params()) args.push_back(*t);
            check([cfg, tmpl](const std::vector<Tensor>& a) {
                GaParams p = tmpl;
                auto ptrs = p.all_params();
                for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = a[i + 1];
                return ga_forward(a[0], cfg, p);
            }, args);
        }
        // LD modules
        Ldv1Config v1;
        v1.downsample_ratio = 2;
        v1.stack_depth = 1;
        Ldv1Params v1p = ldv1_init(v1, 2, s + 500);
        check([v1](const std::vector<Tensor>& a) {
            Ldv1Params p;
            p.depthwise = {a[1]};
            return ldv1_mask(a[0], v1, p);
        }, {x, v1p.depthwise[0]});
        check([](const std::vector<Tensor>& a) { return ldv1_apply(a[0], a[1]); },
              {x, Tensor::seeded_uniform({1, 2, 4, 4}, s + 550, 0.1, 0.9)});
        Ldv2Config v2;
        v2.kernel = 3;
        v2.dilation = 1;
        v2.reduced_channels = 2;
        Ldv2Params v2p = ldv2_init(v2, 2, s + 600);
        {
            std::vector<Tensor> args{x, x2};
            for (const Tensor* t : v2p.all_params()) args.push_back(*t);
            check([v2, v2p](const std::vector<Tensor>& a) {
                Ldv2Params p = v2p;
                auto ptrs = p.all_params();
                for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = a[i + 2];
                return ldv2_forward(a[0], a[1], v2, p);
            }, args);
        }
        // composed head
        GaldConfig gc;
        gc.arrangement = Arrangement::gald;
        gc.ga = default_ga_config(GaKind::nonlocal, 2);
        gc.ld = LdKind::v2;
        gc.ldv2 = v2;
        GaldParams gp = gald_init(gc, 2, s + 700);
        {
            std::vector<Tensor> args{x};
            for (const Tensor* t : gp.all_params()) args.push_back(*t);
            check([gc, gp](const std::vector<Tensor>& a) {
                GaldParams p = gp;
                auto ptrs = p.all_params();
                for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = a[i + 1];
                return gald_forward(a[0], gc, p);
            }, args);
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "all ops/heads/modules/composed, 10 seeds, worst rel err=%.2e tol 1e-5",
                  worst);
    detail = buf;
    return worst < 1e-5;
}

bool c04_mask_algebra(std::string& detail) {
    Ldv1Config cfg;
    cfg.downsample_ratio = 4;
    cfg.stack_depth = 2;
    Ldv1Params p = ldv1_init(cfg, 2, 1);
    for (auto& t : p.depthwise) t = Tensor::zeros(t.shape());
    Tensor xg = Tensor::seeded_uniform({1, 2, 8, 8}, 2, 0.0, 2.0);  // non-negative
    Tensor m = ldv1_mask(xg, cfg, p).value;
    Tensor y = ldv1_apply(xg, m).value;
    double worst = 0;
    for (std::size_t i = 0; i < y.numel(); ++i)
        worst = std::max(worst, std::fabs(y[i] - 1.5 * xg[i]));
    if (worst != 0.0) {
        detail = "zero-weight mask did not give exactly 1.5*x_g";
        return false;
    }
    // bound check with a learned (nonzero) mask
    Ldv1Params q = ldv1_init(cfg, 2, 3);
    Tensor m2 = ldv1_mask(xg, cfg, q).value;
    Tensor y2 = ldv1_apply(xg, m2).value;
    for (std::size_t i = 0; i < y2.numel(); ++i)
        if (!(y2[i] >= xg[i] && y2[i] <= 2.0 * xg[i])) {
            detail = "output escaped [x_g, 2*x_g] for non-negative x_g";
            return false;
        }
    detail = "zero-weight mask gives exactly 1.5*x_g; x_g <= out <= 2*x_g holds element-wise";
    return true;
}

bool c05_complexity_model(std::string& detail) {
    using namespace gald::bench;
    SweepConfig cfg;
    cfg.c_reduced = 8;
    cfg.k = 5;
    std::vector<std::pair<std::size_t, std::size_t>> sizes{{4, 4}, {8, 8}, {16, 16}, {32, 32}};
    auto recs = run_sweep({Method::nonlocal, Method::ldv2}, sizes, cfg);
    for (const auto& r : recs)
        if (r.mac_count != flop_model(parse_method(r.method), r.h, r.w, cfg.c_reduced, cfg.k)) {
            detail = "counter != model at " + r.method + " h=" + std::to_string(r.h);
            return false;
        }
    const double ratio = double(flop_model(Method::nonlocal, 64, 64, 16, 5)) /
                         double(flop_model(Method::ldv2, 64, 64, 16, 5));
    if (ratio != 163.84) {
        detail = "H=64,k=5 MAC ratio is " + std::to_string(ratio) + ", want 163.84";
        return false;
    }
    detail = "counters equal closed forms at H in {4,8,16,32}; H=64,k=5 ratio exactly 163.84";
    return true;
}

bool c06_empirical_scaling(std::string& detail) {
    using namespace gald::bench;
    SweepConfig cfg;
    cfg.c_reduced = 16;
    cfg.k = 5;
    std::vector<std::pair<std::size_t, std::size_t>> sizes{{8, 8}, {16, 16}, {32, 32}, {64, 64}};
    auto dense = run_sweep({Method::nonlocal}, sizes, cfg);
    auto local = run_sweep({Method::ldv2}, sizes, cfg);
    const double bd = fit_exponent(dense).exponent;
    const double bl = fit_exponent(local).exponent;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "fitted exponents: nonlocal b=%.3f (want [1.7,2.3]), ldv2 b=%.3f (want [0.8,1.3])",
                  bd, bl);
    detail = buf;
    return bd >= 1.7 && bd <= 2.3 && bl >= 0.8 && bl <= 1.3;
}

bool c07_locality(std::string& detail) {
    Ldv2Config cfg;
    cfg.kernel = 3;
    cfg.dilation = 1;
    cfg.reduced_channels = 2;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Ldv2Params p = ldv2_init(cfg, 2, seed + 10);
        Tensor xg = Tensor::seeded_uniform({1, 2, 8, 8}, seed, -1, 1);
        Tensor xl = Tensor::seeded_uniform({1, 2, 8, 8}, seed + 5, -1, 1);
        Tensor pre0;
        ldv2_forward(xg, xl, cfg, p, nullptr, &pre0);
        // perturb one position; outputs beyond Chebyshev radius 1 must be unchanged
        const std::size_t py = 2 + seed % 4, px = 3 + seed % 3;
        Tensor xg2 = xg;
        xg2.at(0, 0, py, px) += 1.0;
        Tensor pre1;
        ldv2_forward(xg2, xl, cfg, p, nullptr, &pre1);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t y = 0; y < 8; ++y)
                for (std::size_t x = 0; x < 8; ++x) {
                    const std::size_t dy = y > py ? y - py : py - y;
                    const std::size_t dx = x > px ? x - px : px - x;
                    if (std::max(dy, dx) <= 1) continue;
                    ++checked;
                    if (pre0.at(0, c, y, x) != pre1.at(0, c, y, x)) {
                        detail = "far output changed after local perturbation";
                        return false;
                    }
                }
    }
    detail = "pre-fuse invariant beyond Chebyshev radius 1 on 8x8 grids (" +
             std::to_string(checked) + " positions, 5 seeds)";
    return true;
}

bool c08_metrics(std::string& detail) {
    std::mt19937_64 rng(99);
    LabelMap gt{8, 8, std::vector<int>(64, 0), std::nullopt};
    for (auto& l : gt.labels) l = int(rng() % 3);
    for (std::size_t slack : {3, 5, 9, 12})
        for (int cls = 0; cls < 3; ++cls)
            if (boundary_fscore(gt, gt, cls, slack) != 1.0) {
                detail = "identical maps did not score F=1";
                return false;
            }
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 r2(seed + 1);
        LabelMap a{6, 6, std::vector<int>(36, 0), std::nullopt};
        LabelMap b = a;
        for (auto& l : a.labels) l = int(r2() % 2);
        for (auto& l : b.labels) l = int(r2() % 2);
        double prev = -1;
        for (std::size_t slack : {0, 1, 3, 5, 9, 12}) {
            const double f = boundary_fscore(a, b, 1, slack);
            if (f < prev) {
                detail = "boundary F not monotone in slack";
                return false;
            }
            prev = f;
        }
    }
    LabelMap g2{2, 2, {0, 0, 1, 1}, std::nullopt};
    LabelMap p2{2, 2, {0, 1, 1, 1}, std::nullopt};
    const double m = miou(p2, g2, 2).miou;
    if (std::fabs(m - 7.0 / 12.0) > 1e-15) {
        detail = "mIoU hand case != 7/12";
        return false;
    }
    detail = "F=1 on identical maps at slacks {3,5,9,12}; monotone on 100 pairs; mIoU 7/12 exact";
    return true;
}

bool c09_ablation(std::string& detail) {
    const std::vector<std::uint64_t> seeds{11, 22, 33, 44, 55};
    auto mean_bf3 = [&seeds](LdKind ld, std::string& runs) {
        double sum = 0;
        for (std::uint64_t s : seeds) {
            TrainConfig cfg;
            cfg.seed = s;
            cfg.head = toy_head_config(GaKind::nonlocal, ld, cfg.feature_channels);
            TrainReport r = train_toy(cfg);
            if (r.diverged) {
                runs += " diverged";
                return -1.0;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.4f", r.boundary_f.at(3));
            runs += buf;
            sum += r.boundary_f.at(3);
        }
        return sum / double(seeds.size());
    };
    std::string r0, r1, r2;
    const double ga_only = mean_bf3(LdKind::none, r0);
    const double ga_v1 = mean_bf3(LdKind::v1, r1);
    const double ga_v2 = mean_bf3(LdKind::v2, r2);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "mean boundary F(slack 3) over 5 seeds: ga-only=%.4f ldv1=%.4f ldv2=%.4f; "
                  "require ldv2 >= ga-only",
                  ga_only, ga_v1, ga_v2);
    detail = buf;
    std::printf("       ga-only runs:%s\n       ga+ldv1 runs:%s\n       ga+ldv2 runs:%s\n",
                r0.c_str(), r1.c_str(), r2.c_str());
    if (ga_only < 0 || ga_v1 < 0 || ga_v2 < 0) return false;
    return ga_v2 >= ga_only;
}

bool c10_determinism(std::string& detail) {
    auto d1 = synth_dataset(42, 8, 64, 64);
    auto d2 = synth_dataset(42, 8, 64, 64);
    for (std::size_t i = 0; i < d1.size(); ++i)
        if (d1[i].image.data() != d2[i].image.data() ||
            d1[i].labels.labels != d2[i].labels.labels) {
            detail = "dataset generation not bit-reproducible";
            return false;
        }
    TrainConfig cfg;
    cfg.samples = 8;
    cfg.eval_samples = 2;
    cfg.epochs = 1;
    cfg.batch = 4;
    cfg.image_size = 32;
    cfg.feature_channels = 4;
    cfg.head = toy_head_config(GaKind::nonlocal, LdKind::v2, 4);
    TrainReport a = train_toy(cfg);
    TrainReport b = train_toy(cfg);
    if (a.loss_curve != b.loss_curve || a.final_miou != b.final_miou ||
        a.boundary_f != b.boundary_f) {
        detail = "training not bit-reproducible";
        return false;
    }
    Tensor x = Tensor::seeded_uniform({1, 4, 4, 4}, 7, -1, 1);
    Tensor th = uniform_init({2, 4, 1, 1}, 8, 4);
    Tensor v1 = nonlocal_attention(x, th, th, th).value;
    Tensor v2 = nonlocal_attention(x, th, th, th).value;
    if (v1.data() != v2.data()) {
        detail = "verification op not bit-reproducible";
        return false;
    }
    detail = "dataset, training, and verification bit-identical across consecutive runs";
    return true;
}

}  // namespace

int main() {
    double total = 0;
    total += run_timed(c01_dense_oracle, "01 dense-oracle");
    total += run_timed(c02_full_coverage, "02 full-coverage-local");
    total += run_timed(c03_gradcheck, "03 gradcheck");
    total += run_timed(c04_mask_algebra, "04 mask-algebra");
    total += run_timed(c05_complexity_model, "05 complexity-model");
    total += run_timed(c06_empirical_scaling, "06 empirical-scaling");
    total += run_timed(c07_locality, "07 locality");
    total += run_timed(c08_metrics, "08 metrics");
    total += run_timed(c09_ablation, "09 directional-ablation");
    total += run_timed(c10_determinism, "10 determinism");
    std::printf("%d/10 criteria passed (%.1fs total)\n", 10 - failures, total);
    return failures == 0 ? 0 : 1;
}
