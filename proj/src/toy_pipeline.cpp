#include "gald/toy_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

namespace gald {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t idx) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (static_cast<double>(rng() >> 11) * 0x1.0p-53) * (hi - lo);
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    // inclusive range, modulo bias irrelevant at these magnitudes
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

struct Rect {
    std::size_t y0, x0, y1, x1;  // half-open
    bool overlaps(const Rect& o) const {
        return y0 < o.y1 && o.y0 < y1 && x0 < o.x1 && o.x0 < x1;
    }
};

}  // namespace

std::vector<SynthSample> synth_dataset(std::uint64_t seed, std::size_t count,
                                       std::size_t h, std::size_t w) {
    if (h < 32 || w < 32) throw std::invalid_argument("synth_dataset: dims must be >= 32");
    std::vector<SynthSample> out;
    out.reserve(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::mt19937_64 rng(mix_seed(seed, idx));
        const std::size_t rh = uniform_int(rng, h / 2, 4 * h / 5);
        const std::size_t rw = uniform_int(rng, w / 2, 4 * w / 5);
        const std::size_t ry = uniform_int(rng, 0, h - rh);
        const std::size_t rx = uniform_int(rng, 0, w - rw);
        Rect large{ry, rx, ry + rh, rx + rw};
        const std::size_t side = uniform_int(rng, 3, std::max<std::size_t>(3, h / 8));
        Rect small{0, 0, side, side};
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            small.y0 = uniform_int(rng, 0, h - side);
            small.x0 = uniform_int(rng, 0, w - side);
            small.y1 = small.y0 + side;
            small.x1 = small.x0 + side;
            placed = !small.overlaps(large);
        }
        if (!placed) {
            // deterministic fallback: first disjoint slot in scan order
            for (std::size_t y = 0; y + side <= h && !placed; ++y)
                for (std::size_t x = 0; x + side <= w && !placed; ++x) {
                    small = Rect{y, x, y + side, x + side};
                    placed = !small.overlaps(large);
                }
            if (!placed) throw std::logic_error("synth_dataset: no free slot for small object");
        }
        double cb[3], cl[3], cs[3];
        for (int c = 0; c < 3; ++c) {
            cb[c] = uniform(rng, 0.0, 0.3);
            cl[c] = uniform(rng, 0.4, 0.7);
            cs[c] = uniform(rng, 0.75, 1.0);
        }
        SynthSample s;
        s.image = Tensor(Shape4{1, 3, h, w});
        s.labels = LabelMap{h, w, std::vector<int>(h * w, 0), std::nullopt};
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                int cls = 0;
                const Rect px{y, x, y + 1, x + 1};
                if (px.overlaps(small)) cls = 2;
                else if (px.overlaps(large)) cls = 1;
                s.labels.at(y, x) = cls;
                const double* col = cls == 2 ? cs : (cls == 1 ? cl : cb);
                for (int c = 0; c < 3; ++c)
                    s.image.at(0, c, y, x) = col[c] + uniform(rng, -0.05, 0.05);
            }
        out.push_back(std::move(s));
    }
    return out;
}

OpResult cross_entropy_ohem(const Tensor& logits, const std::vector<LabelMap>& labels,
                            double topk_fraction) {
    const auto s = logits.shape();
    if (!(topk_fraction > 0.0 && topk_fraction <= 1.0))
        throw std::invalid_argument("cross_entropy_ohem: topk_fraction must be in (0,1]");
    if (labels.size() != s.n)
        throw std::invalid_argument("cross_entropy_ohem: batch size mismatch");
    for (const auto& lm : labels)
        if (lm.h != s.h || lm.w != s.w)
            throw std::invalid_argument("cross_entropy_ohem: label map size mismatch");

    const std::size_t npix = s.n * s.h * s.w;
    const std::size_t cls = s.c;
    std::vector<double> probs(npix * cls), loss(npix);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                const std::size_t i = (n * s.h + y) * s.w + x;
                const int lab = labels[n].at(y, x);
                if (lab < 0 || lab >= static_cast<int>(cls))
                    throw std::invalid_argument("cross_entropy_ohem: label out of range");
                double m = logits.at(n, 0, y, x);
                for (std::size_t c = 1; c < cls; ++c)
                    m = std::max(m, logits.at(n, c, y, x));
                double z = 0.0;
                for (std::size_t c = 0; c < cls; ++c) {
                    probs[i * cls + c] = std::exp(logits.at(n, c, y, x) - m);
                    z += probs[i * cls + c];
                }
                for (std::size_t c = 0; c < cls; ++c) probs[i * cls + c] /= z;
                loss[i] = -std::log(probs[i * cls + static_cast<std::size_t>(lab)]);
            }

    const std::size_t topk =
        static_cast<std::size_t>(std::ceil(topk_fraction * static_cast<double>(npix)));
    std::vector<std::size_t> order(npix);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&loss](std::size_t a, std::size_t b) {
        if (loss[a] != loss[b]) return loss[a] > loss[b];
        return a < b;
    });
    order.resize(topk);

    double total = 0.0;
    for (std::size_t i : order) total += loss[i];
    Tensor out(Shape4{1, 1, 1, 1});
    out[0] = total / static_cast<double>(topk);

    std::vector<LabelMap> lc = labels;
    auto backward = [s, cls, probs = std::move(probs), order, topk, lc](const Tensor& go) {
        Tensor gl(s);
        const double scale = go[0] / static_cast<double>(topk);
        for (std::size_t i : order) {
            const std::size_t n = i / (s.h * s.w);
            const std::size_t y = (i / s.w) % s.h;
            const std::size_t x = i % s.w;
            const int lab = lc[n].at(y, x);
            for (std::size_t c = 0; c < cls; ++c) {
                double g = probs[i * cls + c];
                if (static_cast<int>(c) == lab) g -= 1.0;
                gl.at(n, c, y, x) = g * scale;
            }
        }
        return std::vector<Tensor>{std::move(gl)};
    };
    return {std::move(out), std::move(backward)};
}

double poly_lr(double lr0, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) return lr0;
    const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * std::pow(frac, 0.9);
}

GaldConfig toy_head_config(GaKind ga, LdKind ld, std::size_t channels) {
    GaldConfig cfg;
    cfg.arrangement = Arrangement::gald;
    cfg.ga = default_ga_config(ga, std::max<std::size_t>(1, channels / 2));
    cfg.ga.psp_bins = {1, 2, 4};
    cfg.ld = ld;
    cfg.ldv1 = Ldv1Config{8, Ldv1Strategy::depthwise_conv, 3};
    cfg.ldv2 = Ldv2Config{5, 3, std::max<std::size_t>(1, channels / 2),
                          BorderMode::masked_softmax};
    return cfg;
}

namespace {

struct ToyModel {
    Tensor c1k, c1b, c2k, c2b, c3k, c3b, clsk, clsb;
    GaldParams head;

    std::vector<Tensor*> all_params() {
        std::vector<Tensor*> out{&c1k, &c1b, &c2k, &c2b, &c3k, &c3b};
        for (Tensor* t : head.all_params()) out.push_back(t);
        out.push_back(&clsk);
        out.push_back(&clsb);
        return out;
    }
};

ToyModel init_model(const TrainConfig& cfg) {
    const std::size_t F = cfg.feature_channels;
    ToyModel m;
    m.c1k = uniform_init({F, 3, 3, 3}, mix_seed(cfg.seed, 1), 27);
    m.c1b = uniform_init({1, F, 1, 1}, mix_seed(cfg.seed, 2), 27);
    m.c2k = uniform_init({F, F, 3, 3}, mix_seed(cfg.seed, 3), 9 * F);
    m.c2b = uniform_init({1, F, 1, 1}, mix_seed(cfg.seed, 4), 9 * F);
    m.c3k = uniform_init({F, F, 3, 3}, mix_seed(cfg.seed, 5), 9 * F);
    m.c3b = uniform_init({1, F, 1, 1}, mix_seed(cfg.seed, 6), 9 * F);
    m.head = gald_init(cfg.head, F, mix_seed(cfg.seed, 7));
    m.clsk = uniform_init({3, 2 * F, 1, 1}, mix_seed(cfg.seed, 8), 2 * F);
    m.clsb = uniform_init({1, 3, 1, 1}, mix_seed(cfg.seed, 9), 2 * F);
    return m;
}

struct ForwardGraph {
    Var logits;
    std::vector<Var> params;
};

ForwardGraph model_forward(ToyModel& m, const TrainConfig& cfg, const Tensor& images) {
    ForwardGraph fg;
    for (Tensor* t : m.all_params()) fg.params.push_back(make_leaf(*t));
    const std::size_t np = fg.params.size();
    Var x = make_leaf(images);
    ConvSpec pad1;
    pad1.pad = 1;
    ConvSpec pad1s2 = pad1;
    pad1s2.stride = 2;
    Var h = vsigmoid(vconv2d(x, fg.params[0], fg.params[1], pad1));
    h = vsigmoid(vconv2d(h, fg.params[2], fg.params[3], pad1));
    h = vsigmoid(vconv2d(h, fg.params[4], fg.params[5], pad1s2));
    std::vector<Var> head_params(fg.params.begin() + 6, fg.params.begin() + (np - 2));
    Var ho = build_gald(h, cfg.head, head_params, nullptr);
    Var logits = vconv2d(ho, fg.params[np - 2], fg.params[np - 1], ConvSpec{});
    const auto is = images.shape();
    fg.logits = vbilinear_upsample(logits, is.h, is.w);
    return fg;
}

LabelMap argmax_labels(const Tensor& logits) {
    const auto s = logits.shape();
    LabelMap lm{s.h, s.w, std::vector<int>(s.h * s.w, 0), std::nullopt};
    for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
            int best = 0;
            double bv = logits.at(0, 0, y, x);
            for (std::size_t c = 1; c < s.c; ++c)
                if (logits.at(0, c, y, x) > bv) {
                    bv = logits.at(0, c, y, x);
                    best = static_cast<int>(c);
                }
            lm.at(y, x) = best;
        }
    return lm;
}

void evaluate(ToyModel& m, const TrainConfig& cfg, const std::vector<SynthSample>& eval_set,
              TrainReport& report) {
    const std::vector<std::size_t> slacks{3, 5, 9, 12};
    double miou_sum = 0.0;
    std::map<std::size_t, double> f_sum;
    for (std::size_t s : slacks) f_sum[s] = 0.0;
    for (const auto& sample : eval_set) {
        ForwardGraph fg = model_forward(m, cfg, sample.image);
        LabelMap pred = argmax_labels(fg.logits->value);
        miou_sum += miou(pred, sample.labels, 3).miou;
        for (std::size_t s : slacks) {
            const double f1 = boundary_fscore(pred, sample.labels, 1, s);
            const double f2 = boundary_fscore(pred, sample.labels, 2, s);
            f_sum[s] += 0.5 * (f1 + f2);
        }
    }
    const double n = static_cast<double>(eval_set.size());
    report.final_miou = miou_sum / n;
    for (std::size_t s : slacks) report.boundary_f[s] = f_sum[s] / n;
}

}  // namespace

TrainReport train_toy(const TrainConfig& cfg) {
    if (cfg.lr <= 0) throw std::invalid_argument("train_toy: lr must be positive");
    if (cfg.batch == 0) throw std::invalid_argument("train_toy: batch must be positive");
    const std::size_t hw = cfg.image_size;
    auto train_set = synth_dataset(cfg.seed, cfg.samples, hw, hw);
    auto eval_set = synth_dataset(mix_seed(cfg.seed, 0xe7a1), cfg.eval_samples, hw, hw);

    ToyModel model = init_model(cfg);
    std::vector<Tensor*> params = model.all_params();
    std::vector<Tensor> momentum;
    for (Tensor* p : params) momentum.push_back(Tensor::zeros(p->shape()));

    TrainReport report;
    report.seed = cfg.seed;

    const std::size_t steps_per_epoch = cfg.samples / cfg.batch;
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !report.diverged; ++epoch) {
        std::vector<std::size_t> order(cfg.samples);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5bf0 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t b = 0; b + cfg.batch <= cfg.samples && !report.diverged;
             b += cfg.batch) {
            Tensor images(Shape4{cfg.batch, 3, hw, hw});
            std::vector<LabelMap> labels;
            for (std::size_t i = 0; i < cfg.batch; ++i) {
                const auto& s = train_set[order[b + i]];
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t y = 0; y < hw; ++y)
                        for (std::size_t x = 0; x < hw; ++x)
                            images.at(i, c, y, x) = s.image.at(0, c, y, x);
                labels.push_back(s.labels);
            }
            ForwardGraph fg = model_forward(model, cfg, images);
            Var loss = make_node(
                cross_entropy_ohem(fg.logits->value, labels, cfg.ohem_topk_fraction),
                {fg.logits});
            const double loss_val = loss->value[0];
            report.loss_curve.push_back(loss_val);
            if (!std::isfinite(loss_val)) {
                report.diverged = true;
                break;
            }
            run_backward(loss, Tensor::ones(Shape4{1, 1, 1, 1}));
            const double lr_t = poly_lr(cfg.lr, step, total_steps);
            for (std::size_t i = 0; i < params.size(); ++i) {
                Tensor g = grad_of(fg.params[i]);
                Tensor& buf = momentum[i];
                Tensor& p = *params[i];
                for (std::size_t j = 0; j < p.numel(); ++j) {
                    buf[j] = 0.9 * buf[j] + g[j];
                    p[j] -= lr_t * buf[j];
                }
            }
            ++step;
        }
    }
    if (!report.diverged) evaluate(model, cfg, eval_set, report);
    return report;
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["diverged"] = diverged;
    j["final_miou"] = final_miou;
    nlohmann::json bf = nlohmann::json::object();
    for (const auto& [slack, f] : boundary_f) bf[std::to_string(slack)] = f;
    j["boundary_f"] = bf;
    j["loss_curve"] = loss_curve;
    return j.dump(2);
}

}  // namespace gald
