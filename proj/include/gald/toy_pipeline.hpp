#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gald/ld_modules.hpp"
#include "gald/metrics.hpp"

namespace gald {

struct SynthSample {
    Tensor image;  // (1,3,h,w)
    LabelMap labels;  // classes: 0 background, 1 large rectangle, 2 small square
};

/// Deterministic per seed. Every sample has one large rectangle (area >= 25%
/// of the image), one small square (side <= h/8), non-overlapping.
std::vector<SynthSample> synth_dataset(std::uint64_t seed, std::size_t count,
                                       std::size_t h, std::size_t w);

/// Softmax cross-entropy per pixel; only the ceil(topk_fraction * n_pixels)
/// highest-loss pixels receive gradient, ties broken by lowest flat index.
/// Loss is the mean over the selected pixels. Returns (1,1,1,1) scalar;
/// backward grad: {d_logits}.
OpResult cross_entropy_ohem(const Tensor& logits, const std::vector<LabelMap>& labels,
                            double topk_fraction);

/// lr0 * (1 - t/T)^0.9
double poly_lr(double lr0, std::size_t step, std::size_t total_steps);

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t epochs = 2;
    double lr = 0.2;
    std::size_t batch = 4;
    double ohem_topk_fraction = 0.25;
    std::size_t samples = 200;
    std::size_t eval_samples = 16;
    std::size_t image_size = 64;
    std::size_t feature_channels = 8;
    GaldConfig head;
};

struct TrainReport {
    std::uint64_t seed = 0;
    bool diverged = false;
    double final_miou = 0.0;
    std::map<std::size_t, double> boundary_f;  // slack (px) -> mean F over classes 1,2
    std::vector<double> loss_curve;
    std::string to_json() const;
};

/// Backbone (two 3x3 convs + one stride-2 conv, sigmoid activations) + GALD
/// head + 1x1 classifier, trained with SGD momentum 0.9 and poly lr decay.
TrainReport train_toy(const TrainConfig& cfg);

/// Head config helpers for the ablation runs.
GaldConfig toy_head_config(GaKind ga, LdKind ld, std::size_t channels);

}  // namespace gald
