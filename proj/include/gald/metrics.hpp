#pragma once

#include <optional>
#include <vector>

#include "gald/tensor.hpp"

namespace gald {

struct LabelMap {
    std::size_t h = 0, w = 0;
    std::vector<int> labels;  // row-major, h*w entries
    std::optional<int> ignore_index;

    int at(std::size_t y, std::size_t x) const { return labels[y * w + x]; }
    int& at(std::size_t y, std::size_t x) { return labels[y * w + x]; }
};

struct MiouResult {
    double miou = 0.0;
    std::vector<double> per_class;      // NaN for classes absent from both maps
    std::vector<bool> class_present;    // present in gt or pred
};

/// Per-class IoU = TP/(TP+FP+FN), averaged over classes present in either
/// map; ignore-index pixels are excluded entirely.
MiouResult miou(const LabelMap& pred, const LabelMap& gt, int num_classes);

/// Boundary F-score for one class at a Chebyshev pixel slack. A pixel is
/// boundary iff any in-bounds 4-neighbor differs in class-mask membership.
/// F = 2PR/(P+R); both boundaries empty -> 1, exactly one empty -> 0.
double boundary_fscore(const LabelMap& pred, const LabelMap& gt, int class_id,
                       std::size_t slack_px);

}  // namespace gald
