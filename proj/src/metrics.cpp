#include "gald/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gald {

namespace {

void check_dims(const LabelMap& a, const LabelMap& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("label maps differ in size");
    if (a.labels.size() != a.h * a.w || b.labels.size() != b.h * b.w)
        throw std::invalid_argument("label map data length mismatch");
}

std::vector<std::uint8_t> boundary_pixels(const LabelMap& m, int class_id) {
    std::vector<std::uint8_t> out(m.h * m.w, 0);
    for (std::size_t y = 0; y < m.h; ++y)
        for (std::size_t x = 0; x < m.w; ++x) {
            const bool in = m.at(y, x) == class_id;
            bool boundary = false;
            if (y > 0 && (m.at(y - 1, x) == class_id) != in) boundary = true;
            if (!boundary && y + 1 < m.h && (m.at(y + 1, x) == class_id) != in) boundary = true;
            if (!boundary && x > 0 && (m.at(y, x - 1) == class_id) != in) boundary = true;
            if (!boundary && x + 1 < m.w && (m.at(y, x + 1) == class_id) != in) boundary = true;
            out[y * m.w + x] = boundary ? 1 : 0;
        }
    return out;
}

double matched_fraction(const std::vector<std::uint8_t>& from,
                        const std::vector<std::uint8_t>& to, std::size_t h, std::size_t w,
                        std::size_t slack) {
    std::size_t total = 0, matched = 0;
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(slack);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!from[y * w + x]) continue;
            ++total;
            bool hit = false;
            for (std::ptrdiff_t dy = -s; dy <= s && !hit; ++dy) {
                const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + dy;
                if (ny < 0 || ny >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::ptrdiff_t dx = -s; dx <= s; ++dx) {
                    const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (nx < 0 || nx >= static_cast<std::ptrdiff_t>(w)) continue;
                    if (to[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)]) {
                        hit = true;
                        break;
                    }
                }
            }
            if (hit) ++matched;
        }
    if (total == 0) return -1.0;  // no boundary pixels on this side
    return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace

MiouResult miou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
    check_dims(pred, gt);
    if (num_classes <= 0) throw std::invalid_argument("miou: num_classes must be positive");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    std::vector<bool> present(num_classes, false);
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const int p = pred.labels[i], g = gt.labels[i];
        if (gt.ignore_index && g == *gt.ignore_index) continue;
        if (pred.ignore_index && p == *pred.ignore_index) continue;
        if (g < 0 || g >= num_classes || p < 0 || p >= num_classes)
            throw std::invalid_argument("miou: label out of range");
        present[g] = present[p] = true;
        if (p == g) {
            ++tp[g];
        } else {
            ++fp[p];
            ++fn[g];
        }
    }
    MiouResult r;
    r.per_class.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
    r.class_present.assign(present.begin(), present.end());
    double sum = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (!present[c]) continue;
        const std::size_t denom = tp[c] + fp[c] + fn[c];
        r.per_class[c] = denom == 0 ? 0.0
                                    : static_cast<double>(tp[c]) / static_cast<double>(denom);
        sum += r.per_class[c];
        ++count;
    }
    r.miou = count == 0 ? 0.0 : sum / static_cast<double>(count);
    return r;
}

double boundary_fscore(const LabelMap& pred, const LabelMap& gt, int class_id,
                       std::size_t slack_px) {
    check_dims(pred, gt);
    const auto pb = boundary_pixels(pred, class_id);
    const auto gb = boundary_pixels(gt, class_id);
    const double precision = matched_fraction(pb, gb, pred.h, pred.w, slack_px);
    const double recall = matched_fraction(gb, pb, pred.h, pred.w, slack_px);
    if (precision < 0 && recall < 0) return 1.0;  // both boundary sets empty
    if (precision < 0 || recall < 0) return 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace gald
