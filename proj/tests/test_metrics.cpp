#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gald/metrics.hpp"

using namespace gald;

namespace {

LabelMap map_from(std::size_t h, std::size_t w, std::vector<int> labels,
                  std::optional<int> ignore = std::nullopt) {
    LabelMap m;
    m.h = h;
    m.w = w;
    m.labels = std::move(labels);
    m.ignore_index = ignore;
    return m;
}

LabelMap random_map(std::size_t h, std::size_t w, int num_classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LabelMap m;
    m.h = h;
    m.w = w;
    m.labels.resize(h * w);
    for (auto& l : m.labels) l = int(rng() % std::uint64_t(num_classes));
    return m;
}

// Reference boundary extraction + slack matching, written independently of
// the library version: brute-force over all pixel pairs.
double brute_force_bf(const LabelMap& pred, const LabelMap& gt, int cls, std::size_t slack) {
    auto boundary = [&](const LabelMap& m) {
        std::vector<std::pair<long, long>> pts;
        for (long y = 0; y < long(m.h); ++y)
            for (long x = 0; x < long(m.w); ++x) {
                const bool in = m.at(y, x) == cls;
                bool b = false;
                const long dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const long ny = y + dy[d], nx = x + dx[d];
                    if (ny < 0 || nx < 0 || ny >= long(m.h) || nx >= long(m.w)) continue;
                    if ((m.at(ny, nx) == cls) != in) b = true;
                }
                if (b) pts.emplace_back(y, x);
            }
        return pts;
    };
    auto bp = boundary(pred), bg = boundary(gt);
    if (bp.empty() && bg.empty()) return 1.0;
    if (bp.empty() || bg.empty()) return 0.0;
    auto matched = [&](const std::vector<std::pair<long, long>>& a,
                       const std::vector<std::pair<long, long>>& b) {
        std::size_t n = 0;
        for (auto& p : a) {
            bool hit = false;
            for (auto& q : b)
                if (std::max(std::labs(p.first - q.first), std::labs(p.second - q.second)) <=
                    long(slack))
                    hit = true;
            if (hit) ++n;
        }
        return double(n) / double(a.size());
    };
    const double precision = matched(bp, bg);
    const double recall = matched(bg, bp);
    if (precision + recall == 0) return 0.0;
    return 2 * precision * recall / (precision + recall);
}

}  // namespace

TEST_CASE("miou: perfect prediction scores 1") {
    LabelMap gt = random_map(8, 8, 3, 1);
    MiouResult r = miou(gt, gt, 3);
    CHECK(r.miou == 1.0);
    for (int c = 0; c < 3; ++c)
        if (r.class_present[c]) CHECK(r.per_class[c] == 1.0);
}

TEST_CASE("miou: fully disjoint prediction scores 0") {
    LabelMap gt = map_from(2, 2, {0, 0, 0, 0});
    LabelMap pred = map_from(2, 2, {1, 1, 1, 1});
    MiouResult r = miou(pred, gt, 2);
    CHECK(r.miou == 0.0);
}

TEST_CASE("miou hand case: 7/12") {
    // 2x2, classes {0,1}: gt = [0,0,1,1], pred = [0,1,1,1]
    // class 0: TP=1 FP=0 FN=1 -> 1/2; class 1: TP=2 FP=1 FN=0 -> 2/3
    // mean = (1/2 + 2/3)/2 = 7/12
    LabelMap gt = map_from(2, 2, {0, 0, 1, 1});
    LabelMap pred = map_from(2, 2, {0, 1, 1, 1});
    MiouResult r = miou(pred, gt, 2);
    CHECK(r.miou == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
    CHECK(r.per_class[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.per_class[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("miou: absent classes are excluded from the mean") {
    LabelMap gt = map_from(2, 2, {0, 0, 1, 1});
    LabelMap pred = map_from(2, 2, {0, 0, 1, 1});
    MiouResult r = miou(pred, gt, 5);
    CHECK(r.miou == 1.0);
    for (int c = 2; c < 5; ++c) {
        CHECK_FALSE(r.class_present[c]);
        CHECK(std::isnan(r.per_class[c]));
    }
}

TEST_CASE("miou: ignore index removes pixels from every tally") {
    LabelMap gt = map_from(2, 2, {0, 255, 1, 1}, 255);
    LabelMap pred = map_from(2, 2, {0, 1, 0, 1}, 255);
    // counted pixels: (0,0) both 0; (1,0) gt 1 pred 0; (1,1) both 1
    // class 0: TP=1 FP=1 FN=0 -> 1/2; class 1: TP=1 FP=0 FN=1 -> 1/2
    MiouResult r = miou(pred, gt, 2);
    CHECK(r.miou == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("miou rejects mismatched shapes") {
    LabelMap a = map_from(2, 2, {0, 0, 0, 0});
    LabelMap b = map_from(1, 4, {0, 0, 0, 0});
    CHECK_THROWS_AS(miou(a, b, 2), std::invalid_argument);
}

TEST_CASE("boundary F: identical maps score 1, including the empty class") {
    LabelMap gt = random_map(8, 8, 2, 2);
    CHECK(boundary_fscore(gt, gt, 0, 3) == 1.0);
    CHECK(boundary_fscore(gt, gt, 1, 3) == 1.0);
    // class 5 absent from both: no boundary on either side
    CHECK(boundary_fscore(gt, gt, 5, 3) == 1.0);
}

TEST_CASE("boundary F: one empty boundary scores 0") {
    LabelMap gt = map_from(4, 4, std::vector<int>(16, 0));
    LabelMap pred = gt;
    pred.at(1, 1) = 1;
    // class 1 has boundary pixels in pred only
    CHECK(boundary_fscore(pred, gt, 1, 3) == 0.0);
}

TEST_CASE("boundary F: 1-pixel shift is forgiven at slack 3") {
    auto rect = [](std::size_t x0) {
        LabelMap m = map_from(8, 8, std::vector<int>(64, 0));
        for (std::size_t y = 2; y < 6; ++y)
            for (std::size_t x = x0; x < x0 + 3; ++x) m.at(y, x) = 1;
        return m;
    };
    LabelMap gt = rect(2), pred = rect(3);
    CHECK(boundary_fscore(pred, gt, 1, 3) == 1.0);
    CHECK(boundary_fscore(pred, gt, 1, 0) < 1.0);
}

TEST_CASE("boundary F matches the brute-force reference") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        LabelMap pred = random_map(7, 9, 3, seed * 2 + 100);
        LabelMap gt = random_map(7, 9, 3, seed * 2 + 101);
        for (std::size_t slack : {0, 1, 3, 5}) {
            const double want = brute_force_bf(pred, gt, 1, slack);
            CHECK(boundary_fscore(pred, gt, 1, slack) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("boundary F is monotone in the slack") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        LabelMap pred = random_map(6, 6, 2, seed * 2 + 500);
        LabelMap gt = random_map(6, 6, 2, seed * 2 + 501);
        double prev = -1;
        for (std::size_t slack : {0, 1, 2, 3, 5, 9, 12}) {
            const double f = boundary_fscore(pred, gt, 1, slack);
            CHECK(f >= prev);
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
            prev = f;
        }
    }
}

TEST_CASE("boundary F is invariant to relabeling the other classes") {
    LabelMap pred = random_map(8, 8, 3, 600);
    LabelMap gt = random_map(8, 8, 3, 601);
    const double base = boundary_fscore(pred, gt, 1, 2);
    LabelMap pred2 = pred, gt2 = gt;
    for (auto& l : pred2.labels)
        if (l != 1) l = (l == 0) ? 7 : 0;
    for (auto& l : gt2.labels)
        if (l != 1) l = (l == 0) ? 7 : 0;
    CHECK(boundary_fscore(pred2, gt2, 1, 2) == base);
}

TEST_CASE("boundary F is symmetric in pred and gt") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        LabelMap a = random_map(6, 8, 2, seed + 700);
        LabelMap b = random_map(6, 8, 2, seed + 800);
        CHECK(boundary_fscore(a, b, 1, 2) == boundary_fscore(b, a, 1, 2));
    }
}
