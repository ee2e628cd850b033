#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gald/nn_ops.hpp"

namespace gald {
namespace bench {

enum class Method { nonlocal, crisscross, ldv2 };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Closed-form MAC model for the affinity stage (logits + aggregation):
///   nonlocal   2*C'*N^2
///   crisscross 2*C'*N*(h+w-1)   (comparison line only, no kernel here)
///   ldv2       2*C'*N*k^2
std::uint64_t flop_model(Method m, std::size_t h, std::size_t w, std::size_t c_reduced,
                         std::size_t k);

struct BenchRecord {
    std::string method;
    std::size_t h = 0, w = 0, c_reduced = 0, k = 0, r = 0;
    std::uint64_t mac_count = 0;
    std::uint64_t wall_ns = 0;  // median of >= 5 timed runs; 0 for model-only methods
    std::int64_t timestamp_ms = 0;
};

struct SweepConfig {
    std::size_t c_reduced = 16;
    std::size_t k = 5;
    std::size_t r = 1;
    std::size_t warmup_runs = 2;
    std::size_t timed_runs = 5;
    std::uint64_t seed = 42;
    std::size_t max_positions = 1 << 16;  // memory ceiling: rejects N above this
};

/// Runs each method at each (h,w): seeds fixed inputs, reads the MacCounter,
/// and reports the median wall time. Sizes must be sorted ascending.
std::vector<BenchRecord> run_sweep(const std::vector<Method>& methods,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                   const SweepConfig& cfg);

struct ScalingFit {
    double exponent = 0.0;     // b in t ~ a * N^b
    double coefficient = 0.0;  // a
    double r_squared = 0.0;
};

/// Least squares on (ln N, ln wall_ns) over the records of one method.
ScalingFit fit_exponent(const std::vector<BenchRecord>& records);

/// CSV with header: method,h,w,c_reduced,k,r,mac_count,wall_ns
std::string to_csv(const std::vector<BenchRecord>& records);

}  // namespace bench
}  // namespace gald
