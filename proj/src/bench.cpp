#include "gald/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gald/ld_modules.hpp"

namespace gald {
namespace bench {

std::string method_name(Method m) {
    switch (m) {
        case Method::nonlocal: return "nonlocal";
        case Method::crisscross: return "crisscross";
        case Method::ldv2: return "ldv2";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "nonlocal") return Method::nonlocal;
    if (name == "crisscross") return Method::crisscross;
    if (name == "ldv2") return Method::ldv2;
    throw std::invalid_argument("unknown method: " + name);
}

std::uint64_t flop_model(Method m, std::size_t h, std::size_t w, std::size_t c_reduced,
                         std::size_t k) {
    const std::uint64_t N = static_cast<std::uint64_t>(h) * w;
    switch (m) {
        case Method::nonlocal: return 2 * c_reduced * N * N;
        case Method::crisscross: return 2 * c_reduced * N * (h + w - 1);
        case Method::ldv2: return 2 * c_reduced * N * k * k;
    }
    return 0;
}

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

// Dense affinity attention on precomputed q/k/v maps, forward only.
void dense_kernel(const Tensor& q, const Tensor& k, const Tensor& v, MacCounter* mc) {
    const auto s = q.shape();
    const std::size_t N = s.h * s.w, Cr = s.c;
    Tensor qm = q.reshaped(Shape4{s.n, 1, Cr, N});
    Tensor km = k.reshaped(Shape4{s.n, 1, Cr, N});
    Tensor vm = v.reshaped(Shape4{s.n, 1, Cr, N});
    Tensor qt = transpose_last2(qm).value;  // (n,1,N,Cr)
    Tensor logits = batched_matmul(qt, km, mc).value;  // (n,1,N,N)
    Tensor aff = softmax_lastdim(logits).value;
    Tensor vt = transpose_last2(vm).value;  // (n,1,N,Cr)
    volatile double sink = batched_matmul(aff, vt, mc).value[0];
    (void)sink;
}

void local_kernel(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t ksize,
                  std::size_t r, MacCounter* mc) {
    volatile double sink =
        local_attention(q, k, v, ksize, r, BorderMode::masked_softmax, mc).value[0];
    (void)sink;
}

}  // namespace

std::vector<BenchRecord> run_sweep(
    const std::vector<Method>& methods,
    const std::vector<std::pair<std::size_t, std::size_t>>& sizes, const SweepConfig& cfg) {
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i - 1].first * sizes[i - 1].second > sizes[i].first * sizes[i].second)
            throw std::invalid_argument("run_sweep: sizes must be sorted ascending");
    if (cfg.timed_runs < 5) throw std::invalid_argument("run_sweep: need >= 5 timed runs");

    std::vector<BenchRecord> out;
    for (Method m : methods) {
        for (auto [h, w] : sizes) {
            const std::size_t N = h * w;
            if (N > cfg.max_positions)
                throw std::invalid_argument("run_sweep: size exceeds memory ceiling");
            BenchRecord rec;
            rec.method = method_name(m);
            rec.h = h;
            rec.w = w;
            rec.c_reduced = cfg.c_reduced;
            rec.k = cfg.k;
            rec.r = cfg.r;
            rec.timestamp_ms = static_cast<std::int64_t>(
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count());
            if (m == Method::crisscross) {
                rec.mac_count = flop_model(m, h, w, cfg.c_reduced, cfg.k);
                rec.wall_ns = 0;
                out.push_back(rec);
                continue;
            }
            const Shape4 s{1, cfg.c_reduced, h, w};
            Tensor q = Tensor::seeded_uniform(s, cfg.seed + 1, -1, 1);
            Tensor k = Tensor::seeded_uniform(s, cfg.seed + 2, -1, 1);
            Tensor v = Tensor::seeded_uniform(s, cfg.seed + 3, -1, 1);
            auto run = [&](MacCounter* mc) {
                if (m == Method::nonlocal) dense_kernel(q, k, v, mc);
                else local_kernel(q, k, v, cfg.k, cfg.r, mc);
            };
            MacCounter mc;
            run(&mc);  // counted run doubles as first warmup
            rec.mac_count = mc.macs;
            for (std::size_t i = 1; i < cfg.warmup_runs; ++i) run(nullptr);
            std::vector<std::uint64_t> times;
            for (std::size_t i = 0; i < cfg.timed_runs; ++i) {
                const std::uint64_t t0 = now_ns();
                run(nullptr);
                times.push_back(now_ns() - t0);
            }
            std::sort(times.begin(), times.end());
            rec.wall_ns = times[times.size() / 2];
            out.push_back(rec);
        }
    }
    return out;
}

ScalingFit fit_exponent(const std::vector<BenchRecord>& records) {
    if (records.size() < 4) throw std::invalid_argument("fit_exponent: need >= 4 records");
    std::vector<double> xs, ys;
    for (const auto& r : records) {
        const double N = static_cast<double>(r.h) * static_cast<double>(r.w);
        if (r.wall_ns == 0) throw std::invalid_argument("fit_exponent: zero wall time");
        xs.push_back(std::log(N));
        ys.push_back(std::log(static_cast<double>(r.wall_ns)));
    }
    double minx = xs[0], maxx = xs[0];
    for (double x : xs) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
    }
    if (minx == maxx) throw std::invalid_argument("fit_exponent: degenerate sizes");

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double a = (sy - b * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = a + b * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
    }
    ScalingFit fit;
    fit.exponent = b;
    fit.coefficient = std::exp(a);
    fit.r_squared = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

std::string to_csv(const std::vector<BenchRecord>& records) {
    std::ostringstream os;
    os << "method,h,w,c_reduced,k,r,mac_count,wall_ns\n";
    for (const auto& r : records)
        os << r.method << ',' << r.h << ',' << r.w << ',' << r.c_reduced << ',' << r.k << ','
           << r.r << ',' << r.mac_count << ',' << r.wall_ns << '\n';
    return os.str();
}

}  // namespace bench
}  // namespace gald
