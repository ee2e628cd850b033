#include "gald/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace gald {

namespace {

std::size_t checked_mul(std::size_t a, std::size_t b) {
    std::size_t r;
    if (__builtin_mul_overflow(a, b, &r)) {
        throw std::invalid_argument("Shape4: element count overflows size_t");
    }
    return r;
}

}  // namespace

std::size_t Shape4::numel() const {
    return checked_mul(checked_mul(n, c), checked_mul(h, w));
}

std::string Shape4::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape4 s, std::vector<double> data) : shape_(s), data_(std::move(data)) {
    if (data_.size() != s.numel()) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + s.str());
    }
}

Tensor Tensor::constant(Shape4 s, double v) {
    Tensor t(s);
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::seeded_uniform(Shape4 s, std::uint64_t seed, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("seeded_uniform: lo must be < hi");
    Tensor t(s);
    // mt19937_64 with an explicit bits->double mapping so the stream is
    // bit-identical across platforms and standard library versions.
    std::mt19937_64 rng(seed);
    for (auto& x : t.data_) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = lo + u * (hi - lo);
    }
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

Tensor Tensor::reshaped(Shape4 s) const {
    if (s.numel() != data_.size()) {
        throw std::invalid_argument("reshaped: element count mismatch " + shape_.str() +
                                    " -> " + s.str());
    }
    Tensor t;
    t.shape_ = s;
    t.data_ = data_;
    return t;
}

bool approx_eq(const Tensor& a, const Tensor& b, double rtol, double atol) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument("approx_eq: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (!(std::fabs(a[i] - b[i]) <= atol + rtol * std::fabs(b[i]))) return false;
    }
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

namespace {

constexpr char kMagic[8] = {'G', 'A', 'L', 'D', 'T', 'N', 'S', '1'};

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save(const Tensor& t, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save: cannot open " + path.string());
    os.write(kMagic, 8);
    const auto& s = t.shape();
    put_u32_le(os, static_cast<std::uint32_t>(s.n));
    put_u32_le(os, static_cast<std::uint32_t>(s.c));
    put_u32_le(os, static_cast<std::uint32_t>(s.h));
    put_u32_le(os, static_cast<std::uint32_t>(s.w));
    for (double x : t.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
    if (!os) throw std::runtime_error("save: write failed for " + path.string());
}

Tensor load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("load: bad magic in " + path.string());
    }
    Shape4 s;
    s.n = get_u32_le(is);
    s.c = get_u32_le(is);
    s.h = get_u32_le(is);
    s.w = get_u32_le(is);
    if (!is) throw std::runtime_error("load: truncated header in " + path.string());
    std::size_t count = s.numel();
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        if (!is) {
            throw std::runtime_error("load: payload shorter than header claims in " +
                                     path.string());
        }
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        double x;
        std::memcpy(&x, &bits, 8);
        data[i] = x;
    }
    return Tensor(s, std::move(data));
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw std::invalid_argument("concat_channels: spatial/batch mismatch " + sa.str() +
                                    " vs " + sb.str());
    }
    Tensor out(Shape4{sa.n, sa.c + sb.c, sa.h, sa.w});
    for (std::size_t n = 0; n < sa.n; ++n) {
        for (std::size_t c = 0; c < sa.c; ++c)
            for (std::size_t y = 0; y < sa.h; ++y)
                for (std::size_t x = 0; x < sa.w; ++x) out.at(n, c, y, x) = a.at(n, c, y, x);
        for (std::size_t c = 0; c < sb.c; ++c)
            for (std::size_t y = 0; y < sa.h; ++y)
                for (std::size_t x = 0; x < sa.w; ++x)
                    out.at(n, sa.c + c, y, x) = b.at(n, c, y, x);
    }
    return out;
}

Tensor slice_channels(const Tensor& t, std::size_t c0, std::size_t c1) {
    const auto& s = t.shape();
    if (c0 > c1 || c1 > s.c) throw std::invalid_argument("slice_channels: bad range");
    Tensor out(Shape4{s.n, c1 - c0, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = c0; c < c1; ++c)
            for (std::size_t y = 0; y < s.h; ++y)
                for (std::size_t x = 0; x < s.w; ++x)
                    out.at(n, c - c0, y, x) = t.at(n, c, y, x);
    return out;
}

}  // namespace gald
