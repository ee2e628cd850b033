#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gald {

/// Rank-4 NCHW shape. Construction checks that the element count fits in
/// size_t without overflow.
struct Shape4 {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const;
    bool operator==(const Shape4& o) const = default;
    std::string str() const;
};

/// Dense rank-4 tensor of doubles, row-major NCHW. Treated as an immutable
/// value by all library ops; mutation is only used while filling a fresh
/// tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape4 s) : shape_(s), data_(s.numel(), 0.0) {}
    Tensor(Shape4 s, std::vector<double> data);

    static Tensor zeros(Shape4 s) { return Tensor(s); }
    static Tensor ones(Shape4 s) { return constant(s, 1.0); }
    static Tensor constant(Shape4 s, double v);
    static Tensor seeded_uniform(Shape4 s, std::uint64_t seed, double lo, double hi);

    const Shape4& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }

    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;

    /// Same data, new shape; numel must match.
    Tensor reshaped(Shape4 s) const;

private:
    Shape4 shape_{};
    std::vector<double> data_;
};

/// True iff shapes match and |a-b| <= atol + rtol*|b| element-wise.
bool approx_eq(const Tensor& a, const Tensor& b, double rtol, double atol);

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Binary format: 8-byte magic "GALDTNS1", four little-endian u32 dims,
/// then little-endian IEEE-754 doubles. Round-trips bit-exactly.
void save(const Tensor& t, const std::filesystem::path& path);
Tensor load(const std::filesystem::path& path);

/// Channel concat; a's channels first. n/h/w must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Channels [c0, c1) of t.
Tensor slice_channels(const Tensor& t, std::size_t c0, std::size_t c1);

}  // namespace gald
