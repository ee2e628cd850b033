#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gald/nn_ops.hpp"

namespace gald {
namespace oracles {

/// Explicit N x N affinity with row softmax, scalar loops throughout. The
/// projections theta/phi/g are (C',C,1,1) kernels applied as 1x1 convs.
/// Refuses N = h*w > 64. Output is (n, C', h, w).
Tensor dense_attention_oracle(const Tensor& x, const Tensor& theta, const Tensor& phi,
                              const Tensor& g);

/// Six-nested-loop direct convolution; same conventions as conv2d
/// (cross-correlation, zero padding) but no shared code with it.
Tensor naive_conv_oracle(const Tensor& x, const ConvWeights& w);

/// Central differences (f(x+eps e_i) - f(x-eps e_i)) / 2eps per element.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

struct TensorGradReport {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t argmax = 0;
};

struct GradReport {
    std::vector<TensorGradReport> per_tensor;
    double max_rel_err = 0.0;
    bool pass(double tol) const { return max_rel_err < tol; }
};

/// Checks an op's analytic backward against finite differences of the summed
/// output (upstream gradient of ones), for every tensor argument. The op maps
/// the argument list to an OpResult whose backward returns grads in the same
/// order. Relative error uses denominator max(1, |fd|, |analytic|).
GradReport gradcheck(const std::function<OpResult(const std::vector<Tensor>&)>& op,
                     const std::vector<Tensor>& args, double eps = 1e-5,
                     const std::vector<std::string>& names = {});

}  // namespace oracles
}  // namespace gald
