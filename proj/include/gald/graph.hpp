#pragma once

#include <memory>
#include <vector>

#include "gald/nn_ops.hpp"

namespace gald {

/// Thin define-by-run graph over the primitive ops. Composite modules build
/// their forward through Var nodes; the returned BackwardFn replays the tape
/// in reverse with a fixed accumulation order, so results are reproducible.
struct Node {
    Tensor value;
    Tensor grad;
    bool grad_set = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn back;  // null for leaves

    void accumulate(const Tensor& g);
};

using Var = std::shared_ptr<Node>;

Var make_leaf(Tensor value);

/// Wraps a primitive result as a graph node.
Var make_node(OpResult r, std::vector<Var> parents);

/// Runs reverse-mode accumulation from root seeded with `seed`. Leaf grads
/// land in node->grad (zero tensor if the leaf was unreachable).
void run_backward(const Var& root, const Tensor& seed);

/// Grad of a node after run_backward; zeros if nothing reached it.
Tensor grad_of(const Var& v);

// Var-level wrappers around the primitives.
Var vconv2d(const Var& x, const Var& kernel, const Var& bias, ConvSpec spec);  // bias may be null
Var vbilinear_resize(const Var& x, std::size_t oh, std::size_t ow);
Var vbilinear_upsample(const Var& x, std::size_t oh, std::size_t ow);
Var vavg_pool_adaptive2(const Var& x, std::size_t bh, std::size_t bw);
Var vsigmoid(const Var& x);
Var vsoftmax_lastdim(const Var& x);
Var vbatched_matmul(const Var& a, const Var& b, MacCounter* mc = nullptr);
Var vtranspose_last2(const Var& x);
Var vadd(const Var& a, const Var& b);
Var vmul(const Var& a, const Var& b);
Var vscale(const Var& x, double s);
Var vconcat_channels(const Var& a, const Var& b);
Var vslice_channels(const Var& x, std::size_t c0, std::size_t c1);
Var vreshape(const Var& x, Shape4 s);
Var vsum(const Var& x);

}  // namespace gald
