#include "gald/graph.hpp"

#include <unordered_set>

namespace gald {

void Node::accumulate(const Tensor& g) {
    if (!grad_set) {
        grad = g;
        grad_set = true;
    } else {
        for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] += g[i];
    }
}

Var make_leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var make_node(OpResult r, std::vector<Var> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(r.value);
    n->back = std::move(r.backward);
    n->parents = std::move(parents);
    return n;
}

namespace {

void topo(const Var& v, std::unordered_set<Node*>& seen, std::vector<Var>& order) {
    if (seen.count(v.get())) return;
    seen.insert(v.get());
    for (const auto& p : v->parents) topo(p, seen, order);
    order.push_back(v);
}

}  // namespace

void run_backward(const Var& root, const Tensor& seed) {
    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo(root, seen, order);
    for (auto& n : order) {
        n->grad_set = false;
        n->grad = Tensor();
    }
    root->accumulate(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = it->get();
        if (!n->back || n->parents.empty()) continue;
        if (!n->grad_set) continue;  // branch not reached by the seed
        std::vector<Tensor> pg = n->back(n->grad);
        if (pg.size() != n->parents.size())
            throw std::logic_error("run_backward: backward arity mismatch");
        for (std::size_t i = 0; i < pg.size(); ++i) n->parents[i]->accumulate(pg[i]);
    }
}

Tensor grad_of(const Var& v) {
    return v->grad_set ? v->grad : Tensor::zeros(v->value.shape());
}

Var vconv2d(const Var& x, const Var& kernel, const Var& bias, ConvSpec spec) {
    ConvWeights w;
    w.kernel = kernel->value;
    if (bias) w.bias = bias->value;
    w.spec = spec;
    std::vector<Var> parents{x, kernel};
    if (bias) parents.push_back(bias);
    return make_node(conv2d(x->value, w), std::move(parents));
}

Var vbilinear_resize(const Var& x, std::size_t oh, std::size_t ow) {
    return make_node(bilinear_resize(x->value, oh, ow), {x});
}

Var vbilinear_upsample(const Var& x, std::size_t oh, std::size_t ow) {
    return make_node(bilinear_upsample(x->value, oh, ow), {x});
}

Var vavg_pool_adaptive2(const Var& x, std::size_t bh, std::size_t bw) {
    return make_node(avg_pool_adaptive2(x->value, bh, bw), {x});
}

Var vsigmoid(const Var& x) { return make_node(sigmoid_op(x->value), {x}); }

Var vsoftmax_lastdim(const Var& x) { return make_node(softmax_lastdim(x->value), {x}); }

Var vbatched_matmul(const Var& a, const Var& b, MacCounter* mc) {
    return make_node(batched_matmul(a->value, b->value, mc), {a, b});
}

Var vtranspose_last2(const Var& x) { return make_node(transpose_last2(x->value), {x}); }

Var vadd(const Var& a, const Var& b) { return make_node(add_op(a->value, b->value), {a, b}); }

Var vmul(const Var& a, const Var& b) { return make_node(mul_op(a->value, b->value), {a, b}); }

Var vscale(const Var& x, double s) { return make_node(scale_op(x->value, s), {x}); }

Var vconcat_channels(const Var& a, const Var& b) {
    return make_node(concat_channels_op(a->value, b->value), {a, b});
}

Var vslice_channels(const Var& x, std::size_t c0, std::size_t c1) {
    return make_node(slice_channels_op(x->value, c0, c1), {x});
}

Var vreshape(const Var& x, Shape4 s) {
    Shape4 orig = x->value.shape();
    OpResult r;
    r.value = x->value.reshaped(s);
    r.backward = [orig](const Tensor& go) {
        return std::vector<Tensor>{go.reshaped(orig)};
    };
    return make_node(std::move(r), {x});
}

Var vsum(const Var& x) { return make_node(sum_op(x->value), {x}); }

}  // namespace gald
