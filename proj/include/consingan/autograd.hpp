#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "consingan/kernels.hpp"
#include "consingan/tensor.hpp"

namespace consingan::ag {

class Var;

// One value in the computation graph. `backward` maps the gradient w.r.t.
// this node to gradients w.r.t. its parents; it is expressed through the
// same op set, so gradients are themselves graph values and can be
// differentiated again (needed for the gradient penalty).
struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<std::vector<Var>(const Var& grad_out)> backward;
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    // In-place access for optimizer updates on leaves; never call on nodes
    // that are part of a live graph being differentiated.
    Tensor& mutable_value() { return node_->value; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    // leaf freeze/unfreeze; affects graphs built afterwards
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    const std::vector<int>& shape() const { return node_->value.shape(); }
    double item() const { return node_->value.item(); }

    std::shared_ptr<Node> node() const { return node_; }
    static Var from_node(std::shared_ptr<Node> n);

private:
    std::shared_ptr<Node> node_;
};

// Graph recording switch. While disabled, ops produce constant nodes; used
// for fake-sample generation in critic steps and for first-order backward.
bool& grad_enabled();

struct NoGradGuard {
    NoGradGuard() : saved_(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = saved_; }

private:
    bool saved_;
};

// --- primitive ops ---

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var pow_scalar(const Var& a, double p);
Var tanh_op(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sum(const Var& a);                                   // -> {1}
Var broadcast_full(const Var& s, std::vector<int> shape);  // {1} -> shape
Var spatial_sum(const Var& a);                           // {C,H,W} -> {C,1,1}
Var broadcast_spatial(const Var& v, int h, int w);       // {C,1,1} -> {C,H,W}
Var conv2d(const Var& x, const Var& w, int pad);         // no bias
Var conv2d_wgrad_op(const Var& x, const Var& gy, int pad, std::vector<int> w_shape);
Var flip_swap_op(const Var& w);
Var reflect_pad(const Var& x, int p);
Var reflect_unpad_op(const Var& gy, int p);
Var resize(const Var& x, int out_h, int out_w);
Var resize_adjoint_op(const Var& gy, int in_h, int in_w);
Var detach(const Var& a);

// --- composites ---

Var mean(const Var& a);
Var square(const Var& a);
Var mse(const Var& a, const Var& b);
Var conv2d_bias(const Var& x, const Var& w, const Var& b, int pad);  // b {Co,1,1}
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Gradients of `root` w.r.t. each Var in `wrt` (zeros when unreachable).
// With create_graph the returned gradients are differentiable graph values.
std::vector<Var> backward(const Var& root, const std::vector<Var>& wrt,
                          bool create_graph = false);

}  // namespace consingan::ag
