#include "consingan/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace consingan::ag {

using kernels::default_exec;

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

bool& grad_enabled() {
    thread_local bool enabled = true;
    return enabled;
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<std::vector<Var>(const Var&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
        n->requires_grad = true;
        n->backward = std::move(backward);
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
    }
    return Var::from_node(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw InvalidArgumentError(std::string(op) + ": shape mismatch " +
                                   shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    const float* pb = b.value().data();
    float* po = out.data();
#pragma omp simd
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    return make_node(std::move(out), {a, b},
                     [](const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    const float* pb = b.value().data();
    float* po = out.data();
#pragma omp simd
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    return make_node(std::move(out), {a, b}, [](const Var& g) {
        return std::vector<Var>{g, mul_scalar(g, -1.0)};
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    const float* pb = b.value().data();
    float* po = out.data();
#pragma omp simd
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    return make_node(std::move(out), {a, b}, [a, b](const Var& g) {
        return std::vector<Var>{mul(g, b), mul(g, a)};
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    float* po = out.data();
    const float fs = static_cast<float>(s);
#pragma omp simd
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + fs;
    return make_node(std::move(out), {a},
                     [](const Var& g) { return std::vector<Var>{g}; });
}

Var mul_scalar(const Var& a, double s) {
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    float* po = out.data();
    const float fs = static_cast<float>(s);
#pragma omp simd
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] * fs;
    return make_node(std::move(out), {a}, [s](const Var& g) {
        return std::vector<Var>{mul_scalar(g, s)};
    });
}

Var pow_scalar(const Var& a, double p) {
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    float* po = out.data();
    for (size_t i = 0; i < n; ++i) po[i] = std::pow(pa[i], static_cast<float>(p));
    return make_node(std::move(out), {a}, [a, p](const Var& g) {
        return std::vector<Var>{mul(g, mul_scalar(pow_scalar(a, p - 1.0), p))};
    });
}

Var tanh_op(const Var& a) {
    Tensor out(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    float* po = out.data();
    for (size_t i = 0; i < n; ++i) po[i] = std::tanh(pa[i]);
    // backward recomputes tanh(a) from the parent so the 1 - tanh^2 factor
    // stays differentiable
    return make_node(std::move(out), {a}, [a](const Var& g) {
        Var t = tanh_op(a);
        Var one_minus = add_scalar(mul_scalar(mul(t, t), -1.0), 1.0);
        return std::vector<Var>{mul(g, one_minus)};
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a.shape());
    Tensor mask(a.shape());
    const size_t n = out.numel();
    const float* pa = a.value().data();
    float* po = out.data();
    float* pm = mask.data();
    const float fs = static_cast<float>(slope);
#pragma omp simd
    for (size_t i = 0; i < n; ++i) {
        const bool pos = pa[i] >= 0.0f;
        po[i] = pos ? pa[i] : fs * pa[i];
        pm[i] = pos ? 1.0f : fs;
    }
    Var mask_v(std::move(mask), false);
    return make_node(std::move(out), {a}, [mask_v](const Var& g) {
        return std::vector<Var>{mul(g, mask_v)};
    });
}

// ---------------------------------------------------------------------------
// reductions and broadcasts
// ---------------------------------------------------------------------------

Var sum(const Var& a) {
    Tensor out = Tensor::scalar(static_cast<float>(kernels::sum(a.value().data(), a.value().numel())));
    auto shape = a.shape();
    return make_node(std::move(out), {a}, [shape](const Var& g) {
        return std::vector<Var>{broadcast_full(g, shape)};
    });
}

Var broadcast_full(const Var& s, std::vector<int> shape) {
    if (s.value().numel() != 1) throw InternalError("broadcast_full expects scalar");
    Tensor out(shape, s.value()[0]);
    return make_node(std::move(out), {s},
                     [](const Var& g) { return std::vector<Var>{sum(g)}; });
}

Var spatial_sum(const Var& a) {
    const int c = a.value().dim(0), h = a.value().dim(1), w = a.value().dim(2);
    Tensor out({c, 1, 1});
    for (int cc = 0; cc < c; ++cc)
        out[cc] = static_cast<float>(
            kernels::sum(a.value().data() + static_cast<size_t>(cc) * h * w,
                         static_cast<size_t>(h) * w));
    return make_node(std::move(out), {a}, [h, w](const Var& g) {
        return std::vector<Var>{broadcast_spatial(g, h, w)};
    });
}

Var broadcast_spatial(const Var& v, int h, int w) {
    const int c = v.value().dim(0);
    Tensor out({c, h, w});
    for (int cc = 0; cc < c; ++cc)
        std::fill_n(out.data() + static_cast<size_t>(cc) * h * w,
                    static_cast<size_t>(h) * w, v.value()[cc]);
    return make_node(std::move(out), {v},
                     [](const Var& g) { return std::vector<Var>{spatial_sum(g)}; });
}

// ---------------------------------------------------------------------------
// convolution family
// ---------------------------------------------------------------------------

Var conv2d(const Var& x, const Var& w, int pad) {
    Tensor out;
    kernels::conv2d(x.value(), w.value(), nullptr, pad, out, default_exec());
    const auto xshape = x.shape();
    const auto wshape = w.shape();
    const int k = wshape[2];
    return make_node(std::move(out), {x, w}, [x, w, pad, xshape, wshape, k](const Var& g) {
        Var gx = conv2d(g, flip_swap_op(w), k - 1 - pad);
        Var gw = conv2d_wgrad_op(x, g, pad, wshape);
        return std::vector<Var>{gx, gw};
    });
}

Var conv2d_wgrad_op(const Var& x, const Var& gy, int pad, std::vector<int> w_shape) {
    Tensor out(w_shape);
    kernels::conv2d_wgrad(x.value(), gy.value(), pad, out, default_exec());
    const int k = w_shape[2];
    const auto xshape = x.shape();
    return make_node(std::move(out), {x, gy}, [x, gy, pad, k, xshape](const Var& s) {
        Var gx = conv2d(gy, flip_swap_op(s), k - 1 - pad);
        Var ggy = conv2d(x, s, pad);
        return std::vector<Var>{gx, ggy};
    });
}

Var flip_swap_op(const Var& w) {
    Tensor out = kernels::flip_swap(w.value());
    return make_node(std::move(out), {w}, [](const Var& g) {
        return std::vector<Var>{flip_swap_op(g)};
    });
}

// ---------------------------------------------------------------------------
// padding and resize
// ---------------------------------------------------------------------------

Var reflect_pad(const Var& x, int p) {
    Tensor out;
    kernels::reflect_pad(x.value(), p, out, default_exec());
    return make_node(std::move(out), {x}, [p](const Var& g) {
        return std::vector<Var>{reflect_unpad_op(g, p)};
    });
}

Var reflect_unpad_op(const Var& gy, int p) {
    const int c = gy.value().dim(0), oh = gy.value().dim(1), ow = gy.value().dim(2);
    Tensor out({c, oh - 2 * p, ow - 2 * p});
    kernels::reflect_pad_adjoint(gy.value(), p, out, default_exec());
    return make_node(std::move(out), {gy}, [p](const Var& g) {
        return std::vector<Var>{reflect_pad(g, p)};
    });
}

Var resize(const Var& x, int out_h, int out_w) {
    Tensor out;
    kernels::resize(x.value(), out_h, out_w, out, default_exec());
    const int in_h = x.value().dim(1), in_w = x.value().dim(2);
    return make_node(std::move(out), {x}, [in_h, in_w](const Var& g) {
        return std::vector<Var>{resize_adjoint_op(g, in_h, in_w)};
    });
}

Var resize_adjoint_op(const Var& gy, int in_h, int in_w) {
    Tensor out;
    kernels::resize_adjoint(gy.value(), in_h, in_w, out, default_exec());
    const int oh = gy.value().dim(1), ow = gy.value().dim(2);
    return make_node(std::move(out), {gy}, [oh, ow](const Var& g) {
        return std::vector<Var>{resize(g, oh, ow)};
    });
}

Var detach(const Var& a) { return Var(a.value(), false); }

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

Var mean(const Var& a) {
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var square(const Var& a) { return mul(a, a); }

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

Var conv2d_bias(const Var& x, const Var& w, const Var& b, int pad) {
    Var y = conv2d(x, w, pad);
    return add(y, broadcast_spatial(b, y.value().dim(1), y.value().dim(2)));
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const int h = x.value().dim(1), w = x.value().dim(2);
    const double inv_hw = 1.0 / (static_cast<double>(h) * w);
    Var mu = mul_scalar(spatial_sum(x), inv_hw);
    Var centered = sub(x, broadcast_spatial(mu, h, w));
    Var var = mul_scalar(spatial_sum(square(centered)), inv_hw);
    Var inv_std = pow_scalar(add_scalar(var, eps), -0.5);
    Var normed = mul(centered, broadcast_spatial(inv_std, h, w));
    return add(mul(normed, broadcast_spatial(gamma, h, w)), broadcast_spatial(beta, h, w));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

std::vector<Var> backward(const Var& root, const std::vector<Var>& wrt, bool create_graph) {
    std::vector<Var> results(wrt.size());
    auto zero_fill = [&] {
        for (size_t i = 0; i < wrt.size(); ++i)
            results[i] = Var(Tensor(wrt[i].shape()), false);
    };
    if (!root.requires_grad()) {
        zero_fill();
        return results;
    }

    // post-order topological sort over the requires-grad subgraph
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    {
        std::vector<std::pair<Node*, size_t>> stack{{root.node().get(), 0}};
        visited.insert(root.node().get());
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx++].get();
                if (p->requires_grad && !visited.count(p)) {
                    visited.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::unordered_set<Node*> keep;
    for (const auto& v : wrt) keep.insert(v.node().get());

    std::unordered_map<Node*, Var> grads;
    grads[root.node().get()] = Var(Tensor(root.shape(), 1.0f), false);

    std::optional<NoGradGuard> guard;
    if (!create_graph) guard.emplace();

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        auto git = grads.find(n);
        if (git == grads.end()) continue;  // unreachable from root
        Var g = git->second;
        if (!keep.count(n)) grads.erase(git);
        if (!n->backward) continue;
        std::vector<Var> pgrads = n->backward(g);
        for (size_t i = 0; i < n->parents.size(); ++i) {
            Node* p = n->parents[i].get();
            if (!p->requires_grad) continue;
            auto pit = grads.find(p);
            if (pit == grads.end())
                grads[p] = pgrads[i];
            else
                pit->second = add(pit->second, pgrads[i]);
        }
    }

    for (size_t i = 0; i < wrt.size(); ++i) {
        auto it = grads.find(wrt[i].node().get());
        if (it != grads.end())
            results[i] = it->second;
        else
            results[i] = Var(Tensor(wrt[i].shape()), false);
    }
    return results;
}

}  // namespace consingan::ag
