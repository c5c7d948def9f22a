#pragma once

#include <cmath>
#include <vector>

#include "consingan/autograd.hpp"

namespace consingan {

struct ParamGroup {
    std::vector<ag::Var> params;
    double lr = 0.0;
};

// Adam with per-group learning rates. Groups map to stages so the ladder
// lr = eta * delta^depth lands on each stage exactly; lr == 0 is a no-op
// update by construction.
class Adam {
public:
    explicit Adam(std::vector<ParamGroup> groups, double beta1 = 0.5, double beta2 = 0.999,
                  double eps = 1e-8)
        : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (size_t gi = 0; gi < groups_.size(); ++gi) {
            for (const auto& p : groups_[gi].params) {
                flat_.push_back(p);
                lr_of_.push_back(groups_[gi].lr);
                m_.emplace_back(p.shape());
                v_.emplace_back(p.shape());
            }
        }
    }

    const std::vector<ag::Var>& params() const { return flat_; }
    size_t group_count() const { return groups_.size(); }
    double group_lr(size_t i) const { return groups_[i].lr; }

    void step(const std::vector<ag::Var>& grads) {
        if (grads.size() != flat_.size()) throw InternalError("Adam: gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < flat_.size(); ++i) {
            if (lr_of_[i] == 0.0) continue;
            Tensor& p = flat_[i].mutable_value();
            const Tensor& g = grads[i].value();
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
            for (size_t j = 0; j < p.numel(); ++j) {
                m[j] = b1 * m[j] + (1.0f - b1) * g[j];
                v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= static_cast<float>(lr_of_[i] * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    std::vector<ParamGroup> groups_;
    std::vector<ag::Var> flat_;
    std::vector<double> lr_of_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace consingan
