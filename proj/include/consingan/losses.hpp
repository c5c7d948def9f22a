#pragma once

#include <functional>

#include "consingan/autograd.hpp"
#include "consingan/model.hpp"
#include "consingan/rng.hpp"

namespace consingan {

struct LossWeights {
    double alpha = 10.0;
    double gp_lambda = 0.1;
};

// image -> unreduced score map; PatchCritic in production, anything
// score-shaped in tests
using ScoreFn = std::function<ag::Var(const ag::Var&)>;

struct CriticLossParts {
    ag::Var loss;
    double wasserstein = 0.0;  // mean(D(fake)) - mean(D(real))
    double gp = 0.0;
    double total = 0.0;
};

// WGAN-GP critic objective with one interpolate sample per call.
CriticLossParts critic_loss(const ScoreFn& critic, const ag::Var& real, const ag::Var& fake,
                            double gp_lambda, RngStream& rng);

// -mean(D(fake)); gradients flow through the generator that produced fake.
ag::Var generator_adv_loss(const ScoreFn& critic, const ag::Var& fake);

// mean squared error of the zero-noise forward G(x0) against xn.
ag::Var reconstruction_loss(const GrowingGenerator& g, const Tensor& x0, const Tensor& xn);

// adv + alpha * rec; rejects non-finite inputs.
ag::Var generator_total_loss(const ag::Var& adv, const ag::Var& rec, const LossWeights& w);

ScoreFn critic_score_fn(const PatchCritic& d);

}  // namespace consingan
