#include "consingan/losses.hpp"

#include <cmath>

namespace consingan {

CriticLossParts critic_loss(const ScoreFn& critic, const ag::Var& real, const ag::Var& fake,
                            double gp_lambda, RngStream& rng) {
    if (!real.value().same_shape(fake.value()))
        throw InvalidArgumentError("critic_loss: real " + shape_str(real.shape()) +
                                   " vs fake " + shape_str(fake.shape()));

    ag::Var fake_c = ag::detach(fake);
    ag::Var score_diff = ag::sub(ag::mean(critic(fake_c)), ag::mean(critic(real)));

    // interpolate leaf: u*real + (1-u)*fake
    const float u = static_cast<float>(rng.uniform());
    Tensor xv(real.shape());
    const float* pr = real.value().data();
    const float* pf = fake_c.value().data();
    for (size_t i = 0; i < xv.numel(); ++i) xv[i] = u * pr[i] + (1.0f - u) * pf[i];
    ag::Var xhat(std::move(xv), true);

    // The penalty differentiates the patch-count-normalized total score
    // (sum/sqrt(P)); for a scalar critic this is the score itself. Keeps the
    // unit-Lipschitz target invariant to the number of patch positions, so
    // the critic's slope scale does not grow with resolution.
    ag::Var gp_map = critic(xhat);
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(gp_map.value().numel()));
    ag::Var d_scalar = ag::mul_scalar(ag::sum(gp_map), inv_sqrt_p);
    ag::Var grad = ag::backward(d_scalar, {xhat}, /*create_graph=*/true)[0];
    ag::Var norm = ag::pow_scalar(ag::add_scalar(ag::sum(ag::square(grad)), 1e-12), 0.5);
    ag::Var gp = ag::square(ag::add_scalar(norm, -1.0));

    CriticLossParts parts;
    parts.loss = ag::add(score_diff, ag::mul_scalar(gp, gp_lambda));
    parts.wasserstein = score_diff.item();
    parts.gp = gp.item();
    parts.total = parts.loss.item();
    return parts;
}

ag::Var generator_adv_loss(const ScoreFn& critic, const ag::Var& fake) {
    return ag::mul_scalar(ag::mean(critic(fake)), -1.0);
}

ag::Var reconstruction_loss(const GrowingGenerator& g, const Tensor& x0, const Tensor& xn) {
    ag::Var out = g.forward(x0, NoiseMode::zero, nullptr);
    if (!out.value().same_shape(xn))
        throw InternalError("reconstruction_loss: generator output " + shape_str(out.shape()) +
                            " does not match target " + shape_str(xn.shape()));
    return ag::mse(out, ag::Var(xn));
}

ag::Var generator_total_loss(const ag::Var& adv, const ag::Var& rec, const LossWeights& w) {
    if (!std::isfinite(adv.item()) || !std::isfinite(rec.item()))
        throw NumericError("generator_total_loss: non-finite loss term");
    return ag::add(adv, ag::mul_scalar(rec, w.alpha));
}

ScoreFn critic_score_fn(const PatchCritic& d) {
    return [&d](const ag::Var& image) { return d.forward(image); };
}

}  // namespace consingan
