#include "consingan/augment.hpp"

#include <algorithm>
#include <cmath>

namespace consingan {

void AugmentSpec::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_brightness) || !prob(p_contrast) || !prob(p_saturation) || !prob(p_hue) ||
        !prob(p_noise))
        throw InvalidArgumentError("augment probabilities must be in [0,1]");
    if (noise_sigma_min < 0.0 || noise_sigma_max < noise_sigma_min)
        throw InvalidArgumentError("augment noise sigma range invalid");
    if (contrast_min <= 0.0 || contrast_max < contrast_min)
        throw InvalidArgumentError("augment contrast range invalid");
    if (saturation_min < 0.0 || saturation_max < saturation_min)
        throw InvalidArgumentError("augment saturation range invalid");
}

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

// hue rotation matrix about the gray axis (identity at angle 0)
void hue_matrix(double degrees, double m[3][3]) {
    const double a = degrees * M_PI / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    m[0][0] = kLumaR + c * (1 - kLumaR) - s * kLumaR;
    m[0][1] = kLumaG - c * kLumaG - s * kLumaG;
    m[0][2] = kLumaB - c * kLumaB + s * (1 - kLumaB);
    m[1][0] = kLumaR - c * kLumaR + s * 0.143;
    m[1][1] = kLumaG + c * (1 - kLumaG) + s * 0.140;
    m[1][2] = kLumaB - c * kLumaB - s * 0.283;
    m[2][0] = kLumaR - c * kLumaR - s * (1 - kLumaR);
    m[2][1] = kLumaG - c * kLumaG + s * kLumaG;
    m[2][2] = kLumaB + c * (1 - kLumaB) + s * kLumaB;
}

}  // namespace

Tensor random_augment(const Tensor& image, const AugmentSpec& spec, RngStream& rng) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw InvalidArgumentError("random_augment expects a {3,H,W} image");
    spec.validate();

    Tensor out = image;
    const int h = image.dim(1), w = image.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;
    float* r = out.data();
    float* g = r + plane;
    float* b = g + plane;

    if (rng.bernoulli(spec.p_brightness)) {
        const float shift = static_cast<float>(rng.uniform(-spec.brightness, spec.brightness));
        for (size_t i = 0; i < out.numel(); ++i) out[i] += shift;
    }
    if (rng.bernoulli(spec.p_contrast)) {
        // scale about mid-gray (0 in [-1,1])
        const float f = static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max));
        for (size_t i = 0; i < out.numel(); ++i) out[i] *= f;
    }
    if (rng.bernoulli(spec.p_saturation)) {
        const float f = static_cast<float>(rng.uniform(spec.saturation_min, spec.saturation_max));
        for (size_t i = 0; i < plane; ++i) {
            const float luma = static_cast<float>(kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i]);
            r[i] = luma + (r[i] - luma) * f;
            g[i] = luma + (g[i] - luma) * f;
            b[i] = luma + (b[i] - luma) * f;
        }
    }
    if (rng.bernoulli(spec.p_hue)) {
        double m[3][3];
        hue_matrix(rng.uniform(-spec.hue_degrees, spec.hue_degrees), m);
        for (size_t i = 0; i < plane; ++i) {
            const double rr = r[i], gg = g[i], bb = b[i];
            r[i] = static_cast<float>(m[0][0] * rr + m[0][1] * gg + m[0][2] * bb);
            g[i] = static_cast<float>(m[1][0] * rr + m[1][1] * gg + m[1][2] * bb);
            b[i] = static_cast<float>(m[2][0] * rr + m[2][1] * gg + m[2][2] * bb);
        }
    }
    if (rng.bernoulli(spec.p_noise)) {
        const double sigma = rng.uniform(spec.noise_sigma_min, spec.noise_sigma_max);
        for (size_t i = 0; i < out.numel(); ++i)
            out[i] += static_cast<float>(sigma * rng.normal());
    }
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], -1.0f, 1.0f);
    return out;
}

}  // namespace consingan
