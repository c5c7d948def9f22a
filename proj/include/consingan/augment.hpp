#pragma once

#include <cstdint>

#include "consingan/rng.hpp"
#include "consingan/tensor.hpp"

namespace consingan {

// Photometric jitter used to synthesize harmonization training inputs.
// Transforms apply independently with probability p_* in a fixed order
// (brightness, contrast, saturation, hue, additive noise), then clamp.
struct AugmentSpec {
    double noise_sigma_min = 0.0;
    double noise_sigma_max = 0.15;
    double brightness = 0.2;        // additive shift in [-brightness, brightness]
    double contrast_min = 0.7;
    double contrast_max = 1.3;
    double saturation_min = 0.7;
    double saturation_max = 1.3;
    double hue_degrees = 15.0;      // rotation in [-hue_degrees, hue_degrees]
    double p_brightness = 0.5;
    double p_contrast = 0.5;
    double p_saturation = 0.5;
    double p_hue = 0.5;
    double p_noise = 0.5;
    uint64_t seed = 0;

    void validate() const;
};

// image {3,H,W} in [-1,1] -> jittered image, same shape, clamped to [-1,1]
Tensor random_augment(const Tensor& image, const AugmentSpec& spec, RngStream& rng);

}  // namespace consingan
