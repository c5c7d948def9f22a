#pragma once

#include <string>

#include "consingan/tensor.hpp"

namespace consingan {

// PNG or JPEG (detected by magic bytes) -> {3,H,W} float in [-1,1].
// Grayscale inputs are promoted to 3 channels, alpha is dropped.
Tensor load_image(const std::string& path);

// Saves by extension (.png, .jpg/.jpeg); values mapped back to 8-bit with
// round-half-even. Writes to a temp file, then renames.
void save_image(const Tensor& image, const std::string& path);

}  // namespace consingan
