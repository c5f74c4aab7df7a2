#pragma once

#include <string>

#include "core/tensor.hpp"

namespace cdrn {

// 8-bit RGB PNG <-> planar [3,H,W] tensor with values in [0,1]. Loading
// expands gray/palette/16-bit sources to 8-bit RGB and drops alpha; saving
// clamps to the unit range before quantization.
Tensor load_png_rgb(const std::string& path);
void save_png_rgb(const Tensor& img, const std::string& path);

}  // namespace cdrn
