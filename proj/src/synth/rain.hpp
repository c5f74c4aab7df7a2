#pragma once

#include <cstdint>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace cdrn {

// One streak category. Lengths and widths are in pixels at the reference
// diagonal and scale linearly with the actual image diagonal; angles are
// degrees from vertical; density is streaks per megapixel.
struct RainCategory {
    double density = 0;
    double length_min = 0, length_max = 0;
    double width_min = 0, width_max = 0;
    double angle_min = 0, angle_max = 0;
    double intensity_min = 0, intensity_max = 0;
};

struct RainParams {
    RainCategory long_streaks;
    RainCategory medium_streaks;
    RainCategory short_streaks;
    double reference_diagonal = 1336.28;  // 1280 x 384

    static RainParams defaults();
    void validate() const;
};

// Deterministic single-channel [H,W] streak layer in [0,1]: per category a
// Poisson-distributed streak count, each streak an anti-aliased segment with
// a Gaussian cross-profile, category layers 3x3-blurred, summed, clamped.
Tensor gen_streak_layer(int w, int h, const RainParams& params, std::uint64_t seed);

// rainy = clamp(clean + layer, 0, 1), the layer applied to every channel.
Tensor composite(const Tensor& clean, const Tensor& layer);

}  // namespace cdrn
