#pragma once

#include "core/ops.hpp"

namespace cdrn {

struct SSIMParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;  // L
    // Exponents on the luminance, contrast, and structure factors. With all
    // three at 1 the contrast*structure product collapses algebraically to
    // the classical two-factor form, which is then used directly.
    double exp_l = 1.0;
    double exp_c = 1.0;
    double exp_s = 1.0;
    // Forces the explicit three-factor product even at unit exponents (used
    // to verify the collapse).
    bool force_factored = false;

    void validate() const;
};

struct SsimResult {
    Tensor map;         // per-pixel index over the valid (fully-windowed) region
    Tensor mean_value;  // scalar mean over valid pixels and channels
};

// Gaussian-window structural similarity, differentiable in both images.
// Inputs are [N,C,H,W] with H,W >= window.
SsimResult ssim_map(const Tensor& x, const Tensor& y, const SSIMParams& p = {});

Tensor gaussian_window(int size, double sigma);

}  // namespace cdrn
