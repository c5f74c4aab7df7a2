#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "nn/layers.hpp"

namespace cdrn {

// Half-instance-normalization block: a 3x3 conv, instance norm over exactly
// half of the channels, leaky-relu, a second 3x3 conv, and a 1x1 conv
// residual from the block input.
struct HinBlockTrace {
    Tensor normed_half;
    Tensor raw_half;
    Tensor merged;
};

struct HinBlock {
    Conv2dLayer conv1, conv2, res;
    InstanceNormLayer norm;
    int out_channels = 0;

    HinBlock() = default;
    HinBlock(ParamSet& ps, const std::string& name, int cin, int cout, Rng& rng);
    Tensor forward(const Tensor& x, HinBlockTrace* trace = nullptr) const;
};

struct SarConfig {
    int channels = 0;
    int cardinal = 2;   // k
    int splits = 2;     // r
    int reduction = 4;  // FC bottleneck divisor

    void validate() const;
    int split_width() const { return channels / cardinal; }
    int hidden_width() const;
};

// Split-attention residual block. A 3x3 conv expands C channels to r*C,
// viewed as k cardinal groups of r splits with C/k channels each. Per
// cardinal, the splits are summed, globally pooled, pushed through an FC
// bottleneck, and turned into per-channel attention over the r splits
// (softmax across splits, a sigmoid gate when r == 1). The attention-weighted
// split sum per cardinal is re-concatenated and added to a 1x1 conv of the
// block input (Res Conv).
struct SarBlockTrace {
    // One [N, r, C/k] tensor per cardinal group (softmax weights), or
    // [N, 1, C/k] sigmoid gates when r == 1.
    std::vector<Tensor> attention;
};

struct SarBlock {
    SarConfig cfg;
    Conv2dLayer pre, res;
    std::vector<LinearLayer> fc1, fc2;

    SarBlock() = default;
    SarBlock(ParamSet& ps, const std::string& name, SarConfig cfg, Rng& rng);
    Tensor forward(const Tensor& x, SarBlockTrace* trace = nullptr) const;
};

// SAR-ablation replacement: two 3x3 convs plus the same 1x1 Res Conv.
struct PlainResBlock {
    Conv2dLayer conv1, conv2, res;

    PlainResBlock() = default;
    PlainResBlock(ParamSet& ps, const std::string& name, int channels, Rng& rng);
    Tensor forward(const Tensor& x) const;
};

// Supervised attention module. Produces an intermediate restored image
// (1x1 conv of the features plus the degraded input) and gates the features
// with a sigmoid mask derived from that image before they continue to the
// next stage.
struct Sam {
    Conv2dLayer to_image, to_mask;

    Sam() = default;
    Sam(ParamSet& ps, const std::string& name, int feature_channels, Rng& rng);
    // returns {restored image [N,3,H,W], gated features}
    std::pair<Tensor, Tensor> forward(const Tensor& features, const Tensor& degraded) const;
};

// Cross-stage feature fusion: bias-free 1x1 projections of the first-stage
// encoder and decoder features, summed per level for injection into the
// second-stage encoder.
struct Csff {
    std::vector<Conv2dLayer> enc_proj, dec_proj;

    Csff() = default;
    Csff(ParamSet& ps, const std::string& name, const std::vector<int>& level_channels, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& enc,
                                const std::vector<Tensor>& dec) const;
};

}  // namespace cdrn
