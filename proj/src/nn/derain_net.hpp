#pragma once

#include <utility>

#include "nn/blocks.hpp"

namespace cdrn {

struct DerainConfig {
    int depth = 3;          // encoder levels per stage
    int base_channels = 16; // doubled at each level
    int sar_cardinal = 2;
    int sar_splits = 2;
    int sar_reduction = 4;
    bool use_sar = true;          // false -> plain residual decoder blocks
    bool supervise_stage1 = true; // restoration loss covers both stage outputs

    void validate() const;
    std::vector<int> level_channels() const;
    int spatial_divisor() const { return 1 << (depth - 1); }
};

// Decoder block: split-attention by default, plain residual under ablation.
struct DecoderBlock {
    std::optional<SarBlock> sar;
    std::optional<PlainResBlock> plain;

    Tensor forward(const Tensor& x) const {
        return sar ? sar->forward(x) : plain->forward(x);
    }
};

// One U-Net stage: HIN-block encoder with stride-2 conv downsampling, a
// decoder of DecoderBlocks with transposed-conv upsampling, and skip
// connections concatenated then fused by a 1x1 conv. `injections`, when
// present, are added to the encoder input at each level.
struct UnetStage {
    std::vector<HinBlock> enc_block;
    std::vector<Conv2dLayer> down;
    std::vector<DecoderBlock> dec_block;
    std::vector<ConvTranspose2dLayer> up;
    std::vector<Conv2dLayer> fuse;

    struct Features {
        std::vector<Tensor> enc;  // per level, before downsampling
        std::vector<Tensor> dec;  // per level, dec[depth-1] is the bottom
    };

    UnetStage() = default;
    UnetStage(ParamSet& ps, const std::string& name, const DerainConfig& cfg, Rng& rng);
    Features forward(const Tensor& input, const std::vector<Tensor>* injections) const;
};

struct Stage1Result {
    Tensor restored;  // unclamped intermediate image
    Tensor gated;     // SAM-gated features for stage 2
    std::vector<Tensor> enc, dec;
};

// Two progressive restoration stages with SAM handoff and CSFF injection,
// ending in a global residual over the rainy input.
class DerainNet {
  public:
    DerainNet() = default;
    DerainNet(const DerainConfig& cfg, ParamSet& ps, const std::string& prefix, Rng& rng);

    Stage1Result stage1_forward(const Tensor& rainy) const;
    Tensor stage2_forward(const Tensor& rainy, const Tensor& gated,
                          const std::vector<Tensor>& enc1, const std::vector<Tensor>& dec1) const;

    // (stage1 image, stage2 image); clamped to [0,1] unless training.
    std::pair<Tensor, Tensor> forward(const Tensor& rainy, bool training) const;

    const DerainConfig& config() const { return cfg_; }

  private:
    void check_input(const Tensor& rainy) const;

    DerainConfig cfg_;
    Conv2dLayer conv_in1_, conv_in2_, fuse_in_, out_proj_;
    UnetStage stage1_, stage2_;
    Sam sam_;
    Csff csff_;
};

// Closed-form parameter count for a given configuration.
std::size_t derain_expected_param_count(const DerainConfig& cfg);

}  // namespace cdrn
