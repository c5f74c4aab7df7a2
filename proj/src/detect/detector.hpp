#pragma once

#include <array>
#include <limits>
#include <vector>

#include "nn/layers.hpp"

namespace cdrn {

inline constexpr int kFpnLevels = 5;

struct DetectorConfig {
    int num_classes = 3;  // Car, Pedestrian, Cyclist
    int base_width = 16;  // C3 channels; C4 and C5 double twice
    int fpn_channels = 32;
    int tower_depth = 4;
    std::array<int, kFpnLevels> strides = {8, 16, 32, 64, 128};
    // Upper edge of max(l,t,r,b) handled per level; the lower edge is the
    // previous entry (0 for P3). Together the half-open intervals partition
    // (0, inf).
    std::array<float, kFpnLevels> range_edges = {16, 32, 64, 128,
                                                 std::numeric_limits<float>::infinity()};
    float score_threshold = 0.05f;
    float nms_iou = 0.5f;
    int max_detections = 100;
    bool centerness_on_reg = true;  // false puts the branch on the cls tower
    float prior_probability = 0.01f;  // classification bias init

    void validate() const;
    float range_lo(int level) const { return level == 0 ? 0.0f : range_edges[static_cast<std::size_t>(level) - 1]; }
    float range_hi(int level) const { return range_edges[static_cast<std::size_t>(level)]; }
};

// Spatial geometry of one head level.
struct LevelGrid {
    int stride = 0;
    int h = 0;
    int w = 0;
    // Feature-cell center in image pixels.
    float loc_x(int x) const { return 0.5f * static_cast<float>(stride) + static_cast<float>(x * stride); }
    float loc_y(int y) const { return 0.5f * static_cast<float>(stride) + static_cast<float>(y * stride); }
};

struct BackboneBlock {
    Conv2dLayer conv1, conv2, shortcut;
    bool projected = false;

    BackboneBlock() = default;
    BackboneBlock(ParamSet& ps, const std::string& name, int cin, int cout, int stride, Rng& rng);
    Tensor forward(const Tensor& x) const;
};

// Compact residual backbone: a stride-4 stem and three two-block stages
// giving C3/C4/C5 at strides 8/16/32.
struct Backbone {
    Conv2dLayer stem1, stem2;
    std::vector<BackboneBlock> blocks;  // 2 per stage

    Backbone() = default;
    Backbone(ParamSet& ps, const std::string& name, int base_width, Rng& rng);
    std::vector<Tensor> forward(const Tensor& img) const;  // {C3, C4, C5}
};

// Lateral 1x1 projections, nearest-neighbor top-down fusion and 3x3
// smoothing for P3-P5; P6 and P7 are stride-2 convs from P5 and P6.
struct Fpn {
    std::vector<Conv2dLayer> lateral;  // 3
    std::vector<Conv2dLayer> smooth;   // 3
    Conv2dLayer p6, p7;

    Fpn() = default;
    Fpn(ParamSet& ps, const std::string& name, int base_width, int fpn_channels, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& c345) const;  // {P3..P7}
};

struct HeadOutput {
    Tensor cls;   // [N, C, h, w] logits
    Tensor ltrb;  // [N, 4, h, w] positive distances in pixels
    Tensor ctr;   // [N, 1, h, w] logits
};

// Shared-across-levels FCOS head: two tower stacks feeding classification,
// box regression, and center-ness, with a learnable per-level scale on the
// regression output.
struct Head {
    std::vector<Conv2dLayer> cls_tower, reg_tower;
    Conv2dLayer cls_out, reg_out, ctr_out;
    std::vector<Tensor> level_scale;  // one scalar per level
    bool centerness_on_reg = true;

    Head() = default;
    Head(ParamSet& ps, const std::string& name, const DetectorConfig& cfg, Rng& rng);
    HeadOutput forward(const Tensor& feature, int level, int stride) const;
};

struct DetectorOutput {
    std::vector<HeadOutput> levels;  // kFpnLevels entries
};

class Detector {
  public:
    Detector() = default;
    Detector(const DetectorConfig& cfg, ParamSet& ps, const std::string& prefix, Rng& rng);

    std::vector<Tensor> backbone_forward(const Tensor& img) const;
    std::vector<Tensor> fpn_forward(const std::vector<Tensor>& c345) const;
    DetectorOutput forward(const Tensor& img) const;

    std::vector<LevelGrid> level_grids(int img_h, int img_w) const;
    const DetectorConfig& config() const { return cfg_; }
    const Backbone& backbone() const { return backbone_; }

  private:
    DetectorConfig cfg_;
    Backbone backbone_;
    Fpn fpn_;
    Head head_;
};

}  // namespace cdrn
