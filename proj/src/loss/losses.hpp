#pragma once

#include <vector>

#include "detect/assign.hpp"
#include "detect/detector.hpp"
#include "loss/ssim.hpp"

namespace cdrn {

// Per-stage composition of the total objective:
//   total = derain_weight * restoration + downstream_weight * detection.
struct StageWeights {
    double derain_weight = 0;      // a
    double downstream_weight = 1;  // beta
    enum class Downstream { focal_suite, feature_map } downstream_form = Downstream::focal_suite;
    enum class Derain { none, ssim, ssim_mse } derain_form = Derain::none;
};

// Fixed ledger: stage 1 = (0, 1, focal, none), stage 2 = (1, 0.1,
// feature-map, ssim), stage 3 = (1, 0.5, focal, ssim+mse).
StageWeights stage_weights(int stage);

// Restoration loss over the supervised stage outputs, summed:
// stage 2 -> 1 - SSIM; stage 3 -> 1 - SSIM + MSE (MSE removable for
// ablation). Stage 1 has no restoration term and is an error here.
Tensor l_derain(int stage, const Tensor& clean, const std::vector<Tensor>& outputs,
                const SSIMParams& ssim = {}, bool mse_term_enabled = true);

// Sigmoid focal loss summed over every level and location, divided by
// max(1, num_pos). alpha <= 0 disables the alpha weighting (the loss then
// reduces to plain BCE at gamma = 0).
Tensor focal_loss(const std::vector<Tensor>& cls_logits, const std::vector<Tensor>& cls_targets,
                  int num_pos, real alpha = real(0.25), real gamma = real(2));

// Center-ness-weighted mean of (1 - GIoU) over positive locations, in
// l/t/r/b distance space around each location.
Tensor giou_loss(const std::vector<Tensor>& pred_ltrb, const std::vector<Tensor>& target_ltrb,
                 const std::vector<Tensor>& weights, const std::vector<Tensor>& pos_mask);

// Binary cross-entropy of the center-ness logits against their targets,
// averaged over positives.
Tensor centerness_loss(const std::vector<Tensor>& ctr_logits, const std::vector<Tensor>& targets,
                       const std::vector<Tensor>& pos_mask, int num_pos);

// Plain-value GIoU between two boxes (reference-grade, not differentiable).
double giou_boxes(const Box& a, const Box& b);

struct DownstreamLosses {
    Tensor cls, reg, cnt, total;
};

// L_cls + L_reg + L_cnt from the detector head outputs and assigned targets.
DownstreamLosses downstream_focal_suite(const DetectorOutput& out, const AssignedBatch& targets,
                                        real alpha = real(0.25), real gamma = real(2));

// Mean per-level MSE between two backbone feature sets ({C3, C4, C5}).
Tensor feature_map_loss(const std::vector<Tensor>& clean_feats,
                        const std::vector<Tensor>& derained_feats);
// Same, but verifies the detector is actually frozen first.
Tensor feature_map_loss(const std::vector<Tensor>& clean_feats,
                        const std::vector<Tensor>& derained_feats, const ParamSet& params,
                        std::string_view detector_prefix);

// Weighted stage total. Stage 1 takes no restoration part (pass an undefined
// tensor); stages 2 and 3 require both parts.
Tensor total_loss(int stage, const Tensor& derain_part, const Tensor& downstream_part);

}  // namespace cdrn
