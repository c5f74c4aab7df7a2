#include "loss/losses.hpp"

#include <algorithm>
#include <cmath>

namespace cdrn {

StageWeights stage_weights(int stage) {
    switch (stage) {
        case 1:
            return {0.0, 1.0, StageWeights::Downstream::focal_suite, StageWeights::Derain::none};
        case 2:
            return {1.0, 0.1, StageWeights::Downstream::feature_map, StageWeights::Derain::ssim};
        case 3:
            return {1.0, 0.5, StageWeights::Downstream::focal_suite, StageWeights::Derain::ssim_mse};
        default:
            fail("stage_weights: stage must be 1, 2 or 3");
    }
}

Tensor l_derain(int stage, const Tensor& clean, const std::vector<Tensor>& outputs,
                const SSIMParams& ssim, bool mse_term_enabled) {
    if (stage != 2 && stage != 3)
        fail("l_derain: defined for stages 2 and 3 only, got " + std::to_string(stage));
    if (outputs.empty()) fail("l_derain: no supervised outputs");
    Tensor total;
    for (const Tensor& out : outputs) {
        Tensor term = add_scalar(scale(ssim_map(clean, out, ssim).mean_value, -1), 1);
        if (stage == 3 && mse_term_enabled) term = add(term, mse(out, clean));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Tensor focal_loss(const std::vector<Tensor>& cls_logits, const std::vector<Tensor>& cls_targets,
                  int num_pos, real alpha, real gamma) {
    if (cls_logits.size() != cls_targets.size() || cls_logits.empty())
        fail("focal_loss: logits/targets level mismatch");
    const bool use_alpha = alpha > 0;
    const real a_pos = use_alpha ? alpha : real(1);
    const real a_neg = use_alpha ? real(1) - alpha : real(1);
    Tensor total;
    for (std::size_t l = 0; l < cls_logits.size(); ++l) {
        const Tensor& x = cls_logits[l];
        const Tensor& t = cls_targets[l];
        if (!shape_eq(x.shape(), t.shape()))
            fail("focal_loss: shape mismatch at level " + std::to_string(l));
        Tensor neg_x = scale(x, -1);
        Tensor pos_term = softplus(neg_x);  // -log sigmoid(x)
        Tensor neg_term = softplus(x);      // -log(1 - sigmoid(x))
        if (gamma != 0) {
            pos_term = mul(pos_term, pow_scalar(sigmoid(neg_x), gamma));
            neg_term = mul(neg_term, pow_scalar(sigmoid(x), gamma));
        }
        Tensor one_minus_t = add_scalar(scale(t, -1), 1);
        Tensor elem = add(scale(mul(t, pos_term), a_pos), scale(mul(one_minus_t, neg_term), a_neg));
        Tensor s = sum(elem);
        total = total.defined() ? add(total, s) : s;
    }
    return scale(total, real(1) / static_cast<real>(std::max(1, num_pos)));
}

Tensor giou_loss(const std::vector<Tensor>& pred_ltrb, const std::vector<Tensor>& target_ltrb,
                 const std::vector<Tensor>& weights, const std::vector<Tensor>& pos_mask) {
    if (pred_ltrb.size() != target_ltrb.size() || pred_ltrb.size() != weights.size() ||
        pred_ltrb.size() != pos_mask.size() || pred_ltrb.empty())
        fail("giou_loss: level list mismatch");

    double denom = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto w = weights[l].values();
        auto m = pos_mask[l].values();
        for (std::size_t i = 0; i < w.size(); ++i)
            denom += static_cast<double>(w[i]) * static_cast<double>(m[i]);
    }
    if (denom <= 0) return Tensor::scalar(0);

    Tensor total;
    for (std::size_t l = 0; l < pred_ltrb.size(); ++l) {
        auto p = split(pred_ltrb[l], 1, 4);
        auto t = split(target_ltrb[l], 1, 4);
        const Tensor &lp = p[0], &tp = p[1], &rp = p[2], &bp = p[3];
        const Tensor &lt = t[0], &tt = t[1], &rt = t[2], &bt = t[3];

        Tensor iw = add(minimum(lp, lt), minimum(rp, rt));
        Tensor ih = add(minimum(tp, tt), minimum(bp, bt));
        Tensor inter = mul(iw, ih);
        Tensor area_p = mul(add(lp, rp), add(tp, bp));
        Tensor area_t = mul(add(lt, rt), add(tt, bt));
        Tensor uni = sub(add(area_p, area_t), inter);
        Tensor cw = add(maximum(lp, lt), maximum(rp, rt));
        Tensor ch = add(maximum(tp, tt), maximum(bp, bt));
        Tensor hull = mul(cw, ch);
        Tensor giou = sub(div(inter, uni), div(sub(hull, uni), hull));
        Tensor elem = add_scalar(scale(giou, -1), 1);  // 1 - GIoU in [0, 2]
        Tensor weighted = mul(mul(elem, weights[l]), pos_mask[l]);
        Tensor s = sum(weighted);
        total = total.defined() ? add(total, s) : s;
    }
    return scale(total, static_cast<real>(1.0 / denom));
}

Tensor centerness_loss(const std::vector<Tensor>& ctr_logits, const std::vector<Tensor>& targets,
                       const std::vector<Tensor>& pos_mask, int num_pos) {
    if (ctr_logits.size() != targets.size() || ctr_logits.size() != pos_mask.size() ||
        ctr_logits.empty())
        fail("centerness_loss: level list mismatch");
    if (num_pos <= 0) return Tensor::scalar(0);
    Tensor total;
    for (std::size_t l = 0; l < ctr_logits.size(); ++l) {
        const Tensor& x = ctr_logits[l];
        Tensor elem = sub(softplus(x), mul(x, targets[l]));  // BCE with logits
        Tensor s = sum(mul(elem, pos_mask[l]));
        total = total.defined() ? add(total, s) : s;
    }
    return scale(total, real(1) / static_cast<real>(num_pos));
}

double giou_boxes(const Box& a, const Box& b) {
    const double iw = std::max(0.0f, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0f, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = static_cast<double>(a.area()) + b.area() - inter;
    if (uni <= 0) return 0.0;
    const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    const double hull = cw * ch;
    return inter / uni - (hull - uni) / hull;
}

DownstreamLosses downstream_focal_suite(const DetectorOutput& out, const AssignedBatch& targets,
                                        real alpha, real gamma) {
    if (out.levels.size() != targets.levels.size())
        fail("downstream_focal_suite: level count mismatch");
    std::vector<Tensor> cls_logits, cls_targets, ltrb_pred, ltrb_target, ctr_logits, ctr_targets,
        masks;
    for (std::size_t l = 0; l < out.levels.size(); ++l) {
        cls_logits.push_back(out.levels[l].cls);
        cls_targets.push_back(targets.levels[l].cls_onehot);
        ltrb_pred.push_back(out.levels[l].ltrb);
        ltrb_target.push_back(targets.levels[l].ltrb);
        ctr_logits.push_back(out.levels[l].ctr);
        ctr_targets.push_back(targets.levels[l].centerness);
        masks.push_back(targets.levels[l].pos_mask);
    }
    DownstreamLosses dl;
    dl.cls = focal_loss(cls_logits, cls_targets, targets.total_pos, alpha, gamma);
    dl.reg = giou_loss(ltrb_pred, ltrb_target, ctr_targets, masks);
    dl.cnt = centerness_loss(ctr_logits, ctr_targets, masks, targets.total_pos);
    dl.total = add(add(dl.cls, dl.reg), dl.cnt);
    return dl;
}

Tensor feature_map_loss(const std::vector<Tensor>& clean_feats,
                        const std::vector<Tensor>& derained_feats) {
    if (clean_feats.size() != derained_feats.size() || clean_feats.empty())
        fail("feature_map_loss: feature set size mismatch");
    Tensor total;
    for (std::size_t l = 0; l < clean_feats.size(); ++l) {
        Tensor m = mse(derained_feats[l], clean_feats[l]);
        total = total.defined() ? add(total, m) : m;
    }
    return scale(total, real(1) / static_cast<real>(clean_feats.size()));
}

Tensor feature_map_loss(const std::vector<Tensor>& clean_feats,
                        const std::vector<Tensor>& derained_feats, const ParamSet& params,
                        std::string_view detector_prefix) {
    for (const auto& e : params.entries()) {
        if (e.name.size() >= detector_prefix.size() &&
            std::string_view(e.name).substr(0, detector_prefix.size()) == detector_prefix &&
            e.tensor.requires_grad())
            fail("feature_map_loss: detector parameter '" + e.name +
                 "' is trainable; the backbone must be frozen in stage 2");
    }
    return feature_map_loss(clean_feats, derained_feats);
}

Tensor total_loss(int stage, const Tensor& derain_part, const Tensor& downstream_part) {
    const StageWeights w = stage_weights(stage);
    if (!downstream_part.defined()) fail("total_loss: missing downstream part");
    if (stage == 1) {
        if (derain_part.defined())
            fail("total_loss: stage 1 weights the restoration term by zero; none may be supplied");
        return downstream_part;
    }
    if (!derain_part.defined()) fail("total_loss: stage " + std::to_string(stage) +
                                     " requires a restoration term");
    return add(scale(derain_part, static_cast<real>(w.derain_weight)),
               scale(downstream_part, static_cast<real>(w.downstream_weight)));
}

}  // namespace cdrn
