#include "detect/detector.hpp"

#include <cmath>

namespace cdrn {

void DetectorConfig::validate() const {
    if (num_classes < 1) fail("detector config: need at least one class");
    if (base_width < 4 || base_width % 2 != 0) fail("detector config: base_width must be even, >= 4");
    if (fpn_channels < 1) fail("detector config: fpn_channels must be positive");
    float prev = 0;
    for (int l = 0; l < kFpnLevels; ++l) {
        if (!(range_edges[static_cast<std::size_t>(l)] > prev))
            fail("detector config: level ranges must be strictly increasing so they partition (0, inf)");
        prev = range_edges[static_cast<std::size_t>(l)];
        if (l > 0 && strides[static_cast<std::size_t>(l)] != 2 * strides[static_cast<std::size_t>(l) - 1])
            fail("detector config: strides must double per level");
    }
    if (!std::isinf(range_edges[kFpnLevels - 1]))
        fail("detector config: top level range must extend to infinity");
}

BackboneBlock::BackboneBlock(ParamSet& ps, const std::string& name, int cin, int cout, int stride,
                             Rng& rng) {
    conv1 = Conv2dLayer(ps, name + ".conv1", cin, cout, 3, stride, 1, rng);
    conv2 = Conv2dLayer(ps, name + ".conv2", cout, cout, 3, 1, 1, rng);
    projected = stride != 1 || cin != cout;
    if (projected) shortcut = Conv2dLayer(ps, name + ".proj", cin, cout, 1, stride, 0, rng);
}

Tensor BackboneBlock::forward(const Tensor& x) const {
    Tensor h = conv2.forward(relu(conv1.forward(x)));
    Tensor skip = projected ? shortcut.forward(x) : x;
    return relu(add(h, skip));
}

Backbone::Backbone(ParamSet& ps, const std::string& name, int w, Rng& rng) {
    stem1 = Conv2dLayer(ps, name + ".stem1", 3, w / 2, 3, 2, 1, rng);
    stem2 = Conv2dLayer(ps, name + ".stem2", w / 2, w, 3, 2, 1, rng);
    blocks.emplace_back(ps, name + ".c3a", w, w, 2, rng);
    blocks.emplace_back(ps, name + ".c3b", w, w, 1, rng);
    blocks.emplace_back(ps, name + ".c4a", w, 2 * w, 2, rng);
    blocks.emplace_back(ps, name + ".c4b", 2 * w, 2 * w, 1, rng);
    blocks.emplace_back(ps, name + ".c5a", 2 * w, 4 * w, 2, rng);
    blocks.emplace_back(ps, name + ".c5b", 4 * w, 4 * w, 1, rng);
}

std::vector<Tensor> Backbone::forward(const Tensor& img) const {
    if (img.ndim() != 4 || img.dim(1) != 3)
        fail("backbone_forward: expected [N,3,H,W], got " + shape_str(img.shape()));
    if (img.dim(2) % 32 != 0 || img.dim(3) % 32 != 0)
        fail("backbone_forward: H and W must be divisible by 32, got " + shape_str(img.shape()));
    Tensor t = relu(stem2.forward(relu(stem1.forward(img))));
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        t = blocks[i].forward(t);
        if (i % 2 == 1) out.push_back(t);
    }
    return out;
}

Fpn::Fpn(ParamSet& ps, const std::string& name, int w, int f, Rng& rng) {
    const int cs[3] = {w, 2 * w, 4 * w};
    for (int i = 0; i < 3; ++i) {
        lateral.emplace_back(ps, name + ".lat" + std::to_string(i + 3), cs[i], f, 1, 1, 0, rng);
        smooth.emplace_back(ps, name + ".smooth" + std::to_string(i + 3), f, f, 3, 1, 1, rng);
    }
    p6 = Conv2dLayer(ps, name + ".p6", f, f, 3, 2, 1, rng);
    p7 = Conv2dLayer(ps, name + ".p7", f, f, 3, 2, 1, rng);
}

std::vector<Tensor> Fpn::forward(const std::vector<Tensor>& c345) const {
    if (c345.size() != 3) fail("fpn_forward: expected {C3,C4,C5}");
    Tensor m5 = lateral[2].forward(c345[2]);
    Tensor m4 = add(lateral[1].forward(c345[1]), upsample_nearest2(m5));
    Tensor m3 = add(lateral[0].forward(c345[0]), upsample_nearest2(m4));
    std::vector<Tensor> out;
    out.push_back(smooth[0].forward(m3));
    out.push_back(smooth[1].forward(m4));
    out.push_back(smooth[2].forward(m5));
    out.push_back(p6.forward(out[2]));
    out.push_back(p7.forward(out[3]));
    return out;
}

Head::Head(ParamSet& ps, const std::string& name, const DetectorConfig& cfg, Rng& rng)
    : centerness_on_reg(cfg.centerness_on_reg) {
    const int f = cfg.fpn_channels;
    for (int i = 0; i < cfg.tower_depth; ++i) {
        cls_tower.emplace_back(ps, name + ".cls_tower" + std::to_string(i), f, f, 3, 1, 1, rng);
        reg_tower.emplace_back(ps, name + ".reg_tower" + std::to_string(i), f, f, 3, 1, 1, rng);
    }
    cls_out = Conv2dLayer(ps, name + ".cls", f, cfg.num_classes, 3, 1, 1, rng);
    // Bias the classifier towards background so early focal loss stays sane.
    const real prior = static_cast<real>(
        -std::log((1.0 - cfg.prior_probability) / cfg.prior_probability));
    for (real& v : cls_out.b.mut()) v = prior;
    reg_out = Conv2dLayer(ps, name + ".reg", f, 4, 3, 1, 1, rng);
    ctr_out = Conv2dLayer(ps, name + ".ctr", f, 1, 3, 1, 1, rng);
    for (int l = 0; l < kFpnLevels; ++l)
        level_scale.push_back(ps.add(name + ".scale" + std::to_string(l), Tensor::full({1}, 1)));
}

HeadOutput Head::forward(const Tensor& feature, int level, int stride) const {
    Tensor ct = feature;
    for (const auto& c : cls_tower) ct = relu(c.forward(ct));
    Tensor rt = feature;
    for (const auto& c : reg_tower) rt = relu(c.forward(rt));

    HeadOutput out;
    out.cls = cls_out.forward(ct);
    // exp of the scaled raw output gives strictly positive distances in
    // stride units; the input is capped so box extents stay finite.
    Tensor raw = scale_by(reg_out.forward(rt), level_scale[static_cast<std::size_t>(level)]);
    out.ltrb = scale(exp_op(clamp(raw, -12, 12)), static_cast<real>(stride));
    out.ctr = ctr_out.forward(centerness_on_reg ? rt : ct);
    return out;
}

Detector::Detector(const DetectorConfig& cfg, ParamSet& ps, const std::string& prefix, Rng& rng)
    : cfg_(cfg) {
    cfg_.validate();
    backbone_ = Backbone(ps, prefix + ".backbone", cfg_.base_width, rng);
    fpn_ = Fpn(ps, prefix + ".fpn", cfg_.base_width, cfg_.fpn_channels, rng);
    head_ = Head(ps, prefix + ".head", cfg_, rng);
}

std::vector<Tensor> Detector::backbone_forward(const Tensor& img) const {
    return backbone_.forward(img);
}

std::vector<Tensor> Detector::fpn_forward(const std::vector<Tensor>& c345) const {
    return fpn_.forward(c345);
}

DetectorOutput Detector::forward(const Tensor& img) const {
    std::vector<Tensor> ps = fpn_.forward(backbone_.forward(img));
    DetectorOutput out;
    for (int l = 0; l < kFpnLevels; ++l)
        out.levels.push_back(head_.forward(ps[static_cast<std::size_t>(l)], l,
                                           cfg_.strides[static_cast<std::size_t>(l)]));
    return out;
}

std::vector<LevelGrid> Detector::level_grids(int img_h, int img_w) const {
    if (img_h % 32 != 0 || img_w % 32 != 0)
        fail("level_grids: image extents must be divisible by 32");
    std::vector<LevelGrid> grids;
    int h = img_h / 8, w = img_w / 8;
    for (int l = 0; l < kFpnLevels; ++l) {
        grids.push_back({cfg_.strides[static_cast<std::size_t>(l)], h, w});
        // P4/P5 halve exactly; P6/P7 come from stride-2 3x3 convs (pad 1).
        h = l < 2 ? h / 2 : (h - 1) / 2 + 1;
        w = l < 2 ? w / 2 : (w - 1) / 2 + 1;
    }
    return grids;
}

}  // namespace cdrn
