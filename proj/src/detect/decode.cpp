#include "detect/decode.hpp"

#include <algorithm>
#include <cmath>

namespace cdrn {

namespace {
float sigmoidf(float v) {
    if (v >= 0) return 1.0f / (1.0f + std::exp(-v));
    const float e = std::exp(v);
    return e / (1.0f + e);
}
}  // namespace

std::vector<Detection> nms(std::vector<Detection> dets, float iou_threshold, int max_out) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const Detection& d : dets) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.cls == d.cls && iou(k.box, d.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(d);
            if (static_cast<int>(kept.size()) >= max_out) break;
        }
    }
    return kept;
}

std::vector<Detection> decode_detections(const DetectorOutput& out,
                                         const std::vector<LevelGrid>& grids,
                                         const DetectorConfig& cfg, int img_w, int img_h,
                                         int image_index) {
    if (out.levels.size() != grids.size()) fail("decode_detections: level count mismatch");
    std::vector<Detection> candidates;
    for (std::size_t level = 0; level < grids.size(); ++level) {
        const LevelGrid& g = grids[level];
        const HeadOutput& ho = out.levels[level];
        const int hw = g.h * g.w;
        const int classes = ho.cls.dim(1);
        auto cls = ho.cls.values();
        auto ltrb = ho.ltrb.values();
        auto ctr = ho.ctr.values();
        const std::size_t cls_base = static_cast<std::size_t>(image_index) * classes * hw;
        const std::size_t reg_base = static_cast<std::size_t>(image_index) * 4 * hw;
        const std::size_t ctr_base = static_cast<std::size_t>(image_index) * hw;
        for (int i = 0; i < hw; ++i) {
            const float ctr_p = sigmoidf(static_cast<float>(ctr[ctr_base + static_cast<std::size_t>(i)]));
            for (int c = 0; c < classes; ++c) {
                const float cls_p = sigmoidf(
                    static_cast<float>(cls[cls_base + static_cast<std::size_t>(c) * hw + i]));
                const float score = std::sqrt(cls_p * ctr_p);
                if (score <= cfg.score_threshold) continue;
                const int y = i / g.w, x = i % g.w;
                const float px = g.loc_x(x), py = g.loc_y(y);
                Detection d;
                d.cls = c;
                d.score = score;
                d.box.x1 = std::max(0.0f, px - static_cast<float>(ltrb[reg_base + 0 * static_cast<std::size_t>(hw) + i]));
                d.box.y1 = std::max(0.0f, py - static_cast<float>(ltrb[reg_base + 1 * static_cast<std::size_t>(hw) + i]));
                d.box.x2 = std::min(static_cast<float>(img_w), px + static_cast<float>(ltrb[reg_base + 2 * static_cast<std::size_t>(hw) + i]));
                d.box.y2 = std::min(static_cast<float>(img_h), py + static_cast<float>(ltrb[reg_base + 3 * static_cast<std::size_t>(hw) + i]));
                if (!d.box.valid()) continue;
                candidates.push_back(d);
            }
        }
    }
    return nms(std::move(candidates), cfg.nms_iou, cfg.max_detections);
}

}  // namespace cdrn
