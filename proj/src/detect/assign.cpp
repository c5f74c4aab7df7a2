#include "detect/assign.hpp"

#include <cmath>

namespace cdrn {

float centerness_target(float l, float t, float r, float b) {
    const float mx_lr = std::max(l, r);
    const float mx_tb = std::max(t, b);
    if (mx_lr <= 0 || mx_tb <= 0) return 0.0f;
    const float ratio = (std::min(l, r) / mx_lr) * (std::min(t, b) / mx_tb);
    return std::sqrt(ratio);
}

std::vector<std::vector<LocationTarget>> assign_targets(const std::vector<Annotation>& gts,
                                                        const std::vector<LevelGrid>& grids,
                                                        const DetectorConfig& cfg) {
    std::vector<std::vector<LocationTarget>> out;
    out.reserve(grids.size());
    for (std::size_t level = 0; level < grids.size(); ++level) {
        const LevelGrid& g = grids[level];
        const float lo = cfg.range_lo(static_cast<int>(level));
        const float hi = cfg.range_hi(static_cast<int>(level));
        std::vector<LocationTarget> targets(static_cast<std::size_t>(g.h) * g.w);
        for (int y = 0; y < g.h; ++y) {
            for (int x = 0; x < g.w; ++x) {
                const float px = g.loc_x(x);
                const float py = g.loc_y(y);
                LocationTarget& tgt = targets[static_cast<std::size_t>(y) * g.w + x];
                float best_area = std::numeric_limits<float>::infinity();
                for (const Annotation& a : gts) {
                    const float l = px - a.box.x1;
                    const float t = py - a.box.y1;
                    const float r = a.box.x2 - px;
                    const float b = a.box.y2 - py;
                    if (l < 0 || t < 0 || r < 0 || b < 0) continue;
                    const float m = std::max(std::max(l, r), std::max(t, b));
                    if (!(m > lo) || !(m <= hi)) continue;
                    const float area = a.box.area();
                    if (area >= best_area) continue;
                    best_area = area;
                    tgt.cls = a.cls;
                    tgt.l = l;
                    tgt.t = t;
                    tgt.r = r;
                    tgt.b = b;
                    tgt.centerness = centerness_target(l, t, r, b);
                }
            }
        }
        out.push_back(std::move(targets));
    }
    return out;
}

AssignedBatch assign_batch(const std::vector<std::vector<Annotation>>& gts_per_image,
                           const std::vector<LevelGrid>& grids, const DetectorConfig& cfg) {
    const int n = static_cast<int>(gts_per_image.size());
    AssignedBatch batch;
    std::vector<std::vector<std::vector<LocationTarget>>> per_image;
    per_image.reserve(static_cast<std::size_t>(n));
    for (const auto& gts : gts_per_image) per_image.push_back(assign_targets(gts, grids, cfg));

    for (std::size_t level = 0; level < grids.size(); ++level) {
        const LevelGrid& g = grids[level];
        const int hw = g.h * g.w;
        LevelTargets lt;
        lt.cls_onehot = Tensor::zeros({n, cfg.num_classes, g.h, g.w});
        lt.ltrb = Tensor::full({n, 4, g.h, g.w}, 1);
        lt.centerness = Tensor::zeros({n, 1, g.h, g.w});
        lt.pos_mask = Tensor::zeros({n, 1, g.h, g.w});
        auto cls = lt.cls_onehot.mut();
        auto ltrb = lt.ltrb.mut();
        auto ctr = lt.centerness.mut();
        auto mask = lt.pos_mask.mut();
        for (int ni = 0; ni < n; ++ni) {
            const auto& targets = per_image[static_cast<std::size_t>(ni)][level];
            for (int i = 0; i < hw; ++i) {
                const LocationTarget& t = targets[static_cast<std::size_t>(i)];
                if (t.cls < 0) continue;
                ++lt.num_pos;
                cls[(static_cast<std::size_t>(ni) * cfg.num_classes + t.cls) * hw + i] = 1;
                const std::size_t base = static_cast<std::size_t>(ni) * 4 * hw;
                ltrb[base + 0 * hw + i] = static_cast<real>(t.l);
                ltrb[base + 1 * hw + i] = static_cast<real>(t.t);
                ltrb[base + 2 * hw + i] = static_cast<real>(t.r);
                ltrb[base + 3 * hw + i] = static_cast<real>(t.b);
                ctr[static_cast<std::size_t>(ni) * hw + i] = static_cast<real>(t.centerness);
                mask[static_cast<std::size_t>(ni) * hw + i] = 1;
            }
        }
        batch.total_pos += lt.num_pos;
        batch.levels.push_back(std::move(lt));
    }
    return batch;
}

}  // namespace cdrn
