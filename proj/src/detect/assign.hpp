#pragma once

#include <vector>

#include "core/tensor.hpp"
#include "detect/boxes.hpp"
#include "detect/detector.hpp"

namespace cdrn {

// Per-location assignment result; cls == -1 marks background.
struct LocationTarget {
    int cls = -1;
    float l = 0, t = 0, r = 0, b = 0;
    float centerness = 0;
};

// sqrt((min(l,r)/max(l,r)) * (min(t,b)/max(t,b))); 0 for a degenerate box.
float centerness_target(float l, float t, float r, float b);

// FCOS assignment for one image: a location is positive iff it lies inside
// some ground-truth box (all four distances >= 0) and max(l,t,r,b) falls in
// the level's half-open range (lo, hi]; ties go to the smallest box area,
// then to the earlier annotation. Output is row-major h*w per level.
std::vector<std::vector<LocationTarget>> assign_targets(const std::vector<Annotation>& gts,
                                                        const std::vector<LevelGrid>& grids,
                                                        const DetectorConfig& cfg);

// Dense per-level tensors ready for the loss ledger.
struct LevelTargets {
    Tensor cls_onehot;   // [N, C, h, w]
    Tensor ltrb;         // [N, 4, h, w] (1 at background, masked out)
    Tensor centerness;   // [N, 1, h, w]
    Tensor pos_mask;     // [N, 1, h, w]
    int num_pos = 0;
};

struct AssignedBatch {
    std::vector<LevelTargets> levels;
    int total_pos = 0;
};

AssignedBatch assign_batch(const std::vector<std::vector<Annotation>>& gts_per_image,
                           const std::vector<LevelGrid>& grids, const DetectorConfig& cfg);

}  // namespace cdrn
