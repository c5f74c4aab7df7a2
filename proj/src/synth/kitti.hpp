#pragma once

#include <string>
#include <vector>

#include "detect/boxes.hpp"

namespace cdrn {

struct KittiLabels {
    std::vector<Annotation> annotations;
    std::vector<Box> ignore;  // DontCare regions
};

// Parses KITTI object-label text: per line `type truncated occluded alpha
// x1 y1 x2 y2 ...` with the 2D box in fields 5-8. Types present in `classes`
// become annotations with that class index; DontCare boxes land in the
// ignore list; other types are dropped. Malformed lines raise an error
// carrying the 1-based line number.
KittiLabels parse_kitti_labels(const std::string& text, const std::vector<std::string>& classes);

}  // namespace cdrn
