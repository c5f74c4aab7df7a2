#include "detect/boxes.hpp"

#include <algorithm>

namespace cdrn {

namespace {
float intersection_area(const Box& a, const Box& b) {
    const float iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const float ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0 || ih <= 0) return 0.0f;
    return iw * ih;
}
}  // namespace

float iou(const Box& a, const Box& b) {
    const float inter = intersection_area(a, b);
    const float uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0f;
}

float intersection_over_first(const Box& a, const Box& b) {
    const float area = a.area();
    return area > 0 ? intersection_area(a, b) / area : 0.0f;
}

}  // namespace cdrn
