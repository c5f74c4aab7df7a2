#pragma once

#include <string>
#include <vector>

namespace cdrn {

// Axis-aligned box in pixel coordinates, corners (x1,y1) top-left and
// (x2,y2) bottom-right, x1 < x2 and y1 < y2 for a valid box.
struct Box {
    float x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    float width() const { return x2 - x1; }
    float height() const { return y2 - y1; }
    float area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0f; }
    bool valid() const { return x1 < x2 && y1 < y2; }
};

struct Annotation {
    int cls = 0;
    Box box;
};

struct Detection {
    int cls = 0;
    Box box;
    float score = 0;
};

float iou(const Box& a, const Box& b);
// Intersection area over the area of `a`; used for ignore-region tests.
float intersection_over_first(const Box& a, const Box& b);

}  // namespace cdrn
