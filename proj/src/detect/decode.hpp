#pragma once

#include <vector>

#include "detect/assign.hpp"

namespace cdrn {

// Class-wise greedy NMS; inputs need not be sorted. Keeps at most `max_out`
// detections, highest score first.
std::vector<Detection> nms(std::vector<Detection> dets, float iou_threshold, int max_out);

// Decodes one image of a batch: score = sqrt(sigmoid(cls) * sigmoid(ctr)),
// thresholded; boxes are location +- ltrb clipped to the image; class-wise
// NMS and a top-k budget finish the list.
std::vector<Detection> decode_detections(const DetectorOutput& out,
                                         const std::vector<LevelGrid>& grids,
                                         const DetectorConfig& cfg, int img_w, int img_h,
                                         int image_index = 0);

}  // namespace cdrn
