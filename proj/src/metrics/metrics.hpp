#pragma once

#include <vector>

#include "detect/boxes.hpp"
#include "loss/ssim.hpp"

namespace cdrn {

// 10*log10(max^2 / MSE) in dB, capped at 100 for (near-)identical images.
double psnr(const Tensor& x, const Tensor& y, double max_val = 1.0);

// Mean SSIM; accepts [C,H,W] or [N,C,H,W].
double ssim_metric(const Tensor& x, const Tensor& y, const SSIMParams& p = {});

struct EvalProtocol {
    std::vector<double> iou_thresholds;
    int max_detections = 100;

    // COCO-style 0.50:0.05:0.95 sweep with AR@100.
    static EvalProtocol coco();
    static EvalProtocol single(double threshold = 0.5);
    std::string describe() const;
};

struct DetectionEvalResult {
    double map = 0;
    double mar = 0;
    std::vector<double> per_class_ap;  // -1 for classes without ground truth
    std::vector<double> per_class_ar;
};

// Greedy score-ordered matching per class and IoU threshold, 101-point
// interpolated AP, recall at the per-image detection budget. Detections
// overlapping an ignore region (intersection over detection area > 0.5)
// count neither as false positives nor as recall.
DetectionEvalResult evaluate_detections(const std::vector<std::vector<Detection>>& dets_per_image,
                                        const std::vector<std::vector<Annotation>>& gts_per_image,
                                        const std::vector<std::vector<Box>>& ignore_per_image,
                                        int class_count, const EvalProtocol& protocol);

double compute_map(const std::vector<std::vector<Detection>>& dets_per_image,
                   const std::vector<std::vector<Annotation>>& gts_per_image,
                   const std::vector<std::vector<Box>>& ignore_per_image, int class_count,
                   const EvalProtocol& protocol = EvalProtocol::coco());

double compute_mar(const std::vector<std::vector<Detection>>& dets_per_image,
                   const std::vector<std::vector<Annotation>>& gts_per_image,
                   const std::vector<std::vector<Box>>& ignore_per_image, int class_count,
                   const EvalProtocol& protocol = EvalProtocol::coco());

}  // namespace cdrn
