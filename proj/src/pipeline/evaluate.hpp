#pragma once

#include "metrics/metrics.hpp"
#include "metrics/report.hpp"
#include "pipeline/model.hpp"

namespace cdrn {

struct ImageMetrics {
    std::string name;
    double psnr_rainy = 0, psnr_derained = 0;
    double ssim_rainy = 0, ssim_derained = 0;
    int detections_rainy = 0, detections_derained = 0;
};

struct EvalResult {
    std::vector<EvalRow> rows;  // "rainy-input" baseline, then "derained"
    std::vector<ImageMetrics> per_image;
    std::string protocol;
};

// Restoration and detection metrics over a sample list, the detector run on
// both the rainy input (baseline) and the restored output. Per-image work
// parallelizes; aggregation is index-ordered.
EvalResult evaluate_model(const Config& cfg, const Model& model,
                          const std::vector<ImageSample>& samples,
                          const std::vector<std::string>& classes);

// Writes report.md, report.csv and metrics.jsonl under cfg.out_dir.
void write_eval_outputs(const Config& cfg, const EvalResult& result);

struct InferenceResult {
    Tensor derained;  // [3,H,W] clamped
    std::vector<Detection> detections;
};

InferenceResult infer_image(const Model& model, const Tensor& rainy);

// Copy of the image with one 1-px class-colored rectangle per detection.
Tensor draw_detections(const Tensor& img, const std::vector<Detection>& dets);

}  // namespace cdrn
