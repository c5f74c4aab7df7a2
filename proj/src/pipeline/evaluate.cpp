#include "pipeline/evaluate.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "pipeline/parallel.hpp"

namespace fs = std::filesystem;

namespace cdrn {

namespace {
EvalProtocol protocol_for(const Config& cfg) {
    EvalProtocol p = cfg.eval.single_threshold ? EvalProtocol::single(0.5) : EvalProtocol::coco();
    p.max_detections = cfg.eval.max_detections;
    return p;
}

Tensor as_batch(const Tensor& img) { return reshape(img, {1, img.dim(0), img.dim(1), img.dim(2)}); }
}  // namespace

EvalResult evaluate_model(const Config& cfg, const Model& model,
                          const std::vector<ImageSample>& samples,
                          const std::vector<std::string>& classes) {
    if (samples.empty()) fail("evaluate_model: no samples");
    const EvalProtocol proto = protocol_for(cfg);
    const int class_count = static_cast<int>(classes.size());

    struct Slot {
        ImageMetrics metrics;
        std::vector<Detection> dets_rainy, dets_derained;
        std::vector<Annotation> gts;
        std::vector<Box> ignore;
    };
    std::vector<Slot> slots(samples.size());

    const auto grids = model.detector().level_grids(samples[0].clean.dim(1), samples[0].clean.dim(2));
    parallel_for(samples.size(), [&](std::size_t i) {
        const ImageSample& s = samples[i];
        Slot& slot = slots[i];
        Tensor rainy = as_batch(s.rainy);
        auto [img1, img2] = model.derain().forward(rainy, /*training=*/false);
        Tensor clean = as_batch(s.clean);

        slot.metrics.name = s.name;
        slot.metrics.psnr_rainy = psnr(rainy, clean);
        slot.metrics.psnr_derained = psnr(img2, clean);
        slot.metrics.ssim_rainy = ssim_metric(rainy, clean);
        slot.metrics.ssim_derained = ssim_metric(img2, clean);

        const int w = s.clean.dim(2), h = s.clean.dim(1);
        DetectorOutput on_rainy = model.detector().forward(rainy);
        slot.dets_rainy = decode_detections(on_rainy, grids, model.detector_config(), w, h);
        DetectorOutput on_derained = model.detector().forward(img2);
        slot.dets_derained = decode_detections(on_derained, grids, model.detector_config(), w, h);
        slot.metrics.detections_rainy = static_cast<int>(slot.dets_rainy.size());
        slot.metrics.detections_derained = static_cast<int>(slot.dets_derained.size());
        slot.gts = s.annotations;
        slot.ignore = s.ignore;
    });

    std::vector<std::vector<Detection>> dets_rainy, dets_derained;
    std::vector<std::vector<Annotation>> gts;
    std::vector<std::vector<Box>> ignore;
    double psnr_rainy = 0, psnr_derained = 0, ssim_rainy = 0, ssim_derained = 0;
    EvalResult result;
    for (Slot& slot : slots) {
        psnr_rainy += slot.metrics.psnr_rainy;
        psnr_derained += slot.metrics.psnr_derained;
        ssim_rainy += slot.metrics.ssim_rainy;
        ssim_derained += slot.metrics.ssim_derained;
        dets_rainy.push_back(std::move(slot.dets_rainy));
        dets_derained.push_back(std::move(slot.dets_derained));
        gts.push_back(std::move(slot.gts));
        ignore.push_back(std::move(slot.ignore));
        result.per_image.push_back(std::move(slot.metrics));
    }
    const double n = static_cast<double>(samples.size());
    auto eval_rainy = evaluate_detections(dets_rainy, gts, ignore, class_count, proto);
    auto eval_derained = evaluate_detections(dets_derained, gts, ignore, class_count, proto);
    result.rows.push_back(
        {"rainy-input", psnr_rainy / n, ssim_rainy / n, eval_rainy.map, eval_rainy.mar});
    result.rows.push_back(
        {"derained", psnr_derained / n, ssim_derained / n, eval_derained.map, eval_derained.mar});
    result.protocol = proto.describe();
    return result;
}

void write_eval_outputs(const Config& cfg, const EvalResult& result) {
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream md(fs::path(cfg.out_dir) / "report.md");
        md << render_report_markdown(result.rows, result.protocol);
    }
    {
        std::ofstream csv(fs::path(cfg.out_dir) / "report.csv");
        csv << render_report_csv(result.rows);
    }
    std::ofstream jsonl(fs::path(cfg.out_dir) / "metrics.jsonl");
    for (const ImageMetrics& m : result.per_image) {
        nlohmann::json j;
        j["name"] = m.name;
        j["psnr_rainy"] = m.psnr_rainy;
        j["psnr_derained"] = m.psnr_derained;
        j["ssim_rainy"] = m.ssim_rainy;
        j["ssim_derained"] = m.ssim_derained;
        j["detections_rainy"] = m.detections_rainy;
        j["detections_derained"] = m.detections_derained;
        jsonl << j.dump() << "\n";
    }
}

InferenceResult infer_image(const Model& model, const Tensor& rainy) {
    if (rainy.ndim() != 3 || rainy.dim(0) != 3)
        fail("infer_image: expected a [3,H,W] image, got " + shape_str(rainy.shape()));
    Tensor batch = as_batch(rainy);
    auto [img1, img2] = model.derain().forward(batch, /*training=*/false);
    const int h = rainy.dim(1), w = rainy.dim(2);
    InferenceResult out;
    out.derained = reshape(img2, {3, h, w});
    const auto grids = model.detector().level_grids(h, w);
    out.detections =
        decode_detections(model.detector().forward(img2), grids, model.detector_config(), w, h);
    return out;
}

Tensor draw_detections(const Tensor& img, const std::vector<Detection>& dets) {
    Tensor out = img.clone();
    const int h = out.dim(1), w = out.dim(2);
    auto v = out.mut();
    // palette cycles across classes
    const float palette[6][3] = {{1, 0.1f, 0.1f}, {1, 0.9f, 0.1f}, {0.1f, 0.9f, 1},
                                 {0.2f, 1, 0.2f}, {1, 0.4f, 0.9f}, {0.9f, 0.6f, 0.1f}};
    auto put = [&](int x, int y, const float* rgb) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        for (int c = 0; c < 3; ++c)
            v[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<real>(rgb[c]);
    };
    for (const Detection& d : dets) {
        const float* rgb = palette[static_cast<std::size_t>(d.cls) % 6];
        const int x1 = static_cast<int>(d.box.x1), y1 = static_cast<int>(d.box.y1);
        const int x2 = static_cast<int>(d.box.x2), y2 = static_cast<int>(d.box.y2);
        for (int x = x1; x <= x2; ++x) {
            put(x, y1, rgb);
            put(x, y2, rgb);
        }
        for (int y = y1; y <= y2; ++y) {
            put(x1, y, rgb);
            put(x2, y, rgb);
        }
    }
    return out;
}

}  // namespace cdrn
