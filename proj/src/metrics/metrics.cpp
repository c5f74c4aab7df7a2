#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cdrn {

double psnr(const Tensor& x, const Tensor& y, double max_val) {
    if (!shape_eq(x.shape(), y.shape()))
        fail("psnr: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    auto xv = x.values(), yv = y.values();
    double acc = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = static_cast<double>(xv[i]) - static_cast<double>(yv[i]);
        acc += d * d;
    }
    const double mse_val = acc / static_cast<double>(xv.size());
    if (mse_val <= 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(max_val * max_val / mse_val));
}

double ssim_metric(const Tensor& x, const Tensor& y, const SSIMParams& p) {
    Tensor a = x, b = y;
    if (x.ndim() == 3) {
        a = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
        b = reshape(y, {1, y.dim(0), y.dim(1), y.dim(2)});
    }
    return static_cast<double>(ssim_map(a, b, p).mean_value.item());
}

EvalProtocol EvalProtocol::coco() {
    EvalProtocol p;
    for (int i = 0; i <= 9; ++i) p.iou_thresholds.push_back(0.5 + 0.05 * i);
    return p;
}

EvalProtocol EvalProtocol::single(double threshold) {
    EvalProtocol p;
    p.iou_thresholds = {threshold};
    return p;
}

std::string EvalProtocol::describe() const {
    std::ostringstream os;
    os << "IoU thresholds {";
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
        if (i) os << ", ";
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%.2f", iou_thresholds[i]);
        os << buf;
    }
    os << "}, AR@" << max_detections << ", 101-point interpolated AP";
    return os.str();
}

namespace {

struct ScoredFlag {
    float score;
    int order;  // global tiebreak for a stable sweep
    bool tp;
};

// Per class & threshold matching over every image; returns the AP and the
// recall at the detection budget.
void match_class(const std::vector<std::vector<Detection>>& dets_per_image,
                 const std::vector<std::vector<Annotation>>& gts_per_image,
                 const std::vector<std::vector<Box>>& ignore_per_image, int cls, double thr,
                 double& ap_out, double& ar_out, int& gt_total_out) {
    std::vector<ScoredFlag> flags;
    int gt_total = 0;
    int matched_total = 0;
    int order = 0;
    for (std::size_t img = 0; img < dets_per_image.size(); ++img) {
        std::vector<const Annotation*> gts;
        for (const Annotation& a : gts_per_image[img])
            if (a.cls == cls) gts.push_back(&a);
        gt_total += static_cast<int>(gts.size());

        std::vector<const Detection*> dets;
        for (const Detection& d : dets_per_image[img])
            if (d.cls == cls) dets.push_back(&d);
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection* a, const Detection* b) { return a->score > b->score; });

        std::vector<bool> taken(gts.size(), false);
        for (const Detection* d : dets) {
            int best = -1;
            double best_iou = thr;
            for (std::size_t g = 0; g < gts.size(); ++g) {
                if (taken[g]) continue;
                const double v = iou(d->box, gts[g]->box);
                if (v >= best_iou) {
                    best_iou = v;
                    best = static_cast<int>(g);
                }
            }
            if (best >= 0) {
                taken[static_cast<std::size_t>(best)] = true;
                ++matched_total;
                flags.push_back({d->score, order++, true});
                continue;
            }
            bool ignored = false;
            if (img < ignore_per_image.size()) {
                for (const Box& region : ignore_per_image[img])
                    if (intersection_over_first(d->box, region) > 0.5) {
                        ignored = true;
                        break;
                    }
            }
            if (!ignored) flags.push_back({d->score, order++, false});
        }
    }

    gt_total_out = gt_total;
    if (gt_total == 0) {
        ap_out = -1;
        ar_out = -1;
        return;
    }
    ar_out = static_cast<double>(matched_total) / gt_total;

    std::sort(flags.begin(), flags.end(), [](const ScoredFlag& a, const ScoredFlag& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.order < b.order;
    });
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const ScoredFlag& f : flags) {
        f.tp ? ++tp : ++fp;
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / gt_total);
    }
    // Monotone envelope from the right, then the 101-point average.
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
        precision[static_cast<std::size_t>(i)] =
            std::max(precision[static_cast<std::size_t>(i)], precision[static_cast<std::size_t>(i) + 1]);
    double ap = 0;
    std::size_t idx = 0;
    for (int r = 0; r <= 100; ++r) {
        const double target = r / 100.0;
        while (idx < recall.size() && recall[idx] < target) ++idx;
        ap += idx < precision.size() ? precision[idx] : 0.0;
    }
    ap_out = ap / 101.0;
}

std::vector<std::vector<Detection>> apply_budget(const std::vector<std::vector<Detection>>& dets,
                                                 int max_detections) {
    std::vector<std::vector<Detection>> out = dets;
    for (auto& image : out) {
        std::stable_sort(image.begin(), image.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
        if (static_cast<int>(image.size()) > max_detections) image.resize(static_cast<std::size_t>(max_detections));
    }
    return out;
}

}  // namespace

DetectionEvalResult evaluate_detections(const std::vector<std::vector<Detection>>& dets_per_image,
                                        const std::vector<std::vector<Annotation>>& gts_per_image,
                                        const std::vector<std::vector<Box>>& ignore_per_image,
                                        int class_count, const EvalProtocol& protocol) {
    if (dets_per_image.size() != gts_per_image.size())
        fail("evaluate_detections: detections and ground truth must cover the same images");
    if (protocol.iou_thresholds.empty()) fail("evaluate_detections: no IoU thresholds");
    const auto budgeted = apply_budget(dets_per_image, protocol.max_detections);

    DetectionEvalResult res;
    res.per_class_ap.assign(static_cast<std::size_t>(class_count), -1.0);
    res.per_class_ar.assign(static_cast<std::size_t>(class_count), -1.0);
    double ap_sum = 0, ar_sum = 0;
    int counted = 0;
    for (int c = 0; c < class_count; ++c) {
        double ap_acc = 0, ar_acc = 0;
        bool has_gt = false;
        for (double thr : protocol.iou_thresholds) {
            double ap, ar;
            int gt_total;
            match_class(budgeted, gts_per_image, ignore_per_image, c, thr, ap, ar, gt_total);
            if (gt_total == 0) break;
            has_gt = true;
            ap_acc += ap;
            ar_acc += ar;
        }
        if (!has_gt) continue;
        const double n = static_cast<double>(protocol.iou_thresholds.size());
        res.per_class_ap[static_cast<std::size_t>(c)] = ap_acc / n;
        res.per_class_ar[static_cast<std::size_t>(c)] = ar_acc / n;
        ap_sum += ap_acc / n;
        ar_sum += ar_acc / n;
        ++counted;
    }
    if (counted > 0) {
        res.map = ap_sum / counted;
        res.mar = ar_sum / counted;
    }
    return res;
}

double compute_map(const std::vector<std::vector<Detection>>& dets_per_image,
                   const std::vector<std::vector<Annotation>>& gts_per_image,
                   const std::vector<std::vector<Box>>& ignore_per_image, int class_count,
                   const EvalProtocol& protocol) {
    return evaluate_detections(dets_per_image, gts_per_image, ignore_per_image, class_count,
                               protocol)
        .map;
}

double compute_mar(const std::vector<std::vector<Detection>>& dets_per_image,
                   const std::vector<std::vector<Annotation>>& gts_per_image,
                   const std::vector<std::vector<Box>>& ignore_per_image, int class_count,
                   const EvalProtocol& protocol) {
    return evaluate_detections(dets_per_image, gts_per_image, ignore_per_image, class_count,
                               protocol)
        .mar;
}

}  // namespace cdrn
