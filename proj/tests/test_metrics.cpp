#include <cmath>

#include "doctest.h"
#include "metrics/metrics.hpp"
#include "metrics/report.hpp"
#include "oracles.hpp"

using namespace cdrn;

namespace {

// Exhaustive reference matcher: per class and threshold it walks detections
// in score order against every remaining ground truth (no sorting tricks,
// fresh double-precision IoU), then derives AP by scanning all prefixes for
// each of the 101 recall points.
struct RefResult {
    double map, mar;
};

double ref_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double ua = (static_cast<double>(a.x2) - a.x1) * (static_cast<double>(a.y2) - a.y1);
    const double ub = (static_cast<double>(b.x2) - b.x1) * (static_cast<double>(b.y2) - b.y1);
    const double uni = ua + ub - inter;
    return uni > 0 ? inter / uni : 0.0;
}

RefResult brute_force_eval(std::vector<std::vector<Detection>> dets,
                           const std::vector<std::vector<Annotation>>& gts, int classes,
                           const std::vector<double>& thresholds, int budget) {
    for (auto& image : dets) {
        std::stable_sort(image.begin(), image.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
        if (static_cast<int>(image.size()) > budget) image.resize(static_cast<std::size_t>(budget));
    }
    double ap_total = 0, ar_total = 0;
    int counted = 0;
    for (int c = 0; c < classes; ++c) {
        int gt_count = 0;
        for (const auto& image : gts)
            for (const auto& a : image)
                if (a.cls == c) ++gt_count;
        if (gt_count == 0) continue;
        ++counted;
        for (double thr : thresholds) {
            struct Flagged {
                float score;
                bool tp;
            };
            std::vector<Flagged> all;
            int matched = 0;
            for (std::size_t img = 0; img < dets.size(); ++img) {
                std::vector<bool> used(gts[img].size(), false);
                for (const Detection& d : dets[img]) {
                    if (d.cls != c) continue;
                    int best = -1;
                    double best_v = 0;
                    for (std::size_t g = 0; g < gts[img].size(); ++g) {
                        if (gts[img][g].cls != c || used[g]) continue;
                        const double v = ref_iou(d.box, gts[img][g].box);
                        if (v >= thr && v > best_v) {
                            best_v = v;
                            best = static_cast<int>(g);
                        }
                    }
                    if (best >= 0) {
                        used[static_cast<std::size_t>(best)] = true;
                        ++matched;
                        all.push_back({d.score, true});
                    } else {
                        all.push_back({d.score, false});
                    }
                }
            }
            std::stable_sort(all.begin(), all.end(),
                             [](const Flagged& a, const Flagged& b) { return a.score > b.score; });
            double ap = 0;
            for (int r = 0; r <= 100; ++r) {
                const double target = r / 100.0;
                double best_p = 0;
                int tp = 0, fp = 0;
                for (const Flagged& f : all) {
                    f.tp ? ++tp : ++fp;
                    const double recall = static_cast<double>(tp) / gt_count;
                    const double precision = static_cast<double>(tp) / (tp + fp);
                    if (recall >= target) best_p = std::max(best_p, precision);
                }
                ap += best_p;
            }
            ap_total += ap / 101.0;
            ar_total += static_cast<double>(matched) / gt_count;
        }
    }
    if (counted == 0) return {0, 0};
    const double n = static_cast<double>(counted) * thresholds.size();
    return {ap_total / n, ar_total / n};
}

}  // namespace

TEST_CASE("psnr values") {
    Rng rng(601);
    Tensor x = oracle::random_tensor({3, 8, 8}, rng, 0, 1);
    CHECK(psnr(x, x) == 100.0);
    CHECK(psnr(Tensor::zeros({3, 4, 4}), Tensor::full({3, 4, 4}, 1)) == doctest::Approx(0.0));

    Tensor y = oracle::random_tensor({3, 8, 8}, rng, 0, 1);
    double acc = 0;
    auto xv = x.values(), yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = static_cast<double>(xv[i]) - yv[i];
        acc += d * d;
    }
    const double want = 10.0 * std::log10(1.0 / (acc / static_cast<double>(xv.size())));
    CHECK(psnr(x, y) == doctest::Approx(want).epsilon(1e-9));
    CHECK(psnr(x, y) == doctest::Approx(psnr(y, x)).epsilon(1e-12));
}

TEST_CASE("ssim metric: identity, oracle, and noise monotonicity") {
    Rng rng(602);
    Tensor x = oracle::random_tensor({3, 16, 16}, rng, 0, 1);
    CHECK(ssim_metric(x, x) == 1.0);

    Tensor y = oracle::random_tensor({3, 16, 16}, rng, 0, 1);
    auto ref = oracle::naive_ssim(oracle::to_double(x), oracle::to_double(y), 3, 16, 16);
    CHECK(ssim_metric(x, y) == doctest::Approx(ref.mean).epsilon(1e-6));

    double prev = 1.0;
    for (double level : {0.02, 0.05, 0.1, 0.2, 0.4}) {
        Rng nrng(603);
        Tensor noisy = x.clone();
        for (real& v : noisy.mut())
            v = static_cast<real>(std::clamp(static_cast<double>(v) + nrng.normal(0, level), 0.0, 1.0));
        const double s = ssim_metric(x, noisy);
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("map: perfect single detection") {
    std::vector<std::vector<Annotation>> gts = {{{0, Box{10, 10, 50, 40}}}};
    std::vector<std::vector<Detection>> dets = {{{0, Box{10, 10, 50, 40}, 0.9f}}};
    auto res = evaluate_detections(dets, gts, {{}}, 3, EvalProtocol::coco());
    CHECK(res.map == doctest::Approx(1.0));
    CHECK(res.mar == doctest::Approx(1.0));
    CHECK(res.per_class_ap[0] == doctest::Approx(1.0));
    CHECK(res.per_class_ap[1] == -1);  // no ground truth for other classes
}

TEST_CASE("map: IoU 0.4 detection scores zero at threshold 0.5") {
    std::vector<std::vector<Annotation>> gts = {{{0, Box{0, 0, 10, 10}}}};
    // Box shifted to overlap 40/ (100+40... construct IoU ~ 0.4: area both
    // 100, intersection ~57: iou = 57/143 ~ 0.4.
    std::vector<std::vector<Detection>> dets = {{{0, Box{3.5f, 2.0f, 13.5f, 12.0f}, 0.8f}}};
    const double v = iou(gts[0][0].box, dets[0][0].box);
    REQUIRE(v > 0.35);
    REQUIRE(v < 0.45);
    CHECK(compute_map(dets, gts, {{}}, 1, EvalProtocol::single(0.5)) == doctest::Approx(0.0));
    CHECK(compute_map(dets, gts, {{}}, 1, EvalProtocol::single(0.3)) == doctest::Approx(1.0));
}

TEST_CASE("map and mar match the exhaustive matcher over 20 random scenes") {
    Rng rng(604);
    EvalProtocol proto = EvalProtocol::coco();
    std::vector<std::vector<Annotation>> gts;
    std::vector<std::vector<Detection>> dets;
    std::vector<std::vector<Box>> ignore;
    for (int scene = 0; scene < 20; ++scene) {
        std::vector<Annotation> g;
        std::vector<Detection> d;
        const int ngts = 1 + static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < ngts; ++i) {
            Annotation a;
            a.cls = static_cast<int>(rng.uniform_int(3));
            a.box.x1 = static_cast<float>(rng.uniform(0, 100));
            a.box.y1 = static_cast<float>(rng.uniform(0, 60));
            a.box.x2 = a.box.x1 + static_cast<float>(rng.uniform(8, 50));
            a.box.y2 = a.box.y1 + static_cast<float>(rng.uniform(8, 40));
            g.push_back(a);
            // jittered detection, sometimes wrong class, sometimes missing
            if (rng.uniform() < 0.85) {
                Detection det;
                det.cls = rng.uniform() < 0.85 ? a.cls : static_cast<int>(rng.uniform_int(3));
                const float jx = static_cast<float>(rng.uniform(-6, 6));
                const float jy = static_cast<float>(rng.uniform(-6, 6));
                det.box = Box{a.box.x1 + jx, a.box.y1 + jy, a.box.x2 + jx, a.box.y2 + jy};
                det.score = static_cast<float>(rng.uniform(0.05, 1.0));
                d.push_back(det);
            }
        }
        const int spurious = static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < spurious; ++i) {
            Detection det;
            det.cls = static_cast<int>(rng.uniform_int(3));
            det.box.x1 = static_cast<float>(rng.uniform(0, 120));
            det.box.y1 = static_cast<float>(rng.uniform(0, 80));
            det.box.x2 = det.box.x1 + static_cast<float>(rng.uniform(5, 30));
            det.box.y2 = det.box.y1 + static_cast<float>(rng.uniform(5, 30));
            det.score = static_cast<float>(rng.uniform(0.05, 1.0));
            d.push_back(det);
        }
        gts.push_back(std::move(g));
        dets.push_back(std::move(d));
        ignore.push_back({});
    }
    auto res = evaluate_detections(dets, gts, ignore, 3, proto);
    auto ref = brute_force_eval(dets, gts, 3, proto.iou_thresholds, proto.max_detections);
    CHECK(res.map == doctest::Approx(ref.map).epsilon(1e-9));
    CHECK(res.mar == doctest::Approx(ref.mar).epsilon(1e-9));
}

TEST_CASE("map is invariant under monotone score transforms") {
    Rng rng(605);
    std::vector<std::vector<Annotation>> gts = {
        {{0, Box{5, 5, 30, 25}}, {0, Box{40, 10, 90, 50}}, {1, Box{10, 40, 35, 70}}}};
    std::vector<std::vector<Detection>> dets = {{
        {0, Box{6, 6, 31, 24}, 0.7f},
        {0, Box{42, 12, 88, 52}, 0.5f},
        {0, Box{60, 60, 80, 80}, 0.3f},
        {1, Box{11, 39, 36, 69}, 0.6f},
    }};
    const double base = compute_map(dets, gts, {{}}, 2);
    auto transformed = dets;
    for (auto& image : transformed)
        for (auto& d : image) d.score = 0.1f + 0.5f * d.score * d.score;  // monotone on (0,1)
    CHECK(compute_map(transformed, gts, {{}}, 2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("duplicate detections never increase ap") {
    std::vector<std::vector<Annotation>> gts = {{{0, Box{10, 10, 40, 40}}}};
    std::vector<std::vector<Detection>> dets = {{{0, Box{10, 10, 40, 40}, 0.9f}}};
    const double base = compute_map(dets, gts, {{}}, 1);
    auto doubled = dets;
    doubled[0].push_back({0, Box{10, 10, 40, 40}, 0.8f});  // duplicate of a matched box
    CHECK(compute_map(doubled, gts, {{}}, 1) <= base + 1e-12);
}

TEST_CASE("ignore regions absorb would-be false positives") {
    std::vector<std::vector<Annotation>> gts = {{{0, Box{10, 10, 40, 40}}}};
    std::vector<std::vector<Box>> ignore = {{Box{60, 60, 100, 100}}};
    std::vector<std::vector<Detection>> dets = {{
        {0, Box{10, 10, 40, 40}, 0.8f},
        {0, Box{65, 65, 95, 95}, 0.95f},  // inside the ignore region
    }};
    CHECK(compute_map(dets, gts, ignore, 1) == doctest::Approx(1.0));
    // Without the region the same spurious box halves precision at low recall.
    CHECK(compute_map(dets, gts, {{}}, 1) < 1.0);
}

TEST_CASE("mar: perfect, empty and budgeted recall") {
    std::vector<std::vector<Annotation>> gts = {
        {{0, Box{10, 10, 40, 40}}, {0, Box{50, 50, 90, 90}}}};
    std::vector<std::vector<Detection>> full = {{
        {0, Box{10, 10, 40, 40}, 0.9f},
        {0, Box{50, 50, 90, 90}, 0.8f},
    }};
    CHECK(compute_mar(full, gts, {{}}, 1) == doctest::Approx(1.0));
    CHECK(compute_mar({{}}, gts, {{}}, 1) == doctest::Approx(0.0));

    EvalProtocol budget1 = EvalProtocol::coco();
    budget1.max_detections = 1;
    CHECK(compute_mar(full, gts, {{}}, 1, budget1) == doctest::Approx(0.5));
}

TEST_CASE("report rendering matches the expected row format") {
    std::vector<EvalRow> rows = {{"Ours", 42.71, 0.9940, 0.5709, 0.6606}};
    const std::string md = render_report_markdown(rows, EvalProtocol::coco().describe());
    CHECK(md.find("42.71 | 0.9940 | 0.5709 | 0.6606") != std::string::npos);
    CHECK(md.find("| Model | PSNR | SSIM | mAP | mAR |") != std::string::npos);
    CHECK(md.find("IoU thresholds") != std::string::npos);  // protocol flagged in the header

    const std::string empty_md = render_report_markdown({}, "");
    CHECK(empty_md.find("| Model | PSNR | SSIM | mAP | mAR |") != std::string::npos);
    CHECK(empty_md.find("Ours") == std::string::npos);
}

TEST_CASE("report csv round trip is lossless") {
    std::vector<EvalRow> rows = {{"rainy", 17.234567891234, 0.712345678912345, 0.1234, 0.2345},
                                 {"ours", 28.9, 0.95, 0.5, 0.66}};
    auto parsed = parse_report_csv(render_report_csv(rows));
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].model == rows[i].model);
        CHECK(parsed[i].psnr == rows[i].psnr);
        CHECK(parsed[i].ssim == rows[i].ssim);
        CHECK(parsed[i].map == rows[i].map);
        CHECK(parsed[i].mar == rows[i].mar);
    }
    CHECK_THROWS_AS(parse_report_csv("bogus\n1,2,3"), std::runtime_error);
}
