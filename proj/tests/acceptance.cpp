// Acceptance suite: one checkable criterion per function, each printing a
// single [PASS]/[FAIL] line. Run everything or a single one via
// `--criterion N`. Exit status is nonzero if any executed criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "loss/losses.hpp"
#include "metrics/metrics.hpp"
#include "oracles.hpp"
#include "pipeline/evaluate.hpp"
#include "pipeline/gradcheck_suite.hpp"
#include "pipeline/trainer.hpp"

using namespace cdrn;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string title;
    std::function<bool(std::string&)> run;
};

fs::path work_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("cdrn_accept_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------- criterion 1: gradient suite ----------

bool criterion_gradients(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteOptions opts;  // precision-default tolerance, 10 seeds per check
    auto reports = run_gradcheck_suite(opts);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = 0;
    std::string worst_name;
    for (const auto& r : reports) {
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = r.name;
        }
        if (!r.pass) {
            detail = r.name + " failed: max_rel_err=" + std::to_string(r.max_rel_err) + " " + r.detail;
            return false;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu checks, worst %.2e (%s), tol %.0e, %.1f s", reports.size(),
                  worst, worst_name.c_str(), gradcheck_default_tol(), dt);
    detail = buf;
    return dt < 120.0;
}

// ---------- criterion 2: ssim oracle ----------

bool criterion_ssim_oracle(std::string& detail) {
    Rng rng(0x551);
    double worst_mean_diff = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = oracle::random_tensor({1, 1, 16, 16}, rng, 0, 1);
        Tensor y = oracle::random_tensor({1, 1, 16, 16}, rng, 0, 1);
        auto res = ssim_map(x, y);
        auto ref = oracle::naive_ssim(oracle::to_double(x), oracle::to_double(y), 1, 16, 16);
        double acc = 0;
        auto mv = res.map.values();
        for (std::size_t i = 0; i < mv.size(); ++i)
            acc += std::abs(static_cast<double>(mv[i]) - ref.map[i]);
        worst_mean_diff = std::max(worst_mean_diff, acc / static_cast<double>(mv.size()));
    }
    Tensor x = oracle::random_tensor({2, 3, 16, 16}, rng, 0, 1);
    const bool identity_exact = ssim_map(x, x).mean_value.item() == real(1);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "mean |map - reference| worst %.2e over 100 pairs; SSIM(x,x) %s",
                  worst_mean_diff, identity_exact ? "== 1 exactly" : "NOT exact");
    detail = buf;
    return worst_mean_diff < 1e-6 && identity_exact;
}

// ---------- criterion 3: loss identities ----------

bool criterion_loss_identities(std::string& detail) {
    Rng rng(0x3);
    // focal(gamma=0, alpha off) == BCE
    Tensor logits = oracle::random_tensor({1, 3, 4, 4}, rng, -3, 3);
    Tensor targets = Tensor::zeros({1, 3, 4, 4});
    int npos = 0;
    {
        auto t = targets.mut();
        for (std::size_t i = 0; i < t.size(); i += 3) {
            t[i] = 1;
            ++npos;
        }
    }
    const double focal = focal_loss({logits}, {targets}, npos, 0, 0).item();
    double acc = 0;
    {
        auto lv = logits.values();
        auto tv = targets.values();
        for (std::size_t i = 0; i < lv.size(); ++i) {
            const real x = lv[i];
            const real sp_pos = std::max(-x, real(0)) + std::log1p(std::exp(-std::abs(x)));
            const real sp_neg = std::max(x, real(0)) + std::log1p(std::exp(-std::abs(x)));
            acc += static_cast<double>(tv[i] * sp_pos + (real(1) - tv[i]) * sp_neg);
        }
    }
    const double bce = static_cast<double>(static_cast<real>(acc)) *
                       static_cast<double>(real(1) / static_cast<real>(npos));
    if (std::abs(focal - bce) > 1e-9 * std::max(1.0, std::abs(bce)) + 1e-9) {
        detail = "focal/BCE identity violated: diff=" + std::to_string(std::abs(focal - bce));
        return false;
    }

    // GIoU range over 1000 random pairs
    for (int i = 0; i < 1000; ++i) {
        Box a, b;
        a.x1 = static_cast<float>(rng.uniform(0, 100));
        a.y1 = static_cast<float>(rng.uniform(0, 100));
        a.x2 = a.x1 + static_cast<float>(rng.uniform(0.1, 80));
        a.y2 = a.y1 + static_cast<float>(rng.uniform(0.1, 80));
        b.x1 = static_cast<float>(rng.uniform(0, 100));
        b.y1 = static_cast<float>(rng.uniform(0, 100));
        b.x2 = b.x1 + static_cast<float>(rng.uniform(0.1, 80));
        b.y2 = b.y1 + static_cast<float>(rng.uniform(0.1, 80));
        const double g = giou_boxes(a, b);
        if (g < -1.0 || g > 1.0) {
            detail = "GIoU out of range: " + std::to_string(g);
            return false;
        }
    }

    // corner-touching unit boxes
    Tensor pred = Tensor::from({1, 4, 1, 1}, {1, 1, 0, 0});
    Tensor target = Tensor::from({1, 4, 1, 1}, {0, 0, 1, 1});
    Tensor w = Tensor::full({1, 1, 1, 1}, 1);
    const double corner = giou_loss({pred}, {target}, {w}, {w}).item();
    if (std::abs(corner - 1.5) > 1e-6) {
        detail = "corner-touch GIoU loss expected 1.5, got " + std::to_string(corner);
        return false;
    }
    if (std::abs(giou_boxes(Box{0, 0, 1, 1}, Box{1, 1, 2, 2}) + 0.5) > 1e-9) {
        detail = "corner-touch GIoU expected -0.5";
        return false;
    }

    // stage weight ledger
    const StageWeights w1 = stage_weights(1), w2 = stage_weights(2), w3 = stage_weights(3);
    const bool weights_ok = w1.derain_weight == 0.0 && w1.downstream_weight == 1.0 &&
                            w2.derain_weight == 1.0 && w2.downstream_weight == 0.1 &&
                            w3.derain_weight == 1.0 && w3.downstream_weight == 0.5;
    if (!weights_ok) {
        detail = "stage weights differ from (0,1), (1,0.1), (1,0.5)";
        return false;
    }
    const double td = 0.8, dd = 0.4;
    const bool total_ok =
        total_loss(1, Tensor(), Tensor::scalar(real(dd))).item() == real(dd) &&
        std::abs(total_loss(2, Tensor::scalar(real(td)), Tensor::scalar(real(dd))).item() -
                 (td + 0.1 * dd)) < 1e-7 &&
        std::abs(total_loss(3, Tensor::scalar(real(td)), Tensor::scalar(real(dd))).item() -
                 (td + 0.5 * dd)) < 1e-7;
    if (!total_ok) {
        detail = "stage totals do not reproduce a*L_Derain + beta*L_Downstream";
        return false;
    }
    detail = "focal/BCE diff <= 1e-9; GIoU in [-1,1] x1000; corner case -0.5; stage weights exact";
    return true;
}

// ---------- criterion 4: assignment oracle ----------

bool criterion_assignment(std::string& detail) {
    DetectorConfig cfg;
    std::vector<LevelGrid> grids = {{8, 12, 20}, {16, 6, 10}, {32, 3, 5}, {64, 2, 3}, {128, 1, 2}};
    Rng rng(0x44);
    int positives = 0;
    for (int scene = 0; scene < 50; ++scene) {
        std::vector<Annotation> gts;
        const int n = 1 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < n; ++i) {
            Annotation a;
            a.cls = static_cast<int>(rng.uniform_int(3));
            const float w = static_cast<float>(rng.uniform(4.0, 150.0));
            const float h = static_cast<float>(rng.uniform(4.0, 90.0));
            a.box.x1 = static_cast<float>(rng.uniform(0.0, 160.0 - w));
            a.box.y1 = static_cast<float>(rng.uniform(0.0, 96.0 - h));
            a.box.x2 = a.box.x1 + w;
            a.box.y2 = a.box.y1 + h;
            gts.push_back(a);
        }
        if (rng.uniform() < 0.5 && gts[0].box.width() > 12 && gts[0].box.height() > 12) {
            Annotation inner;  // nested box
            inner.cls = static_cast<int>(rng.uniform_int(3));
            inner.box = Box{gts[0].box.x1 + 4, gts[0].box.y1 + 4, gts[0].box.x2 - 4,
                            gts[0].box.y2 - 4};
            gts.push_back(inner);
        }

        auto got = assign_targets(gts, grids, cfg);
        // Brute-force triple loop, doubles throughout.
        for (std::size_t lvl = 0; lvl < grids.size(); ++lvl) {
            const LevelGrid& g = grids[lvl];
            const double lo = lvl == 0 ? 0.0 : cfg.range_edges[lvl - 1];
            const double hi = cfg.range_edges[lvl];
            for (int y = 0; y < g.h; ++y)
                for (int x = 0; x < g.w; ++x) {
                    const double px = g.stride * 0.5 + static_cast<double>(x) * g.stride;
                    const double py = g.stride * 0.5 + static_cast<double>(y) * g.stride;
                    int best = -1;
                    double best_area = 0;
                    for (std::size_t bi = 0; bi < gts.size(); ++bi) {
                        const Box& b = gts[bi].box;
                        const double l = px - b.x1, t = py - b.y1, r = b.x2 - px, d = b.y2 - py;
                        if (std::min(std::min(l, t), std::min(r, d)) < 0) continue;
                        const double m = std::max(std::max(l, t), std::max(r, d));
                        if (m <= lo || m > hi) continue;
                        const double area =
                            static_cast<double>(b.x2 - b.x1) * static_cast<double>(b.y2 - b.y1);
                        if (best >= 0 && area >= best_area) continue;
                        best = static_cast<int>(bi);
                        best_area = area;
                    }
                    const LocationTarget& lt = got[lvl][static_cast<std::size_t>(y) * g.w + x];
                    const int want_cls = best >= 0 ? gts[static_cast<std::size_t>(best)].cls : -1;
                    if (lt.cls != want_cls) {
                        detail = "disagreement at scene " + std::to_string(scene) + " level " +
                                 std::to_string(lvl);
                        return false;
                    }
                    if (best >= 0) {
                        ++positives;
                        const Box& b = gts[static_cast<std::size_t>(best)].box;
                        const double diffs[] = {
                            std::abs(lt.l - (px - b.x1)), std::abs(lt.t - (py - b.y1)),
                            std::abs(lt.r - (b.x2 - px)), std::abs(lt.b - (b.y2 - py))};
                        for (double d2 : diffs)
                            if (d2 > 1e-4) {
                                detail = "distance mismatch at scene " + std::to_string(scene);
                                return false;
                            }
                    }
                }
        }
    }
    detail = "0 disagreements over 50 scenes (" + std::to_string(positives) + " positive locations)";
    return positives > 200;
}

// ---------- criterion 5: mAP oracle ----------

double ref_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = static_cast<double>(a.area()) + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

bool criterion_map_oracle(std::string& detail) {
    // perfect-detection scene first
    {
        std::vector<std::vector<Annotation>> gts = {{{0, Box{5, 5, 30, 25}}, {1, Box{40, 40, 70, 80}}}};
        std::vector<std::vector<Detection>> dets = {
            {{0, Box{5, 5, 30, 25}, 0.9f}, {1, Box{40, 40, 70, 80}, 0.8f}}};
        auto res = evaluate_detections(dets, gts, {{}}, 2, EvalProtocol::coco());
        if (res.map != 1.0 || res.mar != 1.0) {
            detail = "perfect scene expected mAP = mAR = 1.0, got " + std::to_string(res.map) + "/" +
                     std::to_string(res.mar);
            return false;
        }
    }

    Rng rng(0x55);
    EvalProtocol proto = EvalProtocol::coco();
    std::vector<std::vector<Annotation>> gts;
    std::vector<std::vector<Detection>> dets;
    for (int scene = 0; scene < 20; ++scene) {
        std::vector<Annotation> g;
        std::vector<Detection> d;
        const int n = 1 + static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < n; ++i) {
            Annotation a;
            a.cls = static_cast<int>(rng.uniform_int(3));
            a.box.x1 = static_cast<float>(rng.uniform(0, 100));
            a.box.y1 = static_cast<float>(rng.uniform(0, 60));
            a.box.x2 = a.box.x1 + static_cast<float>(rng.uniform(8, 50));
            a.box.y2 = a.box.y1 + static_cast<float>(rng.uniform(8, 40));
            g.push_back(a);
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
        for (int i = 0; i < static_cast<int>(rng.uniform_int(3)); ++i) {
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
    }

    // Exhaustive reference: per class/threshold walk every detection in
    // score order against every remaining ground truth, then scan all
    // prefixes for each of the 101 recall points.
    auto budgeted = dets;
    for (auto& image : budgeted) {
        std::stable_sort(image.begin(), image.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
        if (static_cast<int>(image.size()) > proto.max_detections)
            image.resize(static_cast<std::size_t>(proto.max_detections));
    }
    double ap_total = 0, ar_total = 0;
    int counted = 0;
    for (int c = 0; c < 3; ++c) {
        int gt_count = 0;
        for (const auto& image : gts)
            for (const auto& a : image)
                if (a.cls == c) ++gt_count;
        if (gt_count == 0) continue;
        ++counted;
        for (double thr : proto.iou_thresholds) {
            struct Flagged {
                float score;
                bool tp;
            };
            std::vector<Flagged> all;
            int matched = 0;
            for (std::size_t img = 0; img < budgeted.size(); ++img) {
                std::vector<bool> used(gts[img].size(), false);
                for (const Detection& d : budgeted[img]) {
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
                double best_p = 0;
                int tp = 0, fp = 0;
                for (const Flagged& f : all) {
                    f.tp ? ++tp : ++fp;
                    if (static_cast<double>(tp) / gt_count >= r / 100.0)
                        best_p = std::max(best_p, static_cast<double>(tp) / (tp + fp));
                }
                ap += best_p;
            }
            ap_total += ap / 101.0;
            ar_total += static_cast<double>(matched) / gt_count;
        }
    }
    const double ref_map = ap_total / (counted * proto.iou_thresholds.size());
    const double ref_mar = ar_total / (counted * proto.iou_thresholds.size());

    auto res = evaluate_detections(dets, gts, {}, 3, proto);
    if (std::abs(res.map - ref_map) > 1e-9 || std::abs(res.mar - ref_mar) > 1e-9) {
        detail = "mAP/mAR disagree with the exhaustive matcher: " + std::to_string(res.map) + " vs " +
                 std::to_string(ref_map);
        return false;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "exact agreement on 20 scenes (mAP %.4f, mAR %.4f); perfect scene = 1.0",
                  res.map, res.mar);
    detail = buf;
    return true;
}

// ---------- criterion 6: overfit viability ----------

bool criterion_overfit(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    // 4 synthetic 64x64 pairs; the rain is dense enough at this size to pull
    // SSIM(rainy, clean) well below the 0.95 bar.
    Config cfg = Config::desk_defaults();
    RainParams rain = cfg.data.rain;
    for (RainCategory* cat : {&rain.long_streaks, &rain.medium_streaks, &rain.short_streaks}) {
        cat->density *= 5;
        cat->intensity_min = 0.15;
        cat->intensity_max = 0.7;
    }
    std::vector<Tensor> clean, rainy;
    for (int i = 0; i < 4; ++i) {
        ProceduralScene scene = generate_scene(64, 64, 3, 9000 + static_cast<std::uint64_t>(i));
        Tensor layer = gen_streak_layer(64, 64, rain, 700 + static_cast<std::uint64_t>(i));
        clean.push_back(scene.image);
        rainy.push_back(composite(scene.image, layer));
    }
    Tensor clean_batch = Tensor::zeros({4, 3, 64, 64});
    Tensor rainy_batch = Tensor::zeros({4, 3, 64, 64});
    for (int i = 0; i < 4; ++i) {
        std::copy(clean[static_cast<std::size_t>(i)].values().begin(),
                  clean[static_cast<std::size_t>(i)].values().end(),
                  clean_batch.mut().begin() + i * 3 * 64 * 64);
        std::copy(rainy[static_cast<std::size_t>(i)].values().begin(),
                  rainy[static_cast<std::size_t>(i)].values().end(),
                  rainy_batch.mut().begin() + i * 3 * 64 * 64);
    }
    const double ssim_rainy = ssim_metric(rainy_batch, clean_batch);

    ParamSet params;
    Rng rng(1);
    DerainConfig dcfg = cfg.derain;
    DerainNet net(dcfg, params, "derain", rng);
    AdamConfig acfg;
    acfg.lr = 2e-3;
    AdamState adam(params, acfg);

    double ssim_final = 0;
    int steps = 0;
    for (steps = 1; steps <= 500; ++steps) {
        {
            Graph g;
            GraphScope scope(g);
            auto [img1, img2] = net.forward(rainy_batch, true);
            Tensor loss = l_derain(3, clean_batch, {img1, img2});
            g.backward(loss);
            adam.step(params);
        }
        if (steps % 10 == 0 || steps == 500) {
            auto [e1, e2] = net.forward(rainy_batch, false);
            ssim_final = ssim_metric(e2, clean_batch);
            if (ssim_final > 0.95 && ssim_final > ssim_rainy) break;
        }
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "SSIM(derained, clean)=%.4f after %d steps (rainy baseline %.4f), %.0f s",
                  ssim_final, steps, ssim_rainy, dt);
    detail = buf;
    return ssim_final > 0.95 && ssim_final > ssim_rainy && dt < 600.0;
}

// ---------- criterion 7: three-stage smoke ----------

bool criterion_three_stage(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::path dir = work_dir("smoke");
    Config cfg = Config::desk_defaults();
    cfg.seed = 21;
    cfg.data.seed = 21;
    cfg.data.scene_count = 8;
    cfg.data.train_fraction = 1.0;
    for (RainCategory* cat : {&cfg.data.rain.long_streaks, &cfg.data.rain.medium_streaks,
                              &cfg.data.rain.short_streaks}) {
        cat->density *= 20;
        cat->intensity_min = 0.3;
        cat->intensity_max = 0.9;
    }
    cfg.dataset_dir = (dir / "ds").string();
    cfg.out_dir = (dir / "out").string();
    cfg.train.batch_size = 1;
    cfg.train.stage1 = {5, 5e-3, 30, true, true};
    cfg.train.stage2 = {5, 1e-3, 30, true, true};
    cfg.train.stage3 = {5, 1e-3, 30, true, true};
    // At forty-step training scale the high-IoU sweep only measures box
    // refinement noise; the direction check uses the single 0.5 threshold.
    cfg.eval.single_threshold = true;

    build_dataset(cfg.data, cfg.dataset_dir);
    Dataset data = load_dataset(cfg.dataset_dir);

    StageResult s1 = run_stage(cfg, 1, data, nullptr);
    StageResult s2 = run_stage(cfg, 2, data, &s1.checkpoint);
    StageResult s3 = run_stage(cfg, 3, data, &s2.checkpoint);

    const double first_epoch_mean = s3.logs.front().total;
    const double final_epoch = s3.logs.back().total;

    Model model(cfg, cfg.seed);
    model.load_tensors(s3.checkpoint);
    EvalResult eval = evaluate_model(cfg, model, data.train, data.classes);
    const EvalRow& rainy_row = eval.rows[0];
    const EvalRow& derained_row = eval.rows[1];

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "stage-3 loss %.3f -> %.3f (%.0f%%); PSNR rainy %.2f vs derained %.2f; mAP rainy "
                  "%.4f vs derained %.4f; %.0f s",
                  first_epoch_mean, final_epoch, 100.0 * final_epoch / first_epoch_mean,
                  rainy_row.psnr, derained_row.psnr, rainy_row.map, derained_row.map, dt);
    detail = buf;
    fs::remove_all(dir);
    return final_epoch < 0.7 * first_epoch_mean && derained_row.psnr > rainy_row.psnr &&
           derained_row.map >= rainy_row.map && dt < 1800.0;
}

// ---------- criterion 8: ablation hooks ----------

bool criterion_ablation(std::string& detail) {
    Config cfg = Config::desk_defaults();
    cfg.data.scene_count = 2;
    cfg.data.target_w = 64;
    cfg.data.target_h = 64;
    cfg.derain.base_channels = 8;
    cfg.detector.base_width = 8;
    cfg.detector.fpn_channels = 16;
    cfg.detector.tower_depth = 1;

    // (a) SAR toggle changes the parameter count.
    Config plain = cfg;
    plain.derain.use_sar = false;
    const std::size_t with_sar = Model(cfg, 1).params().total_values();
    const std::size_t without_sar = Model(plain, 1).params().total_values();
    if (with_sar == without_sar) {
        detail = "SAR toggle left the parameter count unchanged";
        return false;
    }

    // (b) FML toggle changes the stage-2 objective on one batch.
    Rng rng(0x8);
    ProceduralScene scene = generate_scene(64, 64, 3, 4242);
    Tensor layer = gen_streak_layer(64, 64, cfg.data.rain, 777);
    Tensor clean = reshape(scene.image, {1, 3, 64, 64});
    Tensor rainy = reshape(composite(scene.image, layer), {1, 3, 64, 64});
    Model model(cfg, 5);
    // give the restoration head some output so losses are not degenerate
    for (real& v : model.params().find("derain.out.w")->mut())
        v = static_cast<real>(rng.uniform(-0.2, 0.2));
    model.freeze_all();
    auto [img1, img2] = model.derain().forward(rainy, true);
    Tensor dpart = l_derain(2, clean, {img1, img2});
    Tensor fml = feature_map_loss(model.detector().backbone_forward(clean),
                                  model.detector().backbone_forward(img2), model.params(),
                                  "detector.");
    const double with_fml = total_loss(2, dpart, fml).item();
    const double without_fml = total_loss(2, dpart, Tensor::scalar(0)).item();
    if (with_fml == without_fml) {
        detail = "FML toggle left the stage-2 loss unchanged";
        return false;
    }

    // (c) the stage-3 MSE term moves the restoration loss.
    const double with_mse = l_derain(3, clean, {img2}, {}, true).item();
    const double without_mse = l_derain(3, clean, {img2}, {}, false).item();
    if (with_mse == without_mse) {
        detail = "MSE toggle left the stage-3 restoration loss unchanged";
        return false;
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "params %zu vs %zu; stage-2 loss %.4f vs %.4f; stage-3 derain %.4f vs %.4f",
                  with_sar, without_sar, with_fml, without_fml, with_mse, without_mse);
    detail = buf;
    return true;
}

// ---------- criterion 9: determinism ----------

bool criterion_determinism(std::string& detail) {
    fs::path dir = work_dir("determinism");
    Config cfg = Config::desk_defaults();
    cfg.seed = 77;
    cfg.data.seed = 77;
    cfg.data.scene_count = 4;
    cfg.data.target_w = 64;
    cfg.data.target_h = 64;
    cfg.data.train_fraction = 1.0;
    cfg.derain.base_channels = 8;
    cfg.detector.base_width = 8;
    cfg.detector.fpn_channels = 16;
    cfg.detector.tower_depth = 1;
    cfg.train.batch_size = 2;
    cfg.train.stage1 = {1, 1e-3, 30, true, true};
    cfg.train.stage2 = {1, 1e-3, 30, true, true};
    cfg.train.stage3 = {1, 2e-4, 30, true, true};

    // synth twice -> byte-identical manifests
    cfg.dataset_dir = (dir / "ds_a").string();
    auto rep_a = build_dataset(cfg.data, cfg.dataset_dir);
    auto rep_b = build_dataset(cfg.data, (dir / "ds_b").string());
    if (file_bytes(rep_a.manifest_path) != file_bytes(rep_b.manifest_path)) {
        detail = "manifests differ between rebuilds";
        return false;
    }

    // full three-stage run twice -> bit-identical stage checkpoints
    Dataset data = load_dataset(cfg.dataset_dir);
    auto run_all = [&](const fs::path& out) {
        StageResult s1 = run_stage(cfg, 1, data, nullptr);
        StageResult s2 = run_stage(cfg, 2, data, &s1.checkpoint);
        StageResult s3 = run_stage(cfg, 3, data, &s2.checkpoint);
        save_checkpoint(s3.checkpoint, out.string());
    };
    run_all(dir / "a.cdrn");
    run_all(dir / "b.cdrn");
    const bool same = file_bytes(dir / "a.cdrn") == file_bytes(dir / "b.cdrn");
    fs::remove_all(dir);
    detail = same ? "manifest bytes equal; stage-3 checkpoints bit-identical"
                  : "checkpoints differ between runs";
    return same;
}

// ---------- criterion 10: checkpoint round trip + resume ----------

bool criterion_checkpointing(std::string& detail) {
    fs::path dir = work_dir("resume");
    Config cfg = Config::desk_defaults();
    cfg.seed = 31;
    cfg.data.seed = 31;
    cfg.data.scene_count = 4;
    cfg.data.target_w = 64;
    cfg.data.target_h = 64;
    cfg.data.train_fraction = 1.0;
    cfg.derain.base_channels = 8;
    cfg.detector.base_width = 8;
    cfg.detector.fpn_channels = 16;
    cfg.detector.tower_depth = 1;
    cfg.train.batch_size = 2;
    cfg.dataset_dir = (dir / "ds").string();
    build_dataset(cfg.data, cfg.dataset_dir);
    Dataset data = load_dataset(cfg.dataset_dir);

    // round trip: save -> load -> save, byte-identical
    cfg.train.stage1 = {4, 1e-3, 30, true, true};
    StageResult straight = run_stage(cfg, 1, data, nullptr);
    save_checkpoint(straight.checkpoint, (dir / "a.cdrn").string());
    Checkpoint loaded = load_checkpoint((dir / "a.cdrn").string());
    save_checkpoint(loaded, (dir / "b.cdrn").string());
    if (file_bytes(dir / "a.cdrn") != file_bytes(dir / "b.cdrn")) {
        detail = "save -> load -> save is not byte-identical";
        return false;
    }

    // resume: 2 epochs + 2 resumed epochs match 4 straight epochs per step
    Config half = cfg;
    half.train.stage1.epochs = 2;
    half.train.checkpoint_mismatch = "warn";
    StageResult part = run_stage(half, 1, data, nullptr);
    Config full = cfg;
    full.train.checkpoint_mismatch = "warn";
    StageResult resumed = run_stage(full, 1, data, &part.checkpoint);

    double worst = 0;
    if (resumed.logs.size() != 2) {
        detail = "resume re-ran the wrong number of epochs";
        return false;
    }
    for (std::size_t i = 0; i < 2; ++i)
        worst = std::max(worst, std::abs(straight.logs[i + 2].total - resumed.logs[i].total));
    save_checkpoint(resumed.checkpoint, (dir / "c.cdrn").string());
    const bool tensors_equal = file_bytes(dir / "a.cdrn").substr(8) ==
                               file_bytes(dir / "c.cdrn").substr(8);  // past magic+version
    fs::remove_all(dir);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "round trip byte-identical; resumed per-epoch loss diff %.2e%s",
                  worst, tensors_equal ? "; final tensors bit-identical" : "");
    detail = buf;
    return worst < 1e-6;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    std::vector<Criterion> criteria = {
        {1, "gradient suite over every op, block and loss", criterion_gradients},
        {2, "SSIM map matches the sliding-window reference", criterion_ssim_oracle},
        {3, "loss identities (focal/BCE, GIoU range, stage weights)", criterion_loss_identities},
        {4, "FCOS assignment equals the brute-force triple loop", criterion_assignment},
        {5, "mAP/mAR equal the exhaustive matcher", criterion_map_oracle},
        {6, "overfit: 2-stage net reaches SSIM > 0.95 within 500 steps", criterion_overfit},
        {7, "three-stage smoke improves loss, PSNR and detection", criterion_three_stage},
        {8, "ablation toggles (SAR, FML, MSE) are live", criterion_ablation},
        {9, "bit-identical training and byte-identical synthesis", criterion_determinism},
        {10, "checkpoint round trip and resume determinism", criterion_checkpointing},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
