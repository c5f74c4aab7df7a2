#include "synth/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "pipeline/parallel.hpp"
#include "synth/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cdrn {

namespace {

json category_to_json(const RainCategory& c) {
    return json{{"density", c.density},
                {"length", {c.length_min, c.length_max}},
                {"width", {c.width_min, c.width_max}},
                {"angle", {c.angle_min, c.angle_max}},
                {"intensity", {c.intensity_min, c.intensity_max}}};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path.string() + "'");
    out << text;
}

json annotations_to_json(const std::vector<Annotation>& anns, const std::vector<Box>& ignore,
                         const std::vector<std::string>& classes) {
    json list = json::array();
    for (const Annotation& a : anns)
        list.push_back({{"class", classes.at(static_cast<std::size_t>(a.cls))},
                        {"box", {a.box.x1, a.box.y1, a.box.x2, a.box.y2}}});
    json ign = json::array();
    for (const Box& b : ignore) ign.push_back({b.x1, b.y1, b.x2, b.y2});
    return json{{"annotations", list}, {"ignore", ign}};
}

void annotations_from_json(const json& j, const std::vector<std::string>& classes,
                           std::vector<Annotation>& anns, std::vector<Box>& ignore) {
    for (const json& a : j.at("annotations")) {
        const std::string cls = a.at("class").get<std::string>();
        const auto it = std::find(classes.begin(), classes.end(), cls);
        if (it == classes.end()) fail("annotation class '" + cls + "' not in the dataset class list");
        const auto& b = a.at("box");
        anns.push_back({static_cast<int>(it - classes.begin()),
                        Box{b[0].get<float>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>()}});
    }
    for (const json& b : j.at("ignore"))
        ignore.push_back(Box{b[0].get<float>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>()});
}

struct SourceItem {
    std::string name;
    Tensor clean;  // unpadded
    std::vector<Annotation> annotations;
    std::vector<Box> ignore;
};

void fill_rect(Tensor& img, int x1, int y1, int x2, int y2, float r, float g, float b) {
    const int h = img.dim(1), w = img.dim(2);
    x1 = std::clamp(x1, 0, w);
    x2 = std::clamp(x2, 0, w);
    y1 = std::clamp(y1, 0, h);
    y2 = std::clamp(y2, 0, h);
    auto v = img.mut();
    const float rgb[3] = {r, g, b};
    for (int c = 0; c < 3; ++c)
        for (int y = y1; y < y2; ++y)
            for (int x = x1; x < x2; ++x)
                v[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<real>(rgb[c]);
}

}  // namespace

PadResult pad_to_uniform(const Tensor& image, int target_w, int target_h) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        fail("pad_to_uniform: expected [3,H,W] image, got " + shape_str(image.shape()));
    const int h = image.dim(1), w = image.dim(2);
    if (w > target_w || h > target_h)
        fail("pad_to_uniform: image " + std::to_string(w) + "x" + std::to_string(h) +
             " exceeds target " + std::to_string(target_w) + "x" + std::to_string(target_h));
    PadResult out;
    out.pad_right = target_w - w;
    out.pad_bottom = target_h - h;
    if (out.pad_right == 0 && out.pad_bottom == 0) {
        out.image = image.clone();
        return out;
    }
    out.image = Tensor::zeros({3, target_h, target_w});
    auto src = image.values();
    auto dst = out.image.mut();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dst[(static_cast<std::size_t>(c) * target_h + y) * target_w + x] =
                    src[(static_cast<std::size_t>(c) * h + y) * w + x];
    return out;
}

ProceduralScene generate_scene(int w, int h, int class_count, std::uint64_t seed) {
    Rng rng(seed);
    ProceduralScene scene;
    scene.image = Tensor::zeros({3, h, w});
    auto v = scene.image.mut();

    // Sky-to-ground gradient with coarse value noise.
    const int horizon = static_cast<int>(h * rng.uniform(0.30, 0.45));
    const float sky[3] = {static_cast<float>(rng.uniform(0.55, 0.70)),
                          static_cast<float>(rng.uniform(0.65, 0.80)),
                          static_cast<float>(rng.uniform(0.80, 0.95))};
    const float ground[3] = {static_cast<float>(rng.uniform(0.30, 0.45)),
                             static_cast<float>(rng.uniform(0.30, 0.45)),
                             static_cast<float>(rng.uniform(0.30, 0.45))};
    const int cells = 8;
    std::vector<float> noise(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (float& n : noise) n = static_cast<float>(rng.uniform(-0.05, 0.05));
    for (int y = 0; y < h; ++y) {
        const float fade = y < horizon ? static_cast<float>(y) / std::max(1, horizon)
                                       : static_cast<float>(y - horizon) / std::max(1, h - horizon);
        for (int x = 0; x < w; ++x) {
            const float gx = static_cast<float>(x) * cells / w;
            const float gy = static_cast<float>(y) * cells / h;
            const int cx = static_cast<int>(gx), cy = static_cast<int>(gy);
            const float fx = gx - cx, fy = gy - cy;
            auto at = [&](int i, int j) { return noise[static_cast<std::size_t>(j) * (cells + 1) + i]; };
            const float n = (1 - fx) * (1 - fy) * at(cx, cy) + fx * (1 - fy) * at(cx + 1, cy) +
                            (1 - fx) * fy * at(cx, cy + 1) + fx * fy * at(cx + 1, cy + 1);
            for (int c = 0; c < 3; ++c) {
                const float base = y < horizon
                                       ? sky[c] * (1.0f - 0.15f * fade)
                                       : ground[c] * (1.0f - 0.25f * fade);
                v[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    static_cast<real>(std::clamp(base + n, 0.0f, 1.0f));
            }
        }
    }

    // Labeled rectangles with a per-class appearance so desk-scale training
    // has something learnable.
    const int count = 3 + static_cast<int>(rng.uniform_int(3));
    for (int k = 0; k < count; ++k) {
        const int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(class_count)));
        for (int attempt = 0; attempt < 20; ++attempt) {
            double oh, aspect;
            if (cls == 0) {  // car-like: wide
                oh = rng.uniform(0.14, 0.30) * h;
                aspect = rng.uniform(1.6, 2.4);
            } else if (cls == 1) {  // pedestrian-like: tall and thin
                oh = rng.uniform(0.18, 0.38) * h;
                aspect = rng.uniform(0.30, 0.45);
            } else {  // cyclist-like: intermediate
                oh = rng.uniform(0.16, 0.32) * h;
                aspect = rng.uniform(0.60, 0.90);
            }
            const double ow = std::max(5.0, oh * aspect);
            oh = std::max(6.0, oh);
            const double y2 = rng.uniform(std::min(horizon + oh + 2.0, h - 2.0), h - 1.0);
            const double x1 = rng.uniform(1.0, std::max(2.0, w - ow - 2.0));
            Box box{static_cast<float>(x1), static_cast<float>(y2 - oh),
                    static_cast<float>(x1 + ow), static_cast<float>(y2)};
            if (!box.valid() || box.x2 > w - 1 || box.y1 < 1) continue;
            bool crowded = false;
            for (const Annotation& a : scene.annotations)
                if (iou(a.box, box) > 0.25) crowded = true;
            if (crowded) continue;

            const float jr = static_cast<float>(rng.uniform(-0.08, 0.08));
            const int bx1 = static_cast<int>(box.x1), by1 = static_cast<int>(box.y1);
            const int bx2 = static_cast<int>(box.x2), by2 = static_cast<int>(box.y2);
            if (cls == 0) {
                fill_rect(scene.image, bx1, by1, bx2, by2, 0.05f, 0.05f, 0.05f);
                fill_rect(scene.image, bx1 + 1, by1 + 1, bx2 - 1, by2 - 1, 0.80f + jr, 0.12f, 0.10f);
                fill_rect(scene.image, bx1 + 2, by1 + 2, bx2 - 2, by1 + (by2 - by1) / 3, 0.65f,
                          0.75f, 0.85f);  // windows
            } else if (cls == 1) {
                fill_rect(scene.image, bx1, by1, bx2, by2, 0.05f, 0.05f, 0.05f);
                fill_rect(scene.image, bx1 + 1, by1 + 1, bx2 - 1, by2 - 1, 0.90f + jr, 0.80f, 0.15f);
                fill_rect(scene.image, bx1 + 1, by1 + 1, bx2 - 1, by1 + (by2 - by1) / 4, 0.55f,
                          0.35f, 0.25f);  // head
            } else {
                fill_rect(scene.image, bx1, by1, bx2, by2, 0.05f, 0.05f, 0.05f);
                fill_rect(scene.image, bx1 + 1, by1 + 1, bx2 - 1, by2 - 1, 0.10f, 0.75f + jr, 0.80f);
                fill_rect(scene.image, bx1 + (bx2 - bx1) / 3, by1 + 1, bx2 - (bx2 - bx1) / 3,
                          by2 - 1, 0.15f, 0.25f, 0.30f);  // frame
            }
            scene.annotations.push_back({cls, box});
            break;
        }
    }
    return scene;
}

std::uint32_t crc32_file(const std::string& path) {
    const std::string bytes = read_file(path);
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

DatasetBuildReport build_dataset(const DatasetBuildConfig& cfg, const std::string& out_dir) {
    if (cfg.train_fraction <= 0 || cfg.train_fraction > 1)
        fail("build_dataset: train fraction must be in (0, 1]");
    cfg.rain.validate();
    fs::create_directories(out_dir);

    std::vector<SourceItem> items;
    json skipped = json::array();

    if (cfg.source == DatasetBuildConfig::Source::procedural) {
        for (int i = 0; i < cfg.scene_count; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "scene_%04d", i);
            ProceduralScene scene = generate_scene(cfg.target_w, cfg.target_h,
                                                   static_cast<int>(cfg.classes.size()),
                                                   derive_seed(cfg.seed, std::string(name) + "/scene"));
            items.push_back({name, std::move(scene.image), std::move(scene.annotations), {}});
        }
    } else {
        std::vector<fs::path> pngs;
        for (const auto& e : fs::directory_iterator(cfg.clean_dir))
            if (e.path().extension() == ".png") pngs.push_back(e.path());
        std::sort(pngs.begin(), pngs.end());
        for (const fs::path& p : pngs) {
            const std::string name = p.stem().string();
            const fs::path label = fs::path(cfg.label_dir) / (name + ".txt");
            try {
                Tensor img = load_png_rgb(p.string());
                KittiLabels labels = parse_kitti_labels(read_file(label), cfg.classes);
                items.push_back({name, std::move(img), std::move(labels.annotations),
                                 std::move(labels.ignore)});
            } catch (const std::exception& e) {
                skipped.push_back({{"name", name}, {"reason", e.what()}});
            }
        }
    }

    std::sort(items.begin(), items.end(),
              [](const SourceItem& a, const SourceItem& b) { return a.name < b.name; });
    const int train_count =
        static_cast<int>(std::lround(cfg.train_fraction * static_cast<double>(items.size())));

    json manifest;
    manifest["format"] = "cdrn-dataset";
    manifest["version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["image_width"] = cfg.target_w;
    manifest["image_height"] = cfg.target_h;
    manifest["classes"] = cfg.classes;
    manifest["rain_params"] = {{"long", category_to_json(cfg.rain.long_streaks)},
                               {"medium", category_to_json(cfg.rain.medium_streaks)},
                               {"short", category_to_json(cfg.rain.short_streaks)},
                               {"reference_diagonal", cfg.rain.reference_diagonal}};
    {
        const std::string canon = manifest["rain_params"].dump();
        manifest["params_checksum"] = static_cast<std::uint32_t>(
            crc32(0L, reinterpret_cast<const Bytef*>(canon.data()), static_cast<uInt>(canon.size())));
    }
    manifest["skipped"] = skipped;

    // Per-image synthesis parallelizes on derived seeds; the manifest is
    // assembled afterwards in index order so its bytes stay deterministic.
    struct Slot {
        json entry;
        std::string error;
        bool ok = false;
    };
    std::vector<Slot> slots(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        SourceItem& item = items[i];
        Slot& slot = slots[i];
        const std::uint64_t image_seed = derive_seed(cfg.seed, item.name);
        try {
            const int orig_w = item.clean.dim(2), orig_h = item.clean.dim(1);
            PadResult padded = pad_to_uniform(item.clean, cfg.target_w, cfg.target_h);
            Tensor layer = gen_streak_layer(cfg.target_w, cfg.target_h, cfg.rain, image_seed);
            Tensor rainy = composite(padded.image, layer);

            const std::string clean_name = item.name + "_clean.png";
            const std::string rain_name = item.name + "_rain.png";
            const std::string ann_name = item.name + "_annotations.json";
            save_png_rgb(padded.image, (fs::path(out_dir) / clean_name).string());
            save_png_rgb(rainy, (fs::path(out_dir) / rain_name).string());
            write_file(fs::path(out_dir) / ann_name,
                       annotations_to_json(item.annotations, item.ignore, cfg.classes).dump(2));

            json entry;
            entry["name"] = item.name;
            entry["split"] = static_cast<int>(i) < train_count ? "train" : "test";
            entry["seed"] = image_seed;
            entry["clean"] = clean_name;
            entry["rain"] = rain_name;
            entry["annotations"] = ann_name;
            entry["orig_width"] = orig_w;
            entry["orig_height"] = orig_h;
            entry["pad_right"] = padded.pad_right;
            entry["pad_bottom"] = padded.pad_bottom;
            entry["crc_clean"] = crc32_file((fs::path(out_dir) / clean_name).string());
            entry["crc_rain"] = crc32_file((fs::path(out_dir) / rain_name).string());
            entry["crc_annotations"] = crc32_file((fs::path(out_dir) / ann_name).string());
            slot.entry = std::move(entry);
            slot.ok = true;
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    json entries = json::array();
    DatasetBuildReport report;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].ok) {
            entries.push_back(std::move(slots[i].entry));
            ++report.written;
        } else {
            manifest["skipped"].push_back({{"name", items[i].name}, {"reason", slots[i].error}});
        }
    }
    report.skipped = static_cast<int>(manifest["skipped"].size());
    manifest["items"] = std::move(entries);

    const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
    write_file(manifest_path, manifest.dump(2));
    report.manifest_path = manifest_path.string();
    return report;
}

Dataset load_dataset(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    json manifest = json::parse(read_file(manifest_path));
    if (manifest.value("format", "") != "cdrn-dataset")
        fail("load_dataset: '" + manifest_path.string() + "' is not a dataset manifest");
    Dataset ds;
    ds.classes = manifest.at("classes").get<std::vector<std::string>>();
    ds.width = manifest.at("image_width").get<int>();
    ds.height = manifest.at("image_height").get<int>();
    for (const json& entry : manifest.at("items")) {
        ImageSample s;
        s.name = entry.at("name").get<std::string>();
        s.clean = load_png_rgb((fs::path(dir) / entry.at("clean").get<std::string>()).string());
        s.rainy = load_png_rgb((fs::path(dir) / entry.at("rain").get<std::string>()).string());
        annotations_from_json(
            json::parse(read_file(fs::path(dir) / entry.at("annotations").get<std::string>())),
            ds.classes, s.annotations, s.ignore);
        s.orig_w = entry.at("orig_width").get<int>();
        s.orig_h = entry.at("orig_height").get<int>();
        s.pad_right = entry.at("pad_right").get<int>();
        s.pad_bottom = entry.at("pad_bottom").get<int>();
        s.seed = entry.at("seed").get<std::uint64_t>();
        if (entry.at("split").get<std::string>() == "train") {
            ds.train.push_back(std::move(s));
        } else {
            ds.test.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace cdrn
