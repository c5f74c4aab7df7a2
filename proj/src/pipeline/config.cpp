#include "pipeline/config.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace cdrn {

namespace {

json category_json(const RainCategory& c) {
    return json{{"density", c.density},
                {"length", {c.length_min, c.length_max}},
                {"width", {c.width_min, c.width_max}},
                {"angle", {c.angle_min, c.angle_max}},
                {"intensity", {c.intensity_min, c.intensity_max}}};
}

void category_merge(const json& j, RainCategory& c) {
    if (j.contains("density")) c.density = j["density"].get<double>();
    if (j.contains("length")) {
        c.length_min = j["length"][0].get<double>();
        c.length_max = j["length"][1].get<double>();
    }
    if (j.contains("width")) {
        c.width_min = j["width"][0].get<double>();
        c.width_max = j["width"][1].get<double>();
    }
    if (j.contains("angle")) {
        c.angle_min = j["angle"][0].get<double>();
        c.angle_max = j["angle"][1].get<double>();
    }
    if (j.contains("intensity")) {
        c.intensity_min = j["intensity"][0].get<double>();
        c.intensity_max = j["intensity"][1].get<double>();
    }
}

json stage_json(const StageTrainConfig& s) {
    return json{{"epochs", s.epochs},
                {"lr", s.lr},
                {"halve_epoch", s.halve_epoch},
                {"fml_enabled", s.fml_enabled},
                {"mse_enabled", s.mse_enabled}};
}

void stage_merge(const json& j, StageTrainConfig& s) {
    if (j.contains("epochs")) s.epochs = j["epochs"].get<int>();
    if (j.contains("lr")) s.lr = j["lr"].get<double>();
    if (j.contains("halve_epoch")) s.halve_epoch = j["halve_epoch"].get<int>();
    if (j.contains("fml_enabled")) s.fml_enabled = j["fml_enabled"].get<bool>();
    if (j.contains("mse_enabled")) s.mse_enabled = j["mse_enabled"].get<bool>();
}

json config_json(const Config& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["dataset_dir"] = cfg.dataset_dir;
    j["data"] = {{"source",
                  cfg.data.source == DatasetBuildConfig::Source::procedural ? "procedural" : "kitti"},
                 {"clean_dir", cfg.data.clean_dir},
                 {"label_dir", cfg.data.label_dir},
                 {"scene_count", cfg.data.scene_count},
                 {"image_width", cfg.data.target_w},
                 {"image_height", cfg.data.target_h},
                 {"train_fraction", cfg.data.train_fraction},
                 {"classes", cfg.data.classes},
                 {"seed", cfg.data.seed},
                 {"rain",
                  {{"long", category_json(cfg.data.rain.long_streaks)},
                   {"medium", category_json(cfg.data.rain.medium_streaks)},
                   {"short", category_json(cfg.data.rain.short_streaks)},
                   {"reference_diagonal", cfg.data.rain.reference_diagonal}}}};
    j["derain"] = {{"depth", cfg.derain.depth},
                   {"base_channels", cfg.derain.base_channels},
                   {"sar_cardinal", cfg.derain.sar_cardinal},
                   {"sar_splits", cfg.derain.sar_splits},
                   {"sar_reduction", cfg.derain.sar_reduction},
                   {"use_sar", cfg.derain.use_sar},
                   {"supervise_stage1", cfg.derain.supervise_stage1}};
    j["detector"] = {{"base_width", cfg.detector.base_width},
                     {"fpn_channels", cfg.detector.fpn_channels},
                     {"tower_depth", cfg.detector.tower_depth},
                     {"strides", cfg.detector.strides},
                     {"range_edges",
                      {cfg.detector.range_edges[0], cfg.detector.range_edges[1],
                       cfg.detector.range_edges[2], cfg.detector.range_edges[3]}},
                     {"score_threshold", cfg.detector.score_threshold},
                     {"nms_iou", cfg.detector.nms_iou},
                     {"max_detections", cfg.detector.max_detections},
                     {"centerness_on_reg", cfg.detector.centerness_on_reg},
                     {"prior_probability", cfg.detector.prior_probability}};
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"checkpoint_mismatch", cfg.train.checkpoint_mismatch},
                  {"stage1", stage_json(cfg.train.stage1)},
                  {"stage2", stage_json(cfg.train.stage2)},
                  {"stage3", stage_json(cfg.train.stage3)}};
    j["eval"] = {{"single_threshold", cfg.eval.single_threshold},
                 {"max_detections", cfg.eval.max_detections}};
    return j;
}

void config_merge(const json& j, Config& cfg) {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("dataset_dir")) cfg.dataset_dir = j["dataset_dir"].get<std::string>();
    if (j.contains("data")) {
        const json& d = j["data"];
        if (d.contains("source")) {
            const std::string s = d["source"].get<std::string>();
            if (s == "procedural") {
                cfg.data.source = DatasetBuildConfig::Source::procedural;
            } else if (s == "kitti") {
                cfg.data.source = DatasetBuildConfig::Source::kitti;
            } else {
                fail("config: data.source must be 'procedural' or 'kitti'");
            }
        }
        if (d.contains("clean_dir")) cfg.data.clean_dir = d["clean_dir"].get<std::string>();
        if (d.contains("label_dir")) cfg.data.label_dir = d["label_dir"].get<std::string>();
        if (d.contains("scene_count")) cfg.data.scene_count = d["scene_count"].get<int>();
        if (d.contains("image_width")) cfg.data.target_w = d["image_width"].get<int>();
        if (d.contains("image_height")) cfg.data.target_h = d["image_height"].get<int>();
        if (d.contains("train_fraction")) cfg.data.train_fraction = d["train_fraction"].get<double>();
        if (d.contains("classes")) cfg.data.classes = d["classes"].get<std::vector<std::string>>();
        if (d.contains("seed")) cfg.data.seed = d["seed"].get<std::uint64_t>();
        if (d.contains("rain")) {
            const json& r = d["rain"];
            if (r.contains("long")) category_merge(r["long"], cfg.data.rain.long_streaks);
            if (r.contains("medium")) category_merge(r["medium"], cfg.data.rain.medium_streaks);
            if (r.contains("short")) category_merge(r["short"], cfg.data.rain.short_streaks);
            if (r.contains("reference_diagonal"))
                cfg.data.rain.reference_diagonal = r["reference_diagonal"].get<double>();
        }
    }
    if (j.contains("derain")) {
        const json& d = j["derain"];
        if (d.contains("depth")) cfg.derain.depth = d["depth"].get<int>();
        if (d.contains("base_channels")) cfg.derain.base_channels = d["base_channels"].get<int>();
        if (d.contains("sar_cardinal")) cfg.derain.sar_cardinal = d["sar_cardinal"].get<int>();
        if (d.contains("sar_splits")) cfg.derain.sar_splits = d["sar_splits"].get<int>();
        if (d.contains("sar_reduction")) cfg.derain.sar_reduction = d["sar_reduction"].get<int>();
        if (d.contains("use_sar")) cfg.derain.use_sar = d["use_sar"].get<bool>();
        if (d.contains("supervise_stage1"))
            cfg.derain.supervise_stage1 = d["supervise_stage1"].get<bool>();
    }
    if (j.contains("detector")) {
        const json& d = j["detector"];
        if (d.contains("base_width")) cfg.detector.base_width = d["base_width"].get<int>();
        if (d.contains("fpn_channels")) cfg.detector.fpn_channels = d["fpn_channels"].get<int>();
        if (d.contains("tower_depth")) cfg.detector.tower_depth = d["tower_depth"].get<int>();
        if (d.contains("strides")) {
            const auto v = d["strides"].get<std::vector<int>>();
            if (v.size() != kFpnLevels) fail("config: detector.strides needs 5 entries");
            std::copy(v.begin(), v.end(), cfg.detector.strides.begin());
        }
        if (d.contains("range_edges")) {
            const auto v = d["range_edges"].get<std::vector<float>>();
            if (v.size() != kFpnLevels - 1)
                fail("config: detector.range_edges needs 4 finite entries (the top is infinite)");
            std::copy(v.begin(), v.end(), cfg.detector.range_edges.begin());
            cfg.detector.range_edges[kFpnLevels - 1] = std::numeric_limits<float>::infinity();
        }
        if (d.contains("score_threshold"))
            cfg.detector.score_threshold = d["score_threshold"].get<float>();
        if (d.contains("nms_iou")) cfg.detector.nms_iou = d["nms_iou"].get<float>();
        if (d.contains("max_detections")) cfg.detector.max_detections = d["max_detections"].get<int>();
        if (d.contains("centerness_on_reg"))
            cfg.detector.centerness_on_reg = d["centerness_on_reg"].get<bool>();
        if (d.contains("prior_probability"))
            cfg.detector.prior_probability = d["prior_probability"].get<float>();
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
        if (t.contains("checkpoint_mismatch"))
            cfg.train.checkpoint_mismatch = t["checkpoint_mismatch"].get<std::string>();
        if (t.contains("stage1")) stage_merge(t["stage1"], cfg.train.stage1);
        if (t.contains("stage2")) stage_merge(t["stage2"], cfg.train.stage2);
        if (t.contains("stage3")) stage_merge(t["stage3"], cfg.train.stage3);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        if (e.contains("single_threshold")) cfg.eval.single_threshold = e["single_threshold"].get<bool>();
        if (e.contains("max_detections")) cfg.eval.max_detections = e["max_detections"].get<int>();
    }
}

}  // namespace

Config Config::desk_defaults() {
    Config cfg;
    cfg.data.scene_count = 16;
    cfg.data.target_w = 160;
    cfg.data.target_h = 96;
    cfg.data.train_fraction = 0.75;
    cfg.data.seed = 1;
    // Desk-scale images need far denser rain per megapixel for a visible
    // effect at 160x96.
    cfg.data.rain.long_streaks.density = 600;
    cfg.data.rain.medium_streaks.density = 1500;
    cfg.data.rain.short_streaks.density = 3000;
    cfg.derain.depth = 3;
    cfg.derain.base_channels = 16;
    cfg.detector.base_width = 16;
    cfg.detector.fpn_channels = 32;
    cfg.detector.tower_depth = 2;
    cfg.train.batch_size = 4;
    cfg.train.stage1 = {5, 1e-3, 30, true, true};
    cfg.train.stage2 = {5, 1e-3, 30, true, true};
    cfg.train.stage3 = {5, 2e-4, 30, true, true};
    return cfg;
}

Config Config::full_scale() {
    Config cfg;
    cfg.data.source = DatasetBuildConfig::Source::kitti;
    cfg.data.target_w = 1280;
    cfg.data.target_h = 384;
    cfg.data.train_fraction = 0.78125;  // 5000 train / 1400 test of 6400 pairs
    cfg.data.rain = RainParams::defaults();
    cfg.derain.depth = 3;
    cfg.derain.base_channels = 32;
    cfg.detector.base_width = 32;
    cfg.detector.fpn_channels = 64;
    cfg.detector.tower_depth = 4;
    cfg.detector.range_edges = {64, 128, 256, 512, std::numeric_limits<float>::infinity()};
    cfg.train.batch_size = 4;
    cfg.train.stage1 = {50, 1e-3, 30, true, true};
    cfg.train.stage2 = {50, 1e-3, 30, true, true};
    cfg.train.stage3 = {20, 1e-4, 30, true, true};
    cfg.out_dir = "runs/full";
    cfg.dataset_dir = "data/rain_kitti";
    return cfg;
}

void Config::validate() const {
    derain.validate();
    DetectorConfig det = detector;
    det.num_classes = static_cast<int>(data.classes.size());
    det.validate();
    data.rain.validate();
    if (data.classes.empty()) fail("config: at least one class is required");
    if (data.target_w % 32 != 0 || data.target_h % 32 != 0)
        fail("config: image size must be divisible by 32 for the detector");
    const int div = derain.spatial_divisor();
    if (data.target_w % div != 0 || data.target_h % div != 0)
        fail("config: image size must be divisible by " + std::to_string(div) +
             " for the restoration net");
    if (train.batch_size < 1) fail("config: batch size must be >= 1");
    if (train.checkpoint_mismatch != "fail" && train.checkpoint_mismatch != "warn")
        fail("config: train.checkpoint_mismatch must be 'fail' or 'warn'");
}

Config config_from_json_text(const std::string& text) {
    Config cfg = Config::desk_defaults();
    json j = json::parse(text);
    config_merge(j, cfg);
    cfg.validate();
    return cfg;
}

Config config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot read '" + path + "'");
    return config_from_json_text(
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

std::string config_to_json_text(const Config& cfg) { return config_json(cfg).dump(2); }

std::uint32_t config_checksum(const Config& cfg) {
    const std::string canon = config_json(cfg).dump();
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(canon.data()), static_cast<uInt>(canon.size())));
}

void write_run_manifest(const Config& cfg, const std::string& command) {
    fs::create_directories(cfg.out_dir);
    json j;
    j["command"] = command;
    j["config"] = config_json(cfg);
    j["config_checksum"] = config_checksum(cfg);
    std::ofstream out(fs::path(cfg.out_dir) / ("run_manifest_" + command + ".json"));
    if (!out) fail("cannot write run manifest under '" + cfg.out_dir + "'");
    out << j.dump(2) << "\n";
}

}  // namespace cdrn
