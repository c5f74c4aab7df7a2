#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synth/kitti.hpp"
#include "synth/rain.hpp"

namespace cdrn {

struct ImageSample {
    std::string name;
    Tensor clean;  // [3,H,W] padded
    Tensor rainy;
    std::vector<Annotation> annotations;
    std::vector<Box> ignore;
    int orig_w = 0, orig_h = 0;
    int pad_right = 0, pad_bottom = 0;
    std::uint64_t seed = 0;
};

struct PadResult {
    Tensor image;
    int pad_right = 0, pad_bottom = 0;
};

// Zero-pads on the right and bottom only, so box coordinates survive
// unchanged. Larger-than-target images are an error.
PadResult pad_to_uniform(const Tensor& image, int target_w, int target_h);

struct DatasetBuildConfig {
    enum class Source { procedural, kitti };
    Source source = Source::procedural;
    std::string clean_dir;  // kitti mode: PNGs
    std::string label_dir;  // kitti mode: .txt per image
    int scene_count = 16;   // procedural mode
    int target_w = 160;
    int target_h = 96;
    double train_fraction = 0.75;
    std::vector<std::string> classes = {"Car", "Pedestrian", "Cyclist"};
    RainParams rain = RainParams::defaults();
    std::uint64_t seed = 1;
};

struct DatasetBuildReport {
    int written = 0;
    int skipped = 0;
    std::string manifest_path;
};

// Builds the paired dataset under out_dir: per image a `<name>_clean.png`,
// `<name>_rain.png` and `<name>_annotations.json`, plus a manifest carrying
// seeds, parameters, the split and per-file checksums. Every byte is a pure
// function of (inputs, config, seed). Unreadable source images or labels are
// skipped and recorded in the manifest.
DatasetBuildReport build_dataset(const DatasetBuildConfig& cfg, const std::string& out_dir);

struct Dataset {
    std::vector<ImageSample> train;
    std::vector<ImageSample> test;
    std::vector<std::string> classes;
    int width = 0, height = 0;
};

Dataset load_dataset(const std::string& dir);

// Deterministic flat-shaded test scene: textured background with labeled
// rectangles standing in for vehicles, pedestrians and cyclists.
struct ProceduralScene {
    Tensor image;
    std::vector<Annotation> annotations;
};
ProceduralScene generate_scene(int w, int h, int class_count, std::uint64_t seed);

std::uint32_t crc32_file(const std::string& path);

}  // namespace cdrn
