#pragma once

#include <string>

#include "detect/detector.hpp"
#include "nn/derain_net.hpp"
#include "synth/dataset.hpp"

namespace cdrn {

struct StageTrainConfig {
    int epochs = 5;
    double lr = 1e-3;
    int halve_epoch = 30;  // pre-training schedule; the joint stage ignores it
    bool fml_enabled = true;   // stage-2 feature-map loss toggle
    bool mse_enabled = true;   // stage-3 MSE term toggle
};

struct TrainConfig {
    int batch_size = 4;
    StageTrainConfig stage1, stage2, stage3;
    // "fail" rejects a checkpoint whose config checksum differs; "warn"
    // proceeds with a note on stderr.
    std::string checkpoint_mismatch = "fail";
};

struct EvalConfig {
    bool single_threshold = false;  // true -> IoU 0.5 only
    int max_detections = 100;
};

struct Config {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/out";
    std::string dataset_dir = "data/desk";
    DatasetBuildConfig data;
    DerainConfig derain;
    DetectorConfig detector;
    TrainConfig train;
    EvalConfig eval;

    // CPU-trainable profile (160x96 procedural scenes, depth-3 width-16 net).
    static Config desk_defaults();
    // Full-resolution profile (1280x384 KITTI source, 50+50+20 epochs).
    // Training it needs large-scale hardware; it exists as configuration.
    static Config full_scale();

    void validate() const;
};

Config config_from_json_text(const std::string& text);
Config config_from_file(const std::string& path);
std::string config_to_json_text(const Config& cfg);
std::uint32_t config_checksum(const Config& cfg);

// Resolved-config manifest written at the start of every run.
void write_run_manifest(const Config& cfg, const std::string& command);

}  // namespace cdrn
