#include <cstring>
#include <filesystem>
#include <string>

#include "cdrn/cdrn.h"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {
std::string tmp(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("cdrn_capi_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

const char* kTinyConfig = R"({
  "seed": 3,
  "data": {"scene_count": 2, "image_width": 64, "image_height": 64, "train_fraction": 1.0},
  "derain": {"base_channels": 8},
  "detector": {"base_width": 8, "fpn_channels": 16, "tower_depth": 1},
  "train": {
    "batch_size": 2,
    "stage1": {"epochs": 1}, "stage2": {"epochs": 1}, "stage3": {"epochs": 1}
  }
})";
}  // namespace

TEST_CASE("session lifecycle and argument validation") {
    CHECK(cdrn_session_open(nullptr, nullptr) == CDRN_ERROR_INVALID_ARGUMENT);

    cdrn_session* s = nullptr;
    REQUIRE(cdrn_session_open(nullptr, &s) == CDRN_OK);  // built-in defaults
    REQUIRE(s != nullptr);
    CHECK(cdrn_session_set_seed(s, 42) == CDRN_OK);
    CHECK(cdrn_session_set_output_dir(nullptr, "x") == CDRN_ERROR_INVALID_ARGUMENT);

    size_t needed = 0;
    REQUIRE(cdrn_session_config_json(s, nullptr, 0, &needed) == CDRN_OK);
    REQUIRE(needed > 2);
    std::string buf(needed, '\0');
    REQUIRE(cdrn_session_config_json(s, buf.data(), buf.size(), nullptr) == CDRN_OK);
    CHECK(buf.find("\"seed\": 42") != std::string::npos);
    cdrn_session_close(s);
    cdrn_session_close(nullptr);  // harmless
}

TEST_CASE("malformed configuration reports an error") {
    cdrn_session* s = nullptr;
    CHECK(cdrn_session_open_json("{nope", &s) != CDRN_OK);
    CHECK(s == nullptr);
    CHECK(std::strlen(cdrn_last_error()) > 0);

    CHECK(cdrn_session_open("/definitely/not/here.json", &s) != CDRN_OK);
    CHECK(s == nullptr);
}

TEST_CASE("synth, prerequisite failure, train and eval through the C API") {
    const std::string ds = tmp("ds");
    const std::string out = tmp("out");

    cdrn_session* s = nullptr;
    REQUIRE(cdrn_session_open_json(kTinyConfig, &s) == CDRN_OK);
    REQUIRE(cdrn_session_set_dataset_dir(s, ds.c_str()) == CDRN_OK);
    REQUIRE(cdrn_session_set_output_dir(s, out.c_str()) == CDRN_OK);

    REQUIRE(cdrn_synth(s) == CDRN_OK);
    CHECK(fs::exists(fs::path(ds) / "manifest.json"));

    // stage 2 first -> explicit prerequisite error
    CHECK(cdrn_train(s, 2) == CDRN_ERROR_PREREQUISITE);
    CHECK(std::string(cdrn_last_error()).find("stage 1") != std::string::npos);

    REQUIRE(cdrn_train(s, 0) == CDRN_OK);  // all three stages
    const std::string ckpt = (fs::path(out) / "ckpt_stage3.cdrn").string();
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(fs::path(out) / "ckpt_stage1.cdrn"));
    CHECK(fs::exists(fs::path(out) / "train_log.jsonl"));
    CHECK(fs::exists(fs::path(out) / "run_manifest_train.json"));

    REQUIRE(cdrn_eval(s, ckpt.c_str()) == CDRN_OK);
    CHECK(fs::exists(fs::path(out) / "report.md"));
    CHECK(fs::exists(fs::path(out) / "report.csv"));
    CHECK(fs::exists(fs::path(out) / "metrics.jsonl"));

    const std::string rain_png = (fs::path(ds) / "scene_0000_rain.png").string();
    const std::string prefix = (fs::path(out) / "sample").string();
    REQUIRE(cdrn_infer(s, ckpt.c_str(), rain_png.c_str(), prefix.c_str()) == CDRN_OK);
    CHECK(fs::exists(prefix + "_derained.png"));
    CHECK(fs::exists(prefix + "_overlay.png"));
    CHECK(fs::exists(prefix + "_detections.json"));

    CHECK(cdrn_eval(s, "missing.cdrn") == CDRN_ERROR_IO);
    cdrn_session_close(s);
    fs::remove_all(ds);
    fs::remove_all(out);
}

TEST_CASE("capi version string") { CHECK(std::string(cdrn_version()).find('.') != std::string::npos); }
