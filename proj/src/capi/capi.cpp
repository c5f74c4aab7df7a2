#include "cdrn/cdrn.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>

#include "pipeline/evaluate.hpp"
#include "pipeline/gradcheck_suite.hpp"
#include "pipeline/trainer.hpp"
#include "synth/png_io.hpp"

namespace fs = std::filesystem;

struct cdrn_session {
    cdrn::Config config;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

cdrn_status classify(const std::string& msg) {
    if (msg.find("requires a stage") != std::string::npos) return CDRN_ERROR_PREREQUISITE;
    if (msg.find("cannot open") != std::string::npos || msg.find("cannot read") != std::string::npos ||
        msg.find("cannot write") != std::string::npos || msg.find("truncated") != std::string::npos)
        return CDRN_ERROR_IO;
    if (msg.find("config") != std::string::npos || msg.find("parse") != std::string::npos)
        return CDRN_ERROR_CONFIG;
    return CDRN_ERROR_RUNTIME;
}

template <typename Fn>
cdrn_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return CDRN_OK;
    } catch (const std::exception& e) {
        set_error(e.what());
        return classify(e.what());
    } catch (...) {
        set_error("unknown error");
        return CDRN_ERROR_RUNTIME;
    }
}

std::string stage_checkpoint_path(const cdrn::Config& cfg, int stage) {
    return (fs::path(cfg.out_dir) / ("ckpt_stage" + std::to_string(stage) + ".cdrn")).string();
}

std::optional<cdrn::Checkpoint> try_load(const std::string& path) {
    if (!fs::exists(path)) return std::nullopt;
    return cdrn::load_checkpoint(path);
}

void train_one_stage(const cdrn::Config& cfg, int stage, const cdrn::Dataset& data,
                     std::ofstream& log) {
    std::optional<cdrn::Checkpoint> init;
    if (stage > 1) {
        init = try_load(stage_checkpoint_path(cfg, stage - 1));
        if (!init)
            cdrn::fail("stage " + std::to_string(stage) + " requires a stage " +
                       std::to_string(stage - 1) + " checkpoint; run train --stage " +
                       std::to_string(stage - 1) + " first");
    }
    cdrn::StageResult res = cdrn::run_stage(cfg, stage, data, init ? &*init : nullptr);
    for (const cdrn::EpochLog& l : res.logs) log << cdrn::epoch_log_json(l) << "\n";
    log.flush();
    cdrn::save_checkpoint(res.checkpoint, stage_checkpoint_path(cfg, stage));
}

}  // namespace

extern "C" {

const char* cdrn_version(void) { return "0.1.0"; }

const char* cdrn_last_error(void) { return g_last_error.c_str(); }

cdrn_status cdrn_session_open(const char* config_path, cdrn_session** out) {
    if (!out) {
        set_error("null session output pointer");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    *out = nullptr;
    return guarded([&]() {
        auto session = std::make_unique<cdrn_session>();
        session->config =
            config_path ? cdrn::config_from_file(config_path) : cdrn::Config::desk_defaults();
        *out = session.release();
    });
}

cdrn_status cdrn_session_open_json(const char* json_text, cdrn_session** out) {
    if (!out || !json_text) {
        set_error("null argument");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    *out = nullptr;
    return guarded([&]() {
        auto session = std::make_unique<cdrn_session>();
        session->config = cdrn::config_from_json_text(json_text);
        *out = session.release();
    });
}

void cdrn_session_close(cdrn_session* session) { delete session; }

cdrn_status cdrn_session_set_seed(cdrn_session* session, uint64_t seed) {
    if (!session) {
        set_error("null session");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    session->config.seed = seed;
    session->config.data.seed = seed;
    return CDRN_OK;
}

cdrn_status cdrn_session_set_output_dir(cdrn_session* session, const char* dir) {
    if (!session || !dir) {
        set_error("null argument");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    session->config.out_dir = dir;
    return CDRN_OK;
}

cdrn_status cdrn_session_set_dataset_dir(cdrn_session* session, const char* dir) {
    if (!session || !dir) {
        set_error("null argument");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    session->config.dataset_dir = dir;
    return CDRN_OK;
}

cdrn_status cdrn_session_config_json(cdrn_session* session, char* buf, size_t cap,
                                     size_t* needed) {
    if (!session) {
        set_error("null session");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&]() {
        const std::string text = cdrn::config_to_json_text(session->config);
        if (needed) *needed = text.size() + 1;
        if (buf && cap > 0) {
            const size_t n = std::min(cap - 1, text.size());
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
    });
}

cdrn_status cdrn_synth(cdrn_session* session) {
    if (!session) {
        set_error("null session");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&]() {
        session->config.validate();
        cdrn::write_run_manifest(session->config, "synth");
        cdrn::build_dataset(session->config.data, session->config.dataset_dir);
    });
}

cdrn_status cdrn_train(cdrn_session* session, int stage) {
    if (!session) {
        set_error("null session");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    if (stage < 0 || stage > 3) {
        set_error("stage must be 0 (all), 1, 2 or 3");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&]() {
        const cdrn::Config& cfg = session->config;
        cfg.validate();
        cdrn::write_run_manifest(cfg, "train");
        cdrn::Dataset data = cdrn::load_dataset(cfg.dataset_dir);
        fs::create_directories(cfg.out_dir);
        std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl", std::ios::app);
        if (stage == 0) {
            for (int s = 1; s <= 3; ++s) train_one_stage(cfg, s, data, log);
        } else {
            train_one_stage(cfg, stage, data, log);
        }
    });
}

cdrn_status cdrn_eval(cdrn_session* session, const char* checkpoint_path) {
    if (!session || !checkpoint_path) {
        set_error("null argument");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&]() {
        const cdrn::Config& cfg = session->config;
        cfg.validate();
        cdrn::write_run_manifest(cfg, "eval");
        cdrn::Dataset data = cdrn::load_dataset(cfg.dataset_dir);
        cdrn::Checkpoint ckpt = cdrn::load_checkpoint(checkpoint_path);
        cdrn::Model model(cfg, cfg.seed);
        model.load_tensors(ckpt);
        const auto& samples = data.test.empty() ? data.train : data.test;
        cdrn::EvalResult res = cdrn::evaluate_model(cfg, model, samples, data.classes);
        cdrn::write_eval_outputs(cfg, res);
    });
}

cdrn_status cdrn_infer(cdrn_session* session, const char* checkpoint_path, const char* image_path,
                       const char* output_prefix) {
    if (!session || !checkpoint_path || !image_path || !output_prefix) {
        set_error("null argument");
        return CDRN_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&]() {
        const cdrn::Config& cfg = session->config;
        cdrn::Checkpoint ckpt = cdrn::load_checkpoint(checkpoint_path);
        cdrn::Model model(cfg, cfg.seed);
        model.load_tensors(ckpt);
        cdrn::Tensor rainy = cdrn::load_png_rgb(image_path);
        cdrn::InferenceResult res = cdrn::infer_image(model, rainy);

        const std::string prefix(output_prefix);
        cdrn::save_png_rgb(res.derained, prefix + "_derained.png");
        cdrn::save_png_rgb(cdrn::draw_detections(res.derained, res.detections),
                           prefix + "_overlay.png");
        std::ofstream out(prefix + "_detections.json");
        if (!out) cdrn::fail("cannot write '" + prefix + "_detections.json'");
        out << "[\n";
        for (std::size_t i = 0; i < res.detections.size(); ++i) {
            const cdrn::Detection& d = res.detections[i];
            const std::string cls =
                d.cls < static_cast<int>(cfg.data.classes.size())
                    ? cfg.data.classes[static_cast<std::size_t>(d.cls)]
                    : std::to_string(d.cls);
            out << "  {\"class\": \"" << cls << "\", \"score\": " << d.score << ", \"box\": ["
                << d.box.x1 << ", " << d.box.y1 << ", " << d.box.x2 << ", " << d.box.y2 << "]}"
                << (i + 1 < res.detections.size() ? "," : "") << "\n";
        }
        out << "]\n";
    });
}

cdrn_status cdrn_gradcheck(uint64_t seed, char* report_buf, size_t report_cap, int* failed_count) {
    return guarded([&]() {
        cdrn::SuiteOptions opts;
        if (seed != 0) opts.base_seed = seed;
        auto reports = cdrn::run_gradcheck_suite(opts);
        int failed = 0;
        for (const auto& r : reports)
            if (!r.pass) ++failed;
        if (failed_count) *failed_count = failed;
        if (report_buf && report_cap > 0) {
            const std::string text = cdrn::render_gradcheck_reports(reports);
            const size_t n = std::min(report_cap - 1, text.size());
            std::memcpy(report_buf, text.data(), n);
            report_buf[n] = '\0';
        }
        if (failed > 0) cdrn::fail(std::to_string(failed) + " gradient checks failed");
    });
}

}  // extern "C"
