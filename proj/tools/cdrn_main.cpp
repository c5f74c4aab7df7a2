// Command-line front end; links only the public C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdrn/cdrn.h"

namespace {

struct SessionGuard {
    cdrn_session* ptr = nullptr;
    ~SessionGuard() { cdrn_session_close(ptr); }
};

int report_failure(const char* what, cdrn_status status) {
    std::fprintf(stderr, "error: %s failed (%d): %s\n", what, static_cast<int>(status),
                 cdrn_last_error());
    return 1;
}

int open_session(const std::string& config, bool have_seed, uint64_t seed, const std::string& out,
                 const std::string& dataset, SessionGuard& guard) {
    cdrn_status st = cdrn_session_open(config.empty() ? nullptr : config.c_str(), &guard.ptr);
    if (st != CDRN_OK) return report_failure("loading configuration", st);
    if (have_seed) cdrn_session_set_seed(guard.ptr, seed);
    if (!out.empty()) cdrn_session_set_output_dir(guard.ptr, out.c_str());
    if (!dataset.empty()) cdrn_session_set_dataset_dir(guard.ptr, dataset.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascaded image deraining + object detection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config, out_dir, dataset_dir;
    uint64_t seed = 0;
    bool have_seed = false;
    app.add_option("--config", config, "JSON configuration file");
    app.add_option("--seed", seed, "override the run seed")->each([&](const std::string&) {
        have_seed = true;
    });
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--data", dataset_dir, "dataset directory");

    auto* synth = app.add_subcommand("synth", "build the paired rain dataset");

    auto* train = app.add_subcommand("train", "run the three-stage training strategy");
    std::string stage_arg = "all";
    train->add_option("--stage", stage_arg, "1, 2, 3 or all")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and emit the metric report");
    std::string eval_ckpt;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

    auto* infer = app.add_subcommand("infer", "derain one image and detect objects on it");
    std::string infer_ckpt, image, prefix = "infer_out";
    infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
    infer->add_option("--image", image, "rainy PNG")->required();
    infer->add_option("--prefix", prefix, "output file prefix")->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "run the gradient verification suite");
    uint64_t gc_seed = 0;
    gradcheck->add_option("--seed", gc_seed, "suite base seed");

    auto* show = app.add_subcommand("config", "print the resolved configuration");

    CLI11_PARSE(app, argc, argv);

    if (gradcheck->parsed()) {
        std::vector<char> buf(1 << 16);
        int failed = 0;
        cdrn_status st = cdrn_gradcheck(gc_seed, buf.data(), buf.size(), &failed);
        std::fputs(buf.data(), stdout);
        if (st != CDRN_OK) {
            std::fprintf(stderr, "gradcheck: %d checks failed\n", failed);
            return 1;
        }
        std::puts("gradcheck: all checks passed");
        return 0;
    }

    SessionGuard session;
    if (int rc = open_session(config, have_seed, seed, out_dir, dataset_dir, session)) return rc;

    if (show->parsed()) {
        size_t needed = 0;
        cdrn_session_config_json(session.ptr, nullptr, 0, &needed);
        std::vector<char> buf(needed);
        cdrn_status st = cdrn_session_config_json(session.ptr, buf.data(), buf.size(), nullptr);
        if (st != CDRN_OK) return report_failure("config", st);
        std::puts(buf.data());
        return 0;
    }
    if (synth->parsed()) {
        cdrn_status st = cdrn_synth(session.ptr);
        if (st != CDRN_OK) return report_failure("synth", st);
        std::puts("synth: dataset written");
        return 0;
    }
    if (train->parsed()) {
        int stage = 0;
        if (stage_arg == "all") {
            stage = 0;
        } else if (stage_arg == "1" || stage_arg == "2" || stage_arg == "3") {
            stage = stage_arg[0] - '0';
        } else {
            std::fprintf(stderr, "error: --stage must be 1, 2, 3 or all\n");
            return 1;
        }
        cdrn_status st = cdrn_train(session.ptr, stage);
        if (st != CDRN_OK) return report_failure("train", st);
        std::puts("train: done");
        return 0;
    }
    if (eval->parsed()) {
        cdrn_status st = cdrn_eval(session.ptr, eval_ckpt.c_str());
        if (st != CDRN_OK) return report_failure("eval", st);
        std::puts("eval: report written");
        return 0;
    }
    if (infer->parsed()) {
        cdrn_status st = cdrn_infer(session.ptr, infer_ckpt.c_str(), image.c_str(), prefix.c_str());
        if (st != CDRN_OK) return report_failure("infer", st);
        std::printf("infer: wrote %s_derained.png, %s_overlay.png, %s_detections.json\n",
                    prefix.c_str(), prefix.c_str(), prefix.c_str());
        return 0;
    }
    return 0;
}
