#pragma once

#include "pipeline/model.hpp"

namespace cdrn {

struct EpochLog {
    int stage = 0;
    int epoch = 0;
    double lr = 0;
    double total = 0;     // per-step mean of the stage objective
    double derain = 0;    // restoration part (stages 2/3)
    double cls = 0, reg = 0, cnt = 0;  // focal suite parts (stages 1/3)
    double fml = 0;       // feature-map part (stage 2)
    int steps = 0;
};

// Stages 1 and 2 halve the rate from `halve_epoch` on; the joint stage runs
// at a constant rate.
double lr_schedule(int stage, int epoch, double base_lr, int halve_epoch);

struct StageResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> logs;
};

// Runs one training stage to completion. `init` carries the previous stage's
// checkpoint (required for stages 2 and 3) or a mid-run checkpoint of the
// same stage, which resumes at its recorded epoch with the optimizer state
// restored. Stage 1 trains the detector on clean images; stage 2 trains the
// restoration net on rainy input with the detector frozen; stage 3 trains
// the cascade end-to-end on rainy input.
StageResult run_stage(const Config& cfg, int stage, const Dataset& data, const Checkpoint* init);

std::string epoch_log_json(const EpochLog& log);

}  // namespace cdrn
