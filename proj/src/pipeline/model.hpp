#pragma once

#include <memory>

#include "detect/decode.hpp"
#include "nn/derain_net.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/config.hpp"

namespace cdrn {

// Both sub-networks over one parameter set, initialized from a single seed.
// Parameter names carry "derain." / "detector." prefixes, which stage
// freezing and checkpoints key on.
class Model {
  public:
    Model(const Config& cfg, std::uint64_t seed);

    ParamSet& params() { return *params_; }
    const ParamSet& params() const { return *params_; }
    const DerainNet& derain() const { return derain_; }
    const Detector& detector() const { return det_; }
    const DetectorConfig& detector_config() const { return det_cfg_; }

    void freeze_all();
    void set_trainable_for_stage(int stage);

    // Copies checkpoint tensors into the live parameters (names and shapes
    // must match the architecture).
    void load_tensors(const Checkpoint& ckpt);
    Checkpoint snapshot() const;  // tensors only; trainer fills the rest

  private:
    std::unique_ptr<ParamSet> params_;
    DetectorConfig det_cfg_;
    DerainNet derain_;
    Detector det_;
};

}  // namespace cdrn
