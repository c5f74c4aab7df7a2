#pragma once

#include <cstdint>
#include <vector>

#include "core/params.hpp"

namespace cdrn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over the trainable entries of one ParamSet. Moment
// buffers are keyed by parameter name so state survives checkpointing.
class AdamState {
  public:
    struct Slot {
        std::string name;
        std::vector<real> m;
        std::vector<real> v;
    };

    AdamState() = default;
    AdamState(ParamSet& params, AdamConfig cfg);

    // One update over every trainable parameter; all gradients must be
    // populated. Gradients are zeroed afterwards.
    void step(ParamSet& params);

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::uint64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }
    void restore(std::vector<Slot> slots, std::uint64_t t);

  private:
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    std::uint64_t t_ = 0;
};

}  // namespace cdrn
