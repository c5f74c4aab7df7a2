#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace cdrn {

struct GradCheckOptions {
    double tol = 1e-3;
    // Central-difference step, scaled per coordinate by max(1, |value|).
    double step = 0.0;  // 0 -> precision default
    // Coordinates probed per input tensor (random subset, deterministic).
    int max_probes = 20;
    std::uint64_t seed = 0x5eed;
    // A probe whose two-step estimates disagree by more than this factor of
    // their magnitude sits on a kink (or in FD noise) and is excluded.
    double kink_reject = 0.2;
};

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    int probes = 0;
    int skipped = 0;
    bool pass = false;
    std::string detail;
};

// f maps the inputs to a scalar loss. Analytic gradients come from one taped
// backward pass; the reference is a central finite difference evaluated
// without any recording, so the two paths share no differentiation code.
GradCheckReport grad_check(const std::string& name,
                           const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           const std::vector<Tensor>& inputs, const GradCheckOptions& opts = {});

// Same check against live leaf tensors (parameters of an already-built
// module plus any extra inputs): `forward` closes over them, and they are
// perturbed in place. Values are restored; gradients are cleared.
GradCheckReport grad_check_inplace(const std::string& name,
                                   const std::function<Tensor()>& forward,
                                   const std::vector<Tensor>& leaves,
                                   const GradCheckOptions& opts = {});

double default_fd_step();

}  // namespace cdrn
