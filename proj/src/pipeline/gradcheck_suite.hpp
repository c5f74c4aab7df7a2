#pragma once

#include <string>
#include <vector>

#include "core/gradcheck.hpp"

namespace cdrn {

struct SuiteOptions {
    double tol = 0;  // 0 -> precision default (1e-3 for f32, 1e-6 for f64)
    int seeds = 10;
    std::uint64_t base_seed = 0xc0ffee;
};

double gradcheck_default_tol();

// Finite-difference verification of every differentiable operation, every
// network block (HIN, SAR, SAM, CSFF, residual stage, FPN, head) and every
// loss, each over `seeds` independent random inputs. A check's report holds
// the worst case across its seeds.
std::vector<GradCheckReport> run_gradcheck_suite(const SuiteOptions& opts = {});

bool gradcheck_suite_passed(const std::vector<GradCheckReport>& reports);
std::string render_gradcheck_reports(const std::vector<GradCheckReport>& reports);

}  // namespace cdrn
