#include "core/adam.hpp"

#include <cmath>

namespace cdrn {

AdamState::AdamState(ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
    for (ParamSet::Entry* e : params.trainable()) {
        Slot s;
        s.name = e->name;
        s.m.assign(e->tensor.numel(), real(0));
        s.v.assign(e->tensor.numel(), real(0));
        slots_.push_back(std::move(s));
    }
}

void AdamState::step(ParamSet& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const real b1 = static_cast<real>(cfg_.beta1);
    const real b2 = static_cast<real>(cfg_.beta2);
    const real a1 = static_cast<real>(1.0 - cfg_.beta1);
    const real a2 = static_cast<real>(1.0 - cfg_.beta2);
    for (Slot& s : slots_) {
        Tensor* p = params.find(s.name);
        if (!p) fail("adam: parameter '" + s.name + "' missing from set");
        if (!p->requires_grad()) fail("adam: parameter '" + s.name + "' is frozen");
        if (!p->has_grad()) fail("adam: parameter '" + s.name + "' has no gradient");
        if (s.m.size() != p->numel()) fail("adam: moment shape mismatch for '" + s.name + "'");
        auto g = p->grad();
        auto w = p->mut();
        for (std::size_t i = 0; i < w.size(); ++i) {
            s.m[i] = b1 * s.m[i] + a1 * g[i];
            s.v[i] = b2 * s.v[i] + a2 * g[i] * g[i];
            const double mhat = static_cast<double>(s.m[i]) / bc1;
            const double vhat = static_cast<double>(s.v[i]) / bc2;
            w[i] -= static_cast<real>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
        p->zero_grad();
    }
}

void AdamState::restore(std::vector<Slot> slots, std::uint64_t t) {
    slots_ = std::move(slots);
    t_ = t;
}

}  // namespace cdrn
