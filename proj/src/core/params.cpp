#include "core/params.hpp"

#include <cmath>

namespace cdrn {

Tensor ParamSet::add(const std::string& name, Tensor t) {
    if (find(name)) fail("parameter '" + name + "' registered twice");
    if (!t.defined()) fail("parameter '" + name + "' is undefined");
    t.set_requires_grad(true);
    entries_.push_back(Entry{name, t});
    return t;
}

const Tensor* ParamSet::find(std::string_view name) const {
    for (const Entry& e : entries_)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

Tensor* ParamSet::find(std::string_view name) {
    for (Entry& e : entries_)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

std::size_t ParamSet::total_values() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.tensor.numel();
    return n;
}

void ParamSet::set_requires_grad(bool on) {
    for (Entry& e : entries_) e.tensor.set_requires_grad(on);
}

void ParamSet::set_requires_grad_prefix(std::string_view prefix, bool on) {
    for (Entry& e : entries_)
        if (e.name.size() >= prefix.size() && std::string_view(e.name).substr(0, prefix.size()) == prefix)
            e.tensor.set_requires_grad(on);
}

void ParamSet::zero_grads() {
    for (Entry& e : entries_) e.tensor.zero_grad();
}

std::vector<ParamSet::Entry*> ParamSet::trainable() {
    std::vector<Entry*> out;
    for (Entry& e : entries_)
        if (e.tensor.requires_grad()) out.push_back(&e);
    return out;
}

namespace {
Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (real& v : t.mut()) v = static_cast<real>(rng.normal(0.0, stddev));
    return t;
}
}  // namespace

Tensor kaiming_conv_weight(int cout, int cin, int kh, int kw, Rng& rng) {
    const double fan_in = static_cast<double>(cin) * kh * kw;
    return normal_tensor({cout, cin, kh, kw}, std::sqrt(2.0 / fan_in), rng);
}

Tensor kaiming_conv_transpose_weight(int cin, int cout, int kh, int kw, Rng& rng) {
    const double fan_in = static_cast<double>(cin) * kh * kw;
    return normal_tensor({cin, cout, kh, kw}, std::sqrt(2.0 / fan_in), rng);
}

Tensor kaiming_linear_weight(int out_features, int in_features, Rng& rng) {
    return normal_tensor({out_features, in_features}, std::sqrt(2.0 / in_features), rng);
}

}  // namespace cdrn
