#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace cdrn {

// Ordered, uniquely named collection of trainable tensors. Registration
// order is the canonical order for optimizer state and checkpoints.
class ParamSet {
  public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    // Registers and returns the tensor; duplicate names are an error.
    Tensor add(const std::string& name, Tensor t);

    const Tensor* find(std::string_view name) const;
    Tensor* find(std::string_view name);

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t total_values() const;

    void set_requires_grad(bool on);
    void set_requires_grad_prefix(std::string_view prefix, bool on);
    void zero_grads();

    // Trainable subset in registration order.
    std::vector<Entry*> trainable();

  private:
    std::vector<Entry> entries_;
};

// Fan-in scaled initializers.
Tensor kaiming_conv_weight(int cout, int cin, int kh, int kw, Rng& rng);
Tensor kaiming_conv_transpose_weight(int cin, int cout, int kh, int kw, Rng& rng);
Tensor kaiming_linear_weight(int out_features, int in_features, Rng& rng);

}  // namespace cdrn
