#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/tensor.hpp"

namespace cdrn {

// On-disk layout (little-endian):
//   magic "CDRN", u32 version,
//   u64 tensor count, per tensor { u32 name length, name bytes, u32 rank,
//     u64 extents[rank], f32 payload (row-major) },
//   u8 optimizer-present, optimizer block { u64 step count, f64 lr/beta1/
//     beta2/eps, u64 slot count, per slot { u32 name length, name bytes,
//     u64 numel, f32 m[], f32 v[] } },
//   u64 trailer length, JSON trailer { stage, epoch, global_step,
//     config_checksum }.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    struct NamedTensor {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };
    struct OptimizerSlot {
        std::string name;
        std::vector<float> m, v;
    };

    std::vector<NamedTensor> tensors;

    bool has_optimizer = false;
    std::uint64_t optimizer_step = 0;
    AdamConfig optimizer_config;
    std::vector<OptimizerSlot> optimizer_slots;

    int stage = 0;
    int epoch = 0;
    std::uint64_t global_step = 0;
    std::uint32_t config_checksum = 0;

    const NamedTensor* find(std::string_view name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cdrn
