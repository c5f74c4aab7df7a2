#pragma once

#include <cstdint>
#include <string_view>

namespace cdrn {

// Deterministic splitmix64 generator with platform-stable distribution code.
// Standard-library distributions are implementation-defined, which would
// break reproducible datasets and training runs across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller, one cached spare.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    // Exact Poisson sampling; large means are split into additive chunks so
    // the Knuth product never underflows.
    unsigned poisson(double lambda);

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a over the key, mixed with the seed; used to derive stable per-item
// seeds (e.g. per image name).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

}  // namespace cdrn
