#include "core/rng.hpp"

#include <cmath>

namespace cdrn {

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    // 53 random bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

unsigned Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    unsigned total = 0;
    while (lambda > 30.0) {
        // Poisson(a + b) = Poisson(a) + Poisson(b) for independent draws.
        const double chunk = 30.0;
        const double l = std::exp(-chunk);
        double p = 1.0;
        unsigned k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        total += k - 1;
        lambda -= chunk;
    }
    const double l = std::exp(-lambda);
    double p = 1.0;
    unsigned k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return total + k - 1;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char ch : key) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    h ^= seed >> 32;
    h *= 0x100000001b3ULL;
    return h;
}

}  // namespace cdrn
