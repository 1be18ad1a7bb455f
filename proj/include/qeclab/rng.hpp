#pragma once

#include <cstdint>
#include <random>

namespace qeclab {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seedable random source. All sampling paths avoid std distributions so that
/// sequences are identical across standard-library implementations. Derived
/// streams depend only on the construction seed, not on how much of this
/// stream has been consumed.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t seed() const {
        return seed_;
    }

    uint64_t next_u64() {
        return engine_();
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). bound must be positive.
    uint64_t uniform_int(uint64_t bound) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    /// Independent stream keyed by (seed, stream index).
    Rng derive(uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ splitmix64(stream)));
    }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace qeclab
