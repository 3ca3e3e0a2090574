#pragma once

#include <cstdint>
#include <random>

namespace rt {

#ifdef RT_SCALAR_F64
using Scalar = double;
#else
using Scalar = float;
#endif

// SplitMix64 finalizer. Used as the hash behind every derived seed in the
// toolkit; never used directly as a generator.
uint64_t splitmix64(uint64_t x);

// Derived seeds: mix(a, b) must give streams that are independent for
// distinct b under a fixed a. Nested mixes (mix(mix(seed, epoch), index))
// are the canonical way to key per-epoch / per-sample randomness.
uint64_t mix(uint64_t a, uint64_t b);
uint64_t mix(uint64_t a, uint64_t b, uint64_t c);

// Deterministic random stream. All draws are computed from the raw 64-bit
// output with fixed arithmetic, so a given seed produces the same sequence
// on any platform regardless of the standard library's distributions.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // standard normal via Box-Muller; pairs are drawn lazily and the spare
    // is cached, so draw order is part of the stream contract
    double normal();

    // [0, n), n > 0
    int uniform_int(int n) { return static_cast<int>(uniform01() * n); }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rt
