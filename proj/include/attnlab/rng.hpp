#pragma once

#include <cstdint>
#include <random>

namespace attnlab {

// Deterministic random source. mt19937_64 has a fully specified output
// sequence; the distribution transforms are hand-rolled because the
// standard library ones are implementation-defined, and reruns must be
// reproducible byte for byte.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for desk-scale n.
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    // Derives an independent, reproducible substream of the original seed.
    Rng fork(uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ull * (stream + 1))));
    }

    uint64_t seed() const { return seed_; }

    static uint64_t splitmix64(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace attnlab
