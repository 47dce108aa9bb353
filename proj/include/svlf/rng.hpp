#pragma once

#include <cstdint>
#include <random>

namespace svlf {

// splitmix64, used to decorrelate derived stream seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic generator: MT19937-64 with hand-rolled uniform mapping so the
// produced values are identical across standard library implementations
// (std::uniform_real_distribution is not portable).
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Independent stream for a named purpose; same (seed, id) -> same stream.
    Rng sub(uint64_t stream_id) const { return Rng(seed_ ^ mix64(stream_id + 0x51ed2700)); }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

// Stream ids for the named streams used across the project.
enum : uint64_t {
    kStreamFeaturesThickness = 1,
    kStreamFeaturesColor = 2,
    kStreamDecoderThickness = 3,
    kStreamDecoderColor = 4,
    kStreamEpochShuffle = 5,
    kStreamScene = 6,
    kStreamCameras = 7,
};

}  // namespace svlf
