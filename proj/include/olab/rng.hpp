#ifndef OLAB_RNG_HPP
#define OLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace olab {

// Deterministic RNG wrapper. std::mt19937_64 is bit-exact across platforms,
// but the standard distributions are not, so all draws are derived from raw
// 64-bit words here.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)), seed_base_(mix(seed)) {}

  // Substream derivation: same (seed, stream) pair always yields the same
  // sequence, independent of draw order in other streams.
  Rng substream(std::uint64_t stream) const {
    return Rng(mix(seed_base_ ^ mix(stream + 0x9e3779b97f4a7c15ull)), 0);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [0, n). Floor-based; bias is negligible for the
  // population sizes used here and the mapping is platform-stable.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    auto idx = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return idx >= n ? n - 1 : idx;
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

private:
  Rng(std::uint64_t mixed_seed, int) : engine_(mixed_seed), seed_base_(mixed_seed) {}

  // SplitMix64 finalizer; decorrelates adjacent integer seeds.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::uint64_t seed_base_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace olab

#endif  // OLAB_RNG_HPP
