#pragma once

#include <cstdint>
#include <random>

namespace ertl {

/// splitmix64 round; used to derive independent child seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from (seed, purpose, index). Purposes are small
/// fixed tags (see Stream below) so each consumer gets an independent,
/// reproducible stream regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= purpose * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0x9e3779b97f4a7c15ULL + 1;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + (c << 1));
}

/// Stream tags for derive_seed. Keeping them in one place documents how
/// the global seed is split across the pipeline.
namespace stream {
inline constexpr std::uint64_t kEntities = 1;   // latent entity attributes
inline constexpr std::uint64_t kSigma = 2;      // per-source noise scales
inline constexpr std::uint64_t kNoise = 3;      // per-source record noise
inline constexpr std::uint64_t kTrainPairs = 4; // training pair sampling
inline constexpr std::uint64_t kTestPairs = 5;  // test pair sampling
inline constexpr std::uint64_t kSplit = 6;      // holdout/k-fold shuffles
inline constexpr std::uint64_t kTrial = 7;      // experiment trials
inline constexpr std::uint64_t kBootstrap = 8;  // bootstrap resamples
}  // namespace stream

/// Seeded generator with portable output: mt19937_64 is fully specified
/// by the standard and the uniform/gaussian transforms below avoid the
/// implementation-defined std::*_distribution classes, so sequences are
/// identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Integer uniform on [0, n) via rejection sampling (unbiased).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; caches the spare deviate.
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ertl
