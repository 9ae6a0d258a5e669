#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace xnav {

/// Seeded generator with a platform-independent draw sequence. The engine is
/// std::mt19937_64, whose output is fixed by the standard; the standard
/// distributions are not, so every draw here is derived from raw engine
/// output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

/// Independent sub-stream seed for a named consumer of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace xnav
