#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cosy {

// Stable 64-bit mixing used to derive per-subsystem seeds. Unlike std::hash
// the values are identical on every platform and standard library.
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t HashString(std::string_view s);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view a,
                         std::string_view b);

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distributions are implemented here
// because the std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t UniformIndex(std::uint64_t n);
  // Standard normal via Box-Muller (no cached second value).
  double Normal();
  double Normal(double mean, double sigma) { return mean + sigma * Normal(); }
  bool Bernoulli(double p) { return Uniform() < p; }

  // k distinct indices from [0, n) in ascending order (Floyd's algorithm).
  std::vector<std::uint64_t> SampleWithoutReplacement(std::uint64_t n,
                                                      std::uint64_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace cosy
