#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace sos {

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of tags into a base seed. Distinct tag paths give
/// statistically independent streams; the result depends only on the values.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Substream tags. Kept stable: changing any of these changes every output.
namespace stream {
inline constexpr std::uint64_t kModes = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kPower = 3;
inline constexpr std::uint64_t kCompare = 4;
inline constexpr std::uint64_t kSolver = 5;
inline constexpr std::uint64_t kNetwork = 6;
inline constexpr std::uint64_t kWarmup = 7;
inline constexpr std::uint64_t kCheck = 8;
}  // namespace stream

/// Platform-stable random stream. mt19937_64 output is fixed by the
/// standard; the uniform and normal transforms are spelled out here because
/// the <random> distributions are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller, caching the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sos
