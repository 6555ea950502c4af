#pragma once

#include <cstdint>
#include <random>

namespace cape {

/// Deterministic stream RNG: one stream per (seed, stream, purpose) triple so
/// replicate r of any experiment reproduces independently of scheduling.
/// Normal draws use Box-Muller and gamma draws the Marsaglia-Tsang rejection
/// method (shape > 1, boosted below 1), both pinned here rather than
/// delegating to implementation-defined std distributions.
class StreamRng {
 public:
  enum Purpose : std::uint64_t {
    kLoadings = 1,
    kIdioStd = 2,
    kFactors = 3,
    kIdioNoise = 4,
    kGeneric = 5,
  };

  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t purpose);

  /// Uniform on (0, 1), never exactly 0 or 1.
  double uniform();

  /// Standard normal.
  double normal();

  /// Gamma(shape, scale), shape > 0, scale > 0.
  double gamma(double shape, double scale);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cape
