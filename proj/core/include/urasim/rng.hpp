#pragma once

#include <cstdint>
#include <random>

#include "urasim/matrix.hpp"

namespace urasim {

/// Deterministic random stream addressed by (seed, stream_id).
///
/// Equal (seed, stream_id) gives the identical draw sequence on every run
/// and under every thread schedule; parallel workers each own their stream.
/// Gaussian draws use explicit Box-Muller so the sequence depends only on
/// the engine, not on library distribution internals.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t s = seed;
    std::uint64_t t = seed ^ (stream_id * 0x9E3779B97F4A7C15ULL) ^ 0xA0761D6478BD642FULL;
    const std::uint64_t words[4] = {splitmix(s), splitmix(t), splitmix(s), splitmix(t)};
    std::seed_seq seq{static_cast<std::uint32_t>(words[0]), static_cast<std::uint32_t>(words[0] >> 32),
                      static_cast<std::uint32_t>(words[1]), static_cast<std::uint32_t>(words[1] >> 32),
                      static_cast<std::uint32_t>(words[2]), static_cast<std::uint32_t>(words[2] >> 32),
                      static_cast<std::uint32_t>(words[3]), static_cast<std::uint32_t>(words[3] >> 32)};
    gen_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in (0, 1]; never 0, safe under log().
  double uniform01() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform in [0, n) without modulo bias.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Real N(0, 1).
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Circularly-symmetric CN(0, 1): E|z|^2 = 1.
  cplx cnormal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-std::log(u1));
    return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t splitmix(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 gen_;
};

}  // namespace urasim
