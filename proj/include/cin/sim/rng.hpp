#pragma once

// Counter-based random draws keyed by (seed, vehicle, stream, tick, index).
// Every draw is a pure function of its key, so streams never interfere.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cin::sim {

enum class Stream : std::uint64_t {
  gyro_noise = 1,
  accel_noise,
  gyro_bias,
  accel_bias,
  gnss_position,
  gnss_velocity,
  gnss_bias,
  range,
  initial_error,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t entity, Stream stream, std::uint64_t tick, std::uint64_t index) const {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ entity);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ tick);
    return splitmix64(h ^ index);
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t entity, Stream stream, std::uint64_t tick, std::uint64_t index) const {
    return (static_cast<double>(bits(entity, stream, tick, index) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on draws 2*index and 2*index+1.
  double normal(std::uint64_t entity, Stream stream, std::uint64_t tick, std::uint64_t index) const {
    const double u1 = uniform(entity, stream, tick, 2 * index);
    const double u2 = uniform(entity, stream, tick, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
};

/// Entity key for an unordered vehicle pair.
inline constexpr std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t lo = a < b ? a : b;
  const std::uint64_t hi = a < b ? b : a;
  return (hi << 32) | lo | (1ULL << 63);
}

}  // namespace cin::sim
