#pragma once

#include <cstdint>
#include <random>

namespace dgcf {

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so every
/// derived draw is computed here from raw 64-bit words:
///   - uniform_index(n): rejection sampling on the largest multiple of n
///     below 2^64, then modulo n.
///   - uniform01(): top 53 bits scaled by 2^-53, giving [0, 1).
///   - normal(): Box-Muller on two uniform01 draws, the second variate cached.
/// Any implementation following these rules reproduces the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  std::uint64_t uniform_index(std::uint64_t n);

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace dgcf
