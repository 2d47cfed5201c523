#pragma once

#include <cstdint>

#include "filtkit/numkit.hpp"

namespace filtkit {

// Deterministic, splittable Gaussian stream. (seed, stream) pairs index
// statistically independent substreams; identical pairs replay identical
// draws on every platform.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();  // (0, 1]
  double normal();   // standard normal, Box-Muller with cached spare
  Vector normal_vector(Index d);

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable mix of a base seed and a run/path index for per-run substreams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace filtkit
