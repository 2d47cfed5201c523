#include "filtkit/noise.hpp"

#include <cmath>
#include <numbers>

namespace filtkit {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = derive_seed(seed, stream);
  for (auto& s : state_) s = splitmix64(x);
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

std::uint64_t NoiseStream::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double NoiseStream::uniform() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double NoiseStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double a = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vector NoiseStream::normal_vector(Index d) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = normal();
  return v;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL + (index << 1));
  std::uint64_t mixed = splitmix64(x);
  return mixed ^ splitmix64(x);
}

}  // namespace filtkit
