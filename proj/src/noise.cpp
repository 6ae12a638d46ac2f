#include "langevin/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace langevin {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// Uniform in (0, 1] from the top 53 bits.
double unit_open_closed(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream_id, int dimension,
                         double base_dt)
    : seed_(seed), stream_id_(stream_id), dimension_(dimension), base_dt_(base_dt) {
  if (!(base_dt > 0.0)) throw std::invalid_argument("NoiseStream needs base_dt > 0");
  for (auto& slot : cache_) slot.value = Vec::Zero(dimension);
}

double NoiseStream::normal(int level, std::uint64_t index, int component) const {
  std::uint64_t h = mix64(seed_);
  h = mix64(h ^ (stream_id_ * 0xd6e8feb86659fd93ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(level) * 0xa0761d6478bd642fULL));
  h = mix64(h ^ index);
  h = mix64(h ^ (static_cast<std::uint64_t>(component) * 0xe7037ed1a0b428dbULL));
  // Box-Muller, cosine branch.
  const double u1 = unit_open_closed(h);
  const double u2 = unit_open_closed(mix64(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const Vec& NoiseStream::increment(int level, std::uint64_t index) {
  if (level < 0 || level > kMaxLevel) throw std::out_of_range("noise level out of range");
  Slot& slot = cache_[level];
  if (slot.index == index) return slot.value;
  if (level == 0) {
    const double sd = std::sqrt(base_dt_);
    for (int c = 0; c < dimension_; ++c) slot.value[c] = sd * normal(0, index, c);
  } else {
    const std::uint64_t parent_index = index >> 1;
    const Vec& parent = increment(level - 1, parent_index);
    // Conditional on W over the parent interval H, the first half is
    // N(W/2, H/4).
    const double half_sd = 0.5 * std::sqrt(std::ldexp(base_dt_, -(level - 1)));
    for (int c = 0; c < dimension_; ++c) {
      const double first = 0.5 * parent[c] + half_sd * normal(level, parent_index, c);
      slot.value[c] = (index & 1U) ? parent[c] - first : first;
    }
  }
  slot.index = index;
  return slot.value;
}

BrownianPath::BrownianPath(std::uint64_t seed, std::uint64_t trajectory, int particle_count,
                           int dimension, double base_dt) {
  streams_.reserve(particle_count);
  for (int i = 0; i < particle_count; ++i)
    streams_.emplace_back(seed, trajectory * static_cast<std::uint64_t>(particle_count) + i,
                          dimension, base_dt);
}

}  // namespace langevin
