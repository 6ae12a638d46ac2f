#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "langevin/types.hpp"

namespace langevin {

// Counter-based Brownian path of one particle on a dyadic time grid.
//
// Level 0 increments live on intervals of length base_dt. An increment at
// level L+1 is derived from its parent at level L by Brownian-bridge
// midpoint sampling, so the two halves always add up to the parent (up to
// one rounding) and runs at dt = base_dt / 2^L see the same path.
class NoiseStream {
 public:
  static constexpr int kMaxLevel = 63;

  NoiseStream(std::uint64_t seed, std::uint64_t stream_id, int dimension, double base_dt);

  // Standard normal attached to grid node (level, index, component). Pure.
  double normal(int level, std::uint64_t index, int component) const;

  // Increment over [index h_L, (index + 1) h_L] with h_L = base_dt 2^{-L}.
  const Vec& increment(int level, std::uint64_t index);

  double base_dt() const { return base_dt_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  struct Slot {
    std::uint64_t index = ~std::uint64_t{0};
    Vec value;
  };

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  int dimension_;
  double base_dt_;
  std::array<Slot, kMaxLevel + 1> cache_;
};

// One NoiseStream per particle of a trajectory. Stream ids are
// trajectory * N + particle so ensembles get disjoint paths from one seed.
class BrownianPath {
 public:
  BrownianPath(std::uint64_t seed, std::uint64_t trajectory, int particle_count, int dimension,
               double base_dt);

  NoiseStream& particle(int i) { return streams_[i]; }
  int particle_count() const { return static_cast<int>(streams_.size()); }
  double base_dt() const { return streams_.front().base_dt(); }

 private:
  std::vector<NoiseStream> streams_;
};

// splitmix64 finalizer; exposed for tests and for deriving sub-seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace langevin
