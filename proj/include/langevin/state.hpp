#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "langevin/types.hpp"

namespace langevin {

struct PhaseState {
  std::vector<Vec> positions;
  std::vector<Vec> momenta;  // velocities for the classical kinds
  double time = 0.0;

  static PhaseState zeros(int particle_count, int dimension);

  int particle_count() const { return static_cast<int>(positions.size()); }
  int dimension() const { return positions.empty() ? 0 : static_cast<int>(positions[0].size()); }

  bool operator==(const PhaseState& other) const;
};

enum class ModelKind {
  classical,
  relativistic,
  overdamped,
  classical_limit,
  classical_truncated,
  relativistic_truncated,
  overdamped_truncated,
  classical_limit_truncated,
};

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

bool is_truncated(ModelKind kind);
// Kind with the truncation stripped, e.g. relativistic_truncated -> relativistic.
ModelKind base_kind(ModelKind kind);
bool needs_mass(ModelKind kind);
bool needs_epsilon(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::classical;
  std::optional<double> mass;
  std::optional<double> epsilon;
  std::optional<double> truncation_radius;
  int dimension = 1;
  int particle_count = 1;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  double collision_guard = 1e-10;
  // Overdamped kinds only: keep the noise-induced drift div D^{-1}. Turning it
  // off gives the control system used by the small-mass experiment.
  bool noise_induced_drift = true;

  // Human-readable list of invariant violations; empty when valid.
  std::vector<std::string> problems() const;
  // Throws ConfigError listing every problem.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// +infinity for a single particle.
double min_pair_distance(const PhaseState& state);

struct StateViolation {
  enum class Kind { shape, non_finite, collision, ordering };
  Kind kind;
  int first = -1;
  int second = -1;
  std::string message;
};

// Empty optional when the state lies in the phase space of `cfg`.
std::optional<StateViolation> validate_state(const PhaseState& state, const ModelConfig& cfg);

}  // namespace langevin
