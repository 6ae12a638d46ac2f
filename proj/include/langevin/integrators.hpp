#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "langevin/diffusion.hpp"
#include "langevin/noise.hpp"
#include "langevin/potentials.hpp"
#include "langevin/state.hpp"

namespace langevin {

struct ModelSpecs {
  PotentialSpec potential;
  // Used by classical and overdamped kinds. Relativistic kinds always use the
  // friction matrix built from cfg.epsilon, classical-limit kinds use D = I.
  DiffusionSpec diffusion;

  bool operator==(const ModelSpecs&) const = default;
};

// Checks that `specs` can drive `cfg` (diffusion kind, dimensions, constants).
std::vector<std::string> model_problems(const ModelConfig& cfg, const ModelSpecs& specs);

// Time derivative of positions and of momenta (velocities for classical).
struct Drift {
  std::vector<Vec> dq;
  std::vector<Vec> dp;
};

// Deterministic forces F_i = -theta(|q_i|) grad U(q_i) - sum_j theta(1/|q_i - q_j|) grad G(q_i - q_j).
// With a truncation radius the cutoffs theta_R apply, otherwise theta = 1.
// A single particle with a pair potential feels G(q) from a fixed source at
// the origin.
void compute_forces(const PhaseState& state, const PotentialSpec& potential,
                    std::optional<double> truncation_radius, std::vector<Vec>& out);

// Distance to the nearest singularity of the pair potential: the minimum
// pair distance, or |q| for a single anchored particle. +inf without G.
double singular_distance(const PhaseState& state, const PotentialSpec& potential);

// The drift functions throw CollisionError when singular_distance < guard.
Drift drift_classical(const PhaseState& state, const PotentialSpec& potential,
                      const DiffusionSpec& diffusion, double mass, double guard = 1e-10);
Drift drift_relativistic(const PhaseState& state, const PotentialSpec& potential, double epsilon,
                         double guard = 1e-10);
Drift drift_classical_limit(const PhaseState& state, const PotentialSpec& potential,
                            double guard = 1e-10);
// Position drift D^{-1} F + div D^{-1}; dp is zero.
Drift drift_overdamped(const PhaseState& state, const PotentialSpec& potential,
                       const DiffusionSpec& diffusion, bool noise_induced_drift = true,
                       double guard = 1e-10);
// Dispatch on cfg.kind, including truncated kinds.
Drift model_drift(const PhaseState& state, const ModelConfig& cfg, const ModelSpecs& specs);

enum class StepStatus { accepted, substepped, collision_rejected };

struct StepResult {
  PhaseState next_state;
  StepStatus status = StepStatus::accepted;
  int substeps = 1;  // number of accepted sub-intervals
};

// Euler-Maruyama stepper with step halving. One instance per trajectory; it
// keeps scratch buffers so that stepping does not allocate.
class Stepper {
 public:
  static constexpr int kMaxHalvings = 20;

  Stepper(const ModelConfig& cfg, const ModelSpecs& specs);

  // Advance `state` in place over grid interval `index` at noise `level`
  // (step size base_dt 2^{-level}). On rejection `state` is left unchanged.
  StepStatus advance(PhaseState& state, BrownianPath& noise, int level, std::uint64_t index,
                     int* substeps = nullptr);

  // Proposed state after one plain EM update over step h with increments dW.
  void em_update(const PhaseState& state, double h, const std::vector<Vec>& dW, PhaseState& out);

  // Domain test applied to proposals.
  bool acceptable(const PhaseState& from, const PhaseState& to) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  bool advance_rec(PhaseState& state, BrownianPath& noise, int level, std::uint64_t index,
                   int depth, int& substeps);

  ModelConfig cfg_;
  ModelSpecs specs_;
  ModelKind base_;
  std::optional<double> radius_;
  std::vector<Vec> force_;
  std::vector<Vec> dW_;
  std::vector<PhaseState> proposals_;  // one per recursion depth
};

// Noise level of cfg.dt on a grid with the given base step; throws
// ConfigError unless dt = base_dt / 2^L.
int dyadic_level(double base_dt, double dt);

StepResult step_em(const PhaseState& state, const ModelConfig& cfg, const ModelSpecs& specs,
                   BrownianPath& noise, std::uint64_t step_index);
// Same update with cutoffs; requires a truncated kind.
StepResult step_truncated(const PhaseState& state, const ModelConfig& cfg,
                          const ModelSpecs& specs, BrownianPath& noise, std::uint64_t step_index);

class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_start(const PhaseState&) {}
  virtual void on_step(const PhaseState& state, std::int64_t step) = 0;
};

struct TrajectorySummary {
  PhaseState final_state;
  std::int64_t steps = 0;
  std::int64_t substepped_steps = 0;
  std::int64_t collision_rejections = 0;
  double horizon = 0.0;
};

// Raised when a step is rejected after the maximum number of halvings.
class SimulationAborted : public std::runtime_error {
 public:
  SimulationAborted(const std::string& what, PhaseState at, std::int64_t step_index)
      : std::runtime_error(what), state(std::move(at)), step(step_index) {}
  PhaseState state;
  std::int64_t step;
};

// Number of dt steps covering [0, T]; T must be a multiple of dt.
std::int64_t step_count(double horizon, double dt);

TrajectorySummary simulate(const PhaseState& initial, const ModelConfig& cfg,
                           const ModelSpecs& specs, double horizon,
                           const std::vector<Observer*>& observers = {},
                           std::uint64_t trajectory = 0);

struct PairDistance {
  int first = 0;
  int second = 0;
  bool momenta_compared = true;  // false when either side is overdamped
  double sup_q = 0.0;            // sup_t |q_a - q_b| over all particles
  double sup_p = 0.0;
  double sup_sq = 0.0;           // sup_t (|q_a - q_b|^2 + |p_a - p_b|^2)
};

struct CoupledResult {
  std::vector<TrajectorySummary> runs;
  std::vector<PairDistance> distances;
  double base_dt = 0.0;
};

// Runs every config on one Brownian path. Distances are sampled on the grid
// of the coarsest step.
CoupledResult coupled_simulate(const PhaseState& initial, const std::vector<ModelConfig>& configs,
                               const std::vector<ModelSpecs>& specs, double horizon,
                               const std::vector<std::pair<int, int>>& pairs,
                               std::uint64_t trajectory = 0);

}  // namespace langevin
