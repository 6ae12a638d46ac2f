#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "langevin/integrators.hpp"

namespace langevin {

// Value of an observable together with its position gradient, momentum
// gradient and the diagonal momentum Hessian blocks d^2 f / dp_i^2, which is
// everything the generators need.
struct Jet {
  double value = 0.0;
  std::vector<Vec> grad_q;
  std::vector<Vec> grad_p;
  std::vector<Mat> hess_p;

  static Jet constant(double c, int particle_count, int dimension);

  Jet& operator+=(const Jet& o);
  Jet& operator*=(double s);
};

Jet operator+(Jet a, const Jet& b);
Jet operator*(double s, Jet a);
Jet operator*(const Jet& a, const Jet& b);
// f^n for integer n >= 1.
Jet pow(const Jet& f, int n);

struct SmoothObservable {
  std::string name;
  std::function<Jet(const PhaseState&)> jet;

  double operator()(const PhaseState& s) const { return jet(s).value; }
};

// Classical kinds: sum m|v|^2/2 + sum U + sum_{i<j} G. Relativistic kinds:
// sum sqrt(1 + eps|p|^2) + eps sum U + eps sum_{i<j} G, which is eps times
// the energy in the Maxwell-Juttner weight. A single particle with a pair
// potential adds G(q). Truncated kinds use their base Hamiltonian.
double hamiltonian(const PhaseState& state, const PotentialSpec& potential, const ModelConfig& cfg);
Jet hamiltonian_jet(const PhaseState& state, const PotentialSpec& potential, const ModelConfig& cfg);

// H + eps1 m sum <x_i, v_i> - eps1 m sum <v_i, sum_{j != i} (x_i - x_j)/|x_i - x_j|>
double V_classical(const PhaseState& state, const PotentialSpec& potential, double mass,
                   double eps1);
Jet V_classical_jet(const PhaseState& state, const PotentialSpec& potential, double mass,
                    double eps1);

// H^2 + eps1 <p, q> - <p, q>/|q| + kappa1, single particle.
double V_relativistic_single(const PhaseState& state, const PotentialSpec& potential,
                             double epsilon, double eps1, double kappa1);
Jet V_relativistic_single_jet(const PhaseState& state, const PotentialSpec& potential,
                              double epsilon, double eps1, double kappa1);

// A1 H^3 + eps H sum <q_i, p_i>
//   - A2 eps^2 sum_{i != j} <q_i - q_j, p_i - p_j> / |q_i - q_j|^{beta1 - 1} + kappaN
double V_relativistic_multi(const PhaseState& state, const PotentialSpec& potential,
                            double epsilon, double A1, double A2, double kappaN);
Jet V_relativistic_multi_jet(const PhaseState& state, const PotentialSpec& potential,
                             double epsilon, double A1, double A2, double kappaN);

// Generator of the classical, relativistic or classical-limit dynamics
// applied to f at `state`. Throws KindError for other kinds and
// CollisionError inside the collision guard.
double apply_generator(const Jet& f, const PhaseState& state, const ModelConfig& cfg,
                       const ModelSpecs& specs);
double apply_generator(const SmoothObservable& f, const PhaseState& state, const ModelConfig& cfg,
                       const ModelSpecs& specs);

enum class LyapunovKind { classical, relativistic_single, relativistic_multi };
std::string_view to_string(LyapunovKind kind);

// Free constants of the Lyapunov functions. NaN means "use the default".
struct LyapunovParams {
  double eps1 = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double A1 = 10.0;
  double A2 = 10.0;
  int power = 1;  // certify V^power
};

struct SamplePlan {
  double q_min = 1e-2, q_max = 1e2;
  int q_count = 13;
  double p_min = 1e-2, p_max = 1e2;
  int p_count = 13;
  int directions = 4;  // random direction draws per radius pair when d >= 2
  std::vector<double> near_collision = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  double core_quantile = 0.9;
  std::uint64_t seed = 1;
};

// States on the plan: log-radial grids in |q| and |p| (plus zero), with
// near-collision pair configurations for N >= 2.
std::vector<PhaseState> plan_states(const SamplePlan& plan, const ModelConfig& cfg,
                                    LyapunovKind kind);

struct DriftAttempt {
  double eps1;
  double c;
};

struct DriftCertificate {
  LyapunovKind kind = LyapunovKind::classical;
  double alpha = 1.0;
  int power = 1;
  double c = 0.0;
  double C = 0.0;
  double C0 = 0.0;
  double V0 = 0.0;
  double max_residual = 0.0;
  long sample_count = 0;
  long core_count = 0;
  bool trivial = false;  // no samples outside the core
  bool valid = false;
  double eps1 = 0.0;
  double kappa = 0.0;
  double A1 = 0.0, A2 = 0.0;
  std::vector<DriftAttempt> attempts;
  SamplePlan plan;
};

// Exponent alpha the drift inequality is stated with for V^n.
double default_alpha(LyapunovKind kind, int power);

// Fits L V^n <= -c V^{n alpha'} + C on the plan. Explicit states (when not
// empty) replace the plan's grid.
DriftCertificate certify_drift(LyapunovKind kind, const ModelConfig& cfg, const ModelSpecs& specs,
                               double alpha, const SamplePlan& plan,
                               const LyapunovParams& params = {},
                               const std::vector<PhaseState>& explicit_states = {});

}  // namespace langevin
