#include "langevin/integrators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

bool finite_state(const PhaseState& s) {
  for (const auto& v : s.positions)
    if (!v.allFinite()) return false;
  for (const auto& v : s.momenta)
    if (!v.allFinite()) return false;
  return true;
}

void check_guard(const PhaseState& state, const PotentialSpec& potential, double guard) {
  if (!potential.has_pair()) return;
  const double d = singular_distance(state, potential);
  if (d < guard) {
    std::ostringstream os;
    os << "collision: separation " << d << " below guard " << guard;
    throw CollisionError(os.str(), -1, -1);
  }
}

Drift empty_drift(const PhaseState& state) {
  const int n = state.particle_count(), d = state.dimension();
  return Drift{std::vector<Vec>(n, Vec::Zero(d)), std::vector<Vec>(n, Vec::Zero(d))};
}

DiffusionSpec relativistic_spec(const ModelConfig& cfg) {
  return DiffusionSpec{RelativisticFriction{*cfg.epsilon}};
}

}  // namespace

std::vector<std::string> model_problems(const ModelConfig& cfg, const ModelSpecs& specs) {
  auto out = cfg.problems();
  for (auto& p : specs.potential.problems()) out.push_back(std::move(p));
  const ModelKind b = base_kind(cfg.kind);
  if (b == ModelKind::classical || b == ModelKind::overdamped) {
    if (specs.diffusion.is_relativistic())
      out.push_back(std::string(to_string(cfg.kind)) + " needs a classical diffusion field");
    else
      for (auto& p : specs.diffusion.problems(cfg.dimension)) out.push_back(std::move(p));
  }
  return out;
}

double singular_distance(const PhaseState& state, const PotentialSpec& potential) {
  if (!potential.has_pair()) return std::numeric_limits<double>::infinity();
  if (state.particle_count() == 1) return state.positions[0].norm();
  return min_pair_distance(state);
}

void compute_forces(const PhaseState& state, const PotentialSpec& potential,
                    std::optional<double> truncation_radius, std::vector<Vec>& out) {
  const int n = state.particle_count();
  out.resize(n);
  const auto& c = potential.confining;
  for (int i = 0; i < n; ++i) {
    const Vec& q = state.positions[i];
    const double r2 = q.squaredNorm();
    double th = 1.0;
    if (truncation_radius) th = theta_r(std::sqrt(r2), *truncation_radius);
    // grad U = scale (lambda + 1) (1 + |q|^2)^{(lambda - 1)/2} q
    const double k = c.lambda == 1.0
                         ? 2.0 * c.scale
                         : c.scale * (c.lambda + 1.0) * std::pow(1.0 + r2, 0.5 * (c.lambda - 1.0));
    out[i] = (-th * k) * q;
  }
  if (!potential.has_pair()) return;

  auto pair_theta = [&](double dist) {
    return truncation_radius ? theta_r(1.0 / dist, *truncation_radius) : 1.0;
  };
  if (n == 1) {
    const Vec& q = state.positions[0];
    const double dist = q.norm();
    const double th = pair_theta(dist);
    if (th != 0.0) out[0] -= (th * pair_force_factor(potential, dist)) * q;
    return;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec r = state.positions[i] - state.positions[j];
      const double dist = r.norm();
      const double th = pair_theta(dist);
      if (th == 0.0) continue;
      const Vec f = (th * pair_force_factor(potential, dist)) * r;
      out[i] -= f;
      out[j] += f;
    }
  }
}

Drift drift_classical(const PhaseState& state, const PotentialSpec& potential,
                      const DiffusionSpec& diffusion, double mass, double guard) {
  check_guard(state, potential, guard);
  Drift d = empty_drift(state);
  std::vector<Vec> force;
  compute_forces(state, potential, std::nullopt, force);
  for (int i = 0; i < state.particle_count(); ++i) {
    const double g = classical_field(diffusion, state.positions[i]).g;
    d.dq[i] = state.momenta[i];
    d.dp[i] = (force[i] - g * state.momenta[i]) / mass;
  }
  return d;
}

Drift drift_relativistic(const PhaseState& state, const PotentialSpec& potential, double epsilon,
                         double guard) {
  check_guard(state, potential, guard);
  Drift d = empty_drift(state);
  std::vector<Vec> force;
  compute_forces(state, potential, std::nullopt, force);
  const DiffusionSpec spec{RelativisticFriction{epsilon}};
  for (int i = 0; i < state.particle_count(); ++i) {
    const Vec& p = state.momenta[i];
    const double rs = std::sqrt(1.0 + epsilon * p.squaredNorm());
    d.dq[i] = p / rs;
    d.dp[i] = -relativistic_d(epsilon, p).apply(p, p) / rs + div_d(spec, p) + force[i];
  }
  return d;
}

Drift drift_classical_limit(const PhaseState& state, const PotentialSpec& potential,
                            double guard) {
  check_guard(state, potential, guard);
  Drift d = empty_drift(state);
  std::vector<Vec> force;
  compute_forces(state, potential, std::nullopt, force);
  for (int i = 0; i < state.particle_count(); ++i) {
    d.dq[i] = state.momenta[i];
    d.dp[i] = force[i] - state.momenta[i];
  }
  return d;
}

Drift drift_overdamped(const PhaseState& state, const PotentialSpec& potential,
                       const DiffusionSpec& diffusion, bool noise_induced_drift, double guard) {
  check_guard(state, potential, guard);
  Drift d = empty_drift(state);
  std::vector<Vec> force;
  compute_forces(state, potential, std::nullopt, force);
  for (int i = 0; i < state.particle_count(); ++i) {
    d.dq[i] = inv_d(diffusion, state.positions[i]) * force[i];
    if (noise_induced_drift) d.dq[i] += div_inv_d(diffusion, state.positions[i]);
  }
  return d;
}

Drift model_drift(const PhaseState& state, const ModelConfig& cfg, const ModelSpecs& specs) {
  if (!is_truncated(cfg.kind)) {
    switch (cfg.kind) {
      case ModelKind::classical:
        return drift_classical(state, specs.potential, specs.diffusion, *cfg.mass,
                               cfg.collision_guard);
      case ModelKind::relativistic:
        return drift_relativistic(state, specs.potential, *cfg.epsilon, cfg.collision_guard);
      case ModelKind::classical_limit:
        return drift_classical_limit(state, specs.potential, cfg.collision_guard);
      case ModelKind::overdamped:
        return drift_overdamped(state, specs.potential, specs.diffusion, cfg.noise_induced_drift,
                                cfg.collision_guard);
      default:
        break;
    }
  }
  // Truncated kinds: the EM update with zero noise and unit step is the drift.
  Stepper stepper(cfg, specs);
  const int n = state.particle_count(), dim = state.dimension();
  std::vector<Vec> zero(n, Vec::Zero(dim));
  PhaseState next;
  stepper.em_update(state, 1.0, zero, next);
  Drift d = empty_drift(state);
  for (int i = 0; i < n; ++i) {
    d.dq[i] = next.positions[i] - state.positions[i];
    d.dp[i] = next.momenta[i] - state.momenta[i];
  }
  return d;
}

Stepper::Stepper(const ModelConfig& cfg, const ModelSpecs& specs)
    : cfg_(cfg), specs_(specs), base_(base_kind(cfg.kind)) {
  const auto problems = model_problems(cfg, specs);
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid model:";
    for (const auto& p : problems) os << "\n  " << p;
    throw ConfigError(os.str());
  }
  if (is_truncated(cfg.kind)) radius_ = cfg.truncation_radius;
  if (base_ == ModelKind::relativistic) specs_.diffusion = relativistic_spec(cfg);
  force_.assign(cfg.particle_count, Vec::Zero(cfg.dimension));
  dW_.assign(cfg.particle_count, Vec::Zero(cfg.dimension));
  proposals_.assign(kMaxHalvings + 1, PhaseState::zeros(cfg.particle_count, cfg.dimension));
}

void Stepper::em_update(const PhaseState& state, double h, const std::vector<Vec>& dW,
                        PhaseState& out) {
  const int n = state.particle_count();
  out.positions.resize(n);
  out.momenta.resize(n);
  compute_forces(state, specs_.potential, radius_, force_);
  const double sqrt2 = std::sqrt(2.0);

  switch (base_) {
    case ModelKind::classical: {
      const double m = *cfg_.mass;
      for (int i = 0; i < n; ++i) {
        const Vec& x = state.positions[i];
        const Vec& v = state.momenta[i];
        const double g = classical_field(specs_.diffusion, x).g;
        out.positions[i] = x + h * v;
        out.momenta[i] = v + (h / m) * (force_[i] - g * v) + (std::sqrt(2.0 * g) / m) * dW[i];
      }
      break;
    }
    case ModelKind::classical_limit: {
      for (int i = 0; i < n; ++i) {
        const Vec& q = state.positions[i];
        const Vec& p = state.momenta[i];
        out.positions[i] = q + h * p;
        out.momenta[i] = p + h * (force_[i] - p) + sqrt2 * dW[i];
      }
      break;
    }
    case ModelKind::relativistic: {
      const double eps = *cfg_.epsilon;
      const double dim = static_cast<double>(state.dimension());
      for (int i = 0; i < n; ++i) {
        const Vec& q = state.positions[i];
        const Vec& p = state.momenta[i];
        const double rs = std::sqrt(1.0 + eps * p.squaredNorm());
        const IsoRank1 d = relativistic_d(eps, p);
        const IsoRank1 root =
            radius_ ? relativistic_truncated(eps, p, *radius_).second : relativistic_sqrt_d(eps, p);
        out.positions[i] = q + (h / rs) * p;
        // -D(p) p / sqrt(s) is the friction, div D = eps d p / sqrt(s).
        out.momenta[i] = p + h * (force_[i] - d.apply(p, p) / rs + (eps * dim / rs) * p) +
                         sqrt2 * root.apply(p, dW[i]);
      }
      break;
    }
    case ModelKind::overdamped: {
      for (int i = 0; i < n; ++i) {
        const Vec& q = state.positions[i];
        const auto f = classical_field(specs_.diffusion, q);
        Vec drift = force_[i] / f.g;
        // div D^{-1} = -grad g / g^2 for D = g I
        if (cfg_.noise_induced_drift) drift -= f.grad / (f.g * f.g);
        out.positions[i] = q + h * drift + std::sqrt(2.0 / f.g) * dW[i];
        out.momenta[i] = state.momenta[i];
      }
      break;
    }
    default:
      throw KindError("unsupported model kind");
  }
  out.time = state.time + h;
}

bool Stepper::acceptable(const PhaseState& from, const PhaseState& to) const {
  if (!finite_state(to)) return false;
  // Truncated forces are globally Lipschitz and bounded, so only finiteness
  // is enforced there.
  if (radius_) return true;
  if (!specs_.potential.has_pair()) return true;
  const double guard = cfg_.collision_guard;
  const int n = to.particle_count();
  // A proposal may not halve a gap in one step, and with momenta it may not
  // double one either. Explicit Euler evaluates the repulsion at the near end
  // of an encounter, so coarse steps leave with an outsized kick that momentum
  // then carries; halving resolves the encounter instead. Overdamped gaps
  // diffuse on their own scale near contact and only keep the lower bound.
  const double growth = base_kind(cfg_.kind) == ModelKind::overdamped
                            ? std::numeric_limits<double>::infinity()
                            : 2.0;
  auto gap_ok = [&](double before, double after) {
    return after >= guard && after >= 0.5 * before && after <= growth * before;
  };
  if (n == 1) {
    const Vec& q = to.positions[0];
    if (!gap_ok(from.positions[0].norm(), q.norm())) return false;
    if (q.size() == 1 && (q[0] > 0.0) != (from.positions[0][0] > 0.0)) return false;
    return true;
  }
  if (to.dimension() == 1) {
    for (int i = 0; i + 1 < n; ++i)
      if (!gap_ok(from.positions[i + 1][0] - from.positions[i][0],
                  to.positions[i + 1][0] - to.positions[i][0]))
        return false;
    return true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!gap_ok((from.positions[i] - from.positions[j]).norm(),
                  (to.positions[i] - to.positions[j]).norm()))
        return false;
  return true;
}

bool Stepper::advance_rec(PhaseState& state, BrownianPath& noise, int level, std::uint64_t index,
                          int depth, int& substeps) {
  const double h = std::ldexp(noise.base_dt(), -level);
  for (int i = 0; i < noise.particle_count(); ++i) dW_[i] = noise.particle(i).increment(level, index);
  PhaseState& proposal = proposals_[depth];
  em_update(state, h, dW_, proposal);
  if (acceptable(state, proposal)) {
    state.positions = proposal.positions;
    state.momenta = proposal.momenta;
    state.time = proposal.time;
    ++substeps;
    return true;
  }
  if (depth == kMaxHalvings) return false;
  return advance_rec(state, noise, level + 1, 2 * index, depth + 1, substeps) &&
         advance_rec(state, noise, level + 1, 2 * index + 1, depth + 1, substeps);
}

StepStatus Stepper::advance(PhaseState& state, BrownianPath& noise, int level, std::uint64_t index,
                            int* substeps) {
  int count = 0;
  const double h = std::ldexp(noise.base_dt(), -level);
  for (int i = 0; i < noise.particle_count(); ++i) dW_[i] = noise.particle(i).increment(level, index);
  PhaseState& proposal = proposals_[0];
  em_update(state, h, dW_, proposal);
  if (acceptable(state, proposal)) {
    state.positions = proposal.positions;
    state.momenta = proposal.momenta;
    state.time = proposal.time;
    if (substeps) *substeps = 1;
    return StepStatus::accepted;
  }
  PhaseState backup = state;
  const bool ok = advance_rec(state, noise, level + 1, 2 * index, 1, count) &&
                  advance_rec(state, noise, level + 1, 2 * index + 1, 1, count);
  if (!ok) {
    state = std::move(backup);
    if (substeps) *substeps = 0;
    return StepStatus::collision_rejected;
  }
  if (substeps) *substeps = count;
  return StepStatus::substepped;
}

int dyadic_level(double base_dt, double dt) {
  const double ratio = base_dt / dt;
  const int level = static_cast<int>(std::lround(std::log2(ratio)));
  if (level < 0 || level > 40 || std::abs(std::ldexp(dt, level) - base_dt) > 1e-9 * base_dt) {
    std::ostringstream os;
    os << "dt " << dt << " is not base step " << base_dt << " divided by a power of two";
    throw ConfigError(os.str());
  }
  return level;
}

namespace {

StepResult step_impl(const PhaseState& state, const ModelConfig& cfg, const ModelSpecs& specs,
                     BrownianPath& noise, std::uint64_t step_index) {
  Stepper stepper(cfg, specs);
  StepResult r;
  r.next_state = state;
  int sub = 0;
  const auto status =
      stepper.advance(r.next_state, noise, dyadic_level(noise.base_dt(), cfg.dt), step_index, &sub);
  r.status = status;
  r.substeps = sub;
  return r;
}

}  // namespace

StepResult step_em(const PhaseState& state, const ModelConfig& cfg, const ModelSpecs& specs,
                   BrownianPath& noise, std::uint64_t step_index) {
  if (is_truncated(cfg.kind)) throw KindError("step_em called with a truncated kind");
  return step_impl(state, cfg, specs, noise, step_index);
}

StepResult step_truncated(const PhaseState& state, const ModelConfig& cfg,
                          const ModelSpecs& specs, BrownianPath& noise, std::uint64_t step_index) {
  if (!is_truncated(cfg.kind)) throw KindError("step_truncated needs a truncated kind");
  return step_impl(state, cfg, specs, noise, step_index);
}

std::int64_t step_count(double horizon, double dt) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be >= 0");
  const double ratio = horizon / dt;
  const auto n = static_cast<std::int64_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(n)) > 1e-6 * std::max(1.0, ratio))
    throw ConfigError("horizon must be an integer multiple of dt");
  return n;
}

namespace {

void check_initial(const PhaseState& initial, const ModelConfig& cfg) {
  if (auto v = validate_state(initial, cfg)) throw ConfigError("invalid initial state: " + v->message);
}

}  // namespace

TrajectorySummary simulate(const PhaseState& initial, const ModelConfig& cfg,
                           const ModelSpecs& specs, double horizon,
                           const std::vector<Observer*>& observers, std::uint64_t trajectory) {
  Stepper stepper(cfg, specs);
  check_initial(initial, cfg);
  const std::int64_t n = step_count(horizon, cfg.dt);
  TrajectorySummary summary;
  summary.horizon = horizon;
  PhaseState state = initial;
  for (auto* o : observers) o->on_start(state);
  BrownianPath path(cfg.seed, trajectory, cfg.particle_count, cfg.dimension, cfg.dt);
  const double t0 = initial.time;
  for (std::int64_t k = 0; k < n; ++k) {
    int sub = 0;
    const auto status = stepper.advance(state, path, 0, static_cast<std::uint64_t>(k), &sub);
    if (status == StepStatus::collision_rejected) {
      ++summary.collision_rejections;
      std::ostringstream os;
      os << to_string(cfg.kind) << " run aborted at step " << k << " (t = " << state.time
         << "): step rejected after " << Stepper::kMaxHalvings << " halvings";
      throw SimulationAborted(os.str(), state, k);
    }
    if (status == StepStatus::substepped) ++summary.substepped_steps;
    state.time = t0 + static_cast<double>(k + 1) * cfg.dt;
    for (auto* o : observers) o->on_step(state, k + 1);
  }
  summary.steps = n;
  summary.final_state = std::move(state);
  return summary;
}

CoupledResult coupled_simulate(const PhaseState& initial, const std::vector<ModelConfig>& configs,
                               const std::vector<ModelSpecs>& specs, double horizon,
                               const std::vector<std::pair<int, int>>& pairs,
                               std::uint64_t trajectory) {
  if (configs.empty()) throw ConfigError("coupled_simulate needs at least one config");
  if (specs.size() != configs.size() && specs.size() != 1)
    throw ConfigError("coupled_simulate needs one spec per config or a shared spec");
  const auto& first = configs.front();
  double base_dt = 0.0;
  for (const auto& c : configs) {
    if (c.particle_count != first.particle_count || c.dimension != first.dimension ||
        c.seed != first.seed)
      throw ConfigError("coupled configs must share particle count, dimension and seed");
    base_dt = std::max(base_dt, c.dt);
  }
  const int m = static_cast<int>(configs.size());
  for (const auto& [a, b] : pairs)
    if (a < 0 || b < 0 || a >= m || b >= m) throw ConfigError("coupled pair index out of range");

  std::vector<Stepper> steppers;
  std::vector<int> levels;
  std::vector<PhaseState> states;
  for (int c = 0; c < m; ++c) {
    steppers.emplace_back(configs[c], specs.size() == 1 ? specs[0] : specs[c]);
    check_initial(initial, configs[c]);
    levels.push_back(dyadic_level(base_dt, configs[c].dt));
    states.push_back(initial);
  }
  const std::int64_t n = step_count(horizon, base_dt);
  // One path per config: the refinement makes them the same Brownian motion,
  // and separate caches keep each walk sequential.
  std::vector<BrownianPath> paths;
  for (int c = 0; c < m; ++c)
    paths.emplace_back(first.seed, trajectory, first.particle_count, first.dimension, base_dt);

  CoupledResult result;
  result.base_dt = base_dt;
  result.runs.resize(m);
  for (const auto& [a, b] : pairs) {
    PairDistance pd;
    pd.first = a;
    pd.second = b;
    pd.momenta_compared = base_kind(configs[a].kind) != ModelKind::overdamped &&
                          base_kind(configs[b].kind) != ModelKind::overdamped;
    result.distances.push_back(pd);
  }

  const double t0 = initial.time;
  for (std::int64_t k = 0; k < n; ++k) {
    for (int c = 0; c < m; ++c) {
      const std::uint64_t sub_count = std::uint64_t{1} << levels[c];
      for (std::uint64_t j = 0; j < sub_count; ++j) {
        const std::uint64_t index = static_cast<std::uint64_t>(k) * sub_count + j;
        int sub = 0;
        const auto status = steppers[c].advance(states[c], paths[c], levels[c], index, &sub);
        if (status == StepStatus::collision_rejected) {
          std::ostringstream os;
          os << "coupled run " << c << " (" << to_string(configs[c].kind)
             << ") aborted at base step " << k << ": step rejected after "
             << Stepper::kMaxHalvings << " halvings";
          throw SimulationAborted(os.str(), states[c], k);
        }
        if (status == StepStatus::substepped) ++result.runs[c].substepped_steps;
      }
      states[c].time = t0 + static_cast<double>(k + 1) * base_dt;
      result.runs[c].steps += static_cast<std::int64_t>(sub_count);
    }
    for (auto& pd : result.distances) {
      const auto& sa = states[pd.first];
      const auto& sb = states[pd.second];
      double dq2 = 0.0, dp2 = 0.0;
      for (int i = 0; i < first.particle_count; ++i) {
        dq2 += (sa.positions[i] - sb.positions[i]).squaredNorm();
        if (pd.momenta_compared) dp2 += (sa.momenta[i] - sb.momenta[i]).squaredNorm();
      }
      pd.sup_q = std::max(pd.sup_q, std::sqrt(dq2));
      pd.sup_p = std::max(pd.sup_p, std::sqrt(dp2));
      pd.sup_sq = std::max(pd.sup_sq, dq2 + dp2);
    }
  }
  for (int c = 0; c < m; ++c) {
    result.runs[c].horizon = horizon;
    result.runs[c].final_state = std::move(states[c]);
  }
  return result;
}

}  // namespace langevin
