#include "langevin/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

void guard_or_throw(const PhaseState& state, const PotentialSpec& potential, double guard) {
  if (singular_distance(state, potential) < guard)
    throw CollisionError("observable evaluated inside the collision guard", -1, -1);
}

// Jacobian of r -> r/|r|.
Mat unit_jacobian(const Vec& r) {
  const double n = r.norm();
  const Vec u = r / n;
  Mat j = Mat::Identity(r.size(), r.size());
  j.noalias() -= u * u.transpose();
  return j / n;
}

ModelConfig classical_cfg(const PhaseState& s, double mass) {
  ModelConfig c;
  c.kind = ModelKind::classical;
  c.mass = mass;
  c.particle_count = s.particle_count();
  c.dimension = s.dimension();
  return c;
}

ModelConfig relativistic_cfg(const PhaseState& s, double epsilon) {
  ModelConfig c;
  c.kind = ModelKind::relativistic;
  c.epsilon = epsilon;
  c.particle_count = s.particle_count();
  c.dimension = s.dimension();
  return c;
}

// sum <q_i, p_i>
Jet position_momentum_jet(const PhaseState& s) {
  Jet j = Jet::constant(0.0, s.particle_count(), s.dimension());
  for (int i = 0; i < s.particle_count(); ++i) {
    j.value += s.positions[i].dot(s.momenta[i]);
    j.grad_q[i] = s.momenta[i];
    j.grad_p[i] = s.positions[i];
  }
  return j;
}

double logspace(double lo, double hi, int k, int count) {
  if (count <= 1) return lo;
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (count - 1));
}

std::vector<double> radii(double lo, double hi, int count) {
  std::vector<double> r{0.0};
  for (int k = 0; k < count; ++k) r.push_back(logspace(lo, hi, k, count));
  return r;
}

Vec random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = g(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace

Jet Jet::constant(double c, int particle_count, int dimension) {
  Jet j;
  j.value = c;
  j.grad_q.assign(particle_count, Vec::Zero(dimension));
  j.grad_p.assign(particle_count, Vec::Zero(dimension));
  j.hess_p.assign(particle_count, Mat::Zero(dimension, dimension));
  return j;
}

Jet& Jet::operator+=(const Jet& o) {
  value += o.value;
  for (size_t i = 0; i < grad_q.size(); ++i) {
    grad_q[i] += o.grad_q[i];
    grad_p[i] += o.grad_p[i];
    hess_p[i] += o.hess_p[i];
  }
  return *this;
}

Jet& Jet::operator*=(double s) {
  value *= s;
  for (size_t i = 0; i < grad_q.size(); ++i) {
    grad_q[i] *= s;
    grad_p[i] *= s;
    hess_p[i] *= s;
  }
  return *this;
}

Jet operator+(Jet a, const Jet& b) { return a += b; }

Jet operator*(double s, Jet a) { return a *= s; }

Jet operator*(const Jet& a, const Jet& b) {
  Jet r = a;
  r.value = a.value * b.value;
  for (size_t i = 0; i < a.grad_q.size(); ++i) {
    r.grad_q[i] = a.value * b.grad_q[i] + b.value * a.grad_q[i];
    r.grad_p[i] = a.value * b.grad_p[i] + b.value * a.grad_p[i];
    r.hess_p[i] = a.value * b.hess_p[i] + b.value * a.hess_p[i] +
                  a.grad_p[i] * b.grad_p[i].transpose() + b.grad_p[i] * a.grad_p[i].transpose();
  }
  return r;
}

Jet pow(const Jet& f, int n) {
  if (n < 1) throw std::invalid_argument("Jet power must be >= 1");
  if (n == 1) return f;
  Jet r = f;
  const double v = f.value;
  const double d1 = n * std::pow(v, n - 1);
  const double d2 = n * (n - 1) * std::pow(v, n - 2);
  r.value = std::pow(v, n);
  for (size_t i = 0; i < f.grad_q.size(); ++i) {
    r.grad_q[i] = d1 * f.grad_q[i];
    r.grad_p[i] = d1 * f.grad_p[i];
    r.hess_p[i] = d1 * f.hess_p[i] + d2 * (f.grad_p[i] * f.grad_p[i].transpose());
  }
  return r;
}

Jet hamiltonian_jet(const PhaseState& state, const PotentialSpec& potential,
                    const ModelConfig& cfg) {
  guard_or_throw(state, potential, cfg.collision_guard);
  const int n = state.particle_count(), d = state.dimension();
  Jet j = Jet::constant(0.0, n, d);
  const ModelKind b = base_kind(cfg.kind);
  double weight = 1.0;  // multiplies U and G
  switch (b) {
    case ModelKind::classical:
    case ModelKind::classical_limit: {
      const double m = b == ModelKind::classical ? *cfg.mass : 1.0;
      for (int i = 0; i < n; ++i) {
        const Vec& v = state.momenta[i];
        j.value += 0.5 * m * v.squaredNorm();
        j.grad_p[i] = m * v;
        j.hess_p[i] = m * Mat::Identity(d, d);
      }
      break;
    }
    case ModelKind::relativistic: {
      const double e = *cfg.epsilon;
      weight = e;
      for (int i = 0; i < n; ++i) {
        const Vec& p = state.momenta[i];
        const double s = 1.0 + e * p.squaredNorm();
        const double rs = std::sqrt(s);
        j.value += rs;
        j.grad_p[i] = (e / rs) * p;
        j.hess_p[i] = (e / rs) * Mat::Identity(d, d) - (e * e / (s * rs)) * (p * p.transpose());
      }
      break;
    }
    default:
      throw KindError("hamiltonian is not defined for " + std::string(to_string(cfg.kind)));
  }
  for (int i = 0; i < n; ++i) {
    j.value += weight * eval_U(potential, state.positions[i]);
    j.grad_q[i] = weight * grad_U(potential, state.positions[i]);
  }
  if (potential.has_pair()) {
    if (n == 1) {
      j.value += weight * eval_G(potential, state.positions[0]);
      j.grad_q[0] += weight * grad_G(potential, state.positions[0]);
    }
    for (int a = 0; a < n; ++a)
      for (int c = a + 1; c < n; ++c) {
        const Vec r = state.positions[a] - state.positions[c];
        j.value += weight * eval_G(potential, r);
        const Vec g = weight * grad_G(potential, r);
        j.grad_q[a] += g;
        j.grad_q[c] -= g;
      }
  }
  return j;
}

double hamiltonian(const PhaseState& state, const PotentialSpec& potential,
                   const ModelConfig& cfg) {
  return hamiltonian_jet(state, potential, cfg).value;
}

Jet V_classical_jet(const PhaseState& state, const PotentialSpec& potential, double mass,
                    double eps1) {
  const int n = state.particle_count(), d = state.dimension();
  Jet v = hamiltonian_jet(state, potential, classical_cfg(state, mass));
  v += (eps1 * mass) * position_momentum_jet(state);

  // sum_i <v_i, w_i> with w_i = sum_{j != i} unit(x_i - x_j)
  Jet c = Jet::constant(0.0, n, d);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const Vec r = state.positions[a] - state.positions[b];
      const Vec u = r.normalized();
      const Mat jac = unit_jacobian(r);
      const Vec dv = state.momenta[a] - state.momenta[b];
      c.value += u.dot(dv);
      c.grad_p[a] += u;
      c.grad_p[b] -= u;
      const Vec g = jac * dv;
      c.grad_q[a] += g;
      c.grad_q[b] -= g;
    }
  v += (-eps1 * mass) * c;
  return v;
}

double V_classical(const PhaseState& state, const PotentialSpec& potential, double mass,
                   double eps1) {
  return V_classical_jet(state, potential, mass, eps1).value;
}

Jet V_relativistic_single_jet(const PhaseState& state, const PotentialSpec& potential,
                              double epsilon, double eps1, double kappa1) {
  if (state.particle_count() != 1) throw KindError("single-particle Lyapunov function needs N = 1");
  const Vec& q = state.positions[0];
  const Vec& p = state.momenta[0];
  if (!(q.norm() > 0.0)) throw CollisionError("single-particle Lyapunov function at q = 0", 0, -1);
  const Jet h = hamiltonian_jet(state, potential, relativistic_cfg(state, epsilon));
  Jet v = pow(h, 2);
  v += eps1 * position_momentum_jet(state);
  Jet e = Jet::constant(0.0, 1, state.dimension());
  const Vec u = q.normalized();
  e.value = p.dot(u);
  e.grad_p[0] = u;
  e.grad_q[0] = unit_jacobian(q) * p;
  v += -1.0 * e;
  v.value += kappa1;
  return v;
}

double V_relativistic_single(const PhaseState& state, const PotentialSpec& potential,
                             double epsilon, double eps1, double kappa1) {
  return V_relativistic_single_jet(state, potential, epsilon, eps1, kappa1).value;
}

Jet V_relativistic_multi_jet(const PhaseState& state, const PotentialSpec& potential,
                             double epsilon, double A1, double A2, double kappaN) {
  const int n = state.particle_count(), d = state.dimension();
  if (n < 2) throw KindError("multi-particle Lyapunov function needs N >= 2");
  const double beta = potential.constants.beta1;
  const Jet h = hamiltonian_jet(state, potential, relativistic_cfg(state, epsilon));
  Jet v = A1 * pow(h, 3);
  v += epsilon * (h * position_momentum_jet(state));

  // sum_{i != j} <r, dp> |r|^{1 - beta}, r = q_i - q_j, dp = p_i - p_j
  Jet c = Jet::constant(0.0, n, d);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const Vec r = state.positions[a] - state.positions[b];
      const Vec dp = state.momenta[a] - state.momenta[b];
      const double dist = r.norm();
      const double w = std::pow(dist, 1.0 - beta);
      const double rdp = r.dot(dp);
      c.value += 2.0 * rdp * w;
      const Vec gp = (2.0 * w) * r;
      c.grad_p[a] += gp;
      c.grad_p[b] -= gp;
      const Vec gq = 2.0 * (w * dp + ((1.0 - beta) * rdp * w / (dist * dist)) * r);
      c.grad_q[a] += gq;
      c.grad_q[b] -= gq;
    }
  v += (-A2 * epsilon * epsilon) * c;
  v.value += kappaN;
  return v;
}

double V_relativistic_multi(const PhaseState& state, const PotentialSpec& potential,
                            double epsilon, double A1, double A2, double kappaN) {
  return V_relativistic_multi_jet(state, potential, epsilon, A1, A2, kappaN).value;
}

double apply_generator(const Jet& f, const PhaseState& state, const ModelConfig& cfg,
                       const ModelSpecs& specs) {
  guard_or_throw(state, specs.potential, cfg.collision_guard);
  const int n = state.particle_count();
  std::vector<Vec> force;
  compute_forces(state, specs.potential, std::nullopt, force);
  double out = 0.0;
  switch (cfg.kind) {
    case ModelKind::classical: {
      const double m = *cfg.mass;
      for (int i = 0; i < n; ++i) {
        const Vec& v = state.momenta[i];
        const double g = classical_field(specs.diffusion, state.positions[i]).g;
        out += v.dot(f.grad_q[i]);
        out += (force[i] - g * v).dot(f.grad_p[i]) / m;
        out += g * f.hess_p[i].trace() / (m * m);
      }
      return out;
    }
    case ModelKind::classical_limit: {
      for (int i = 0; i < n; ++i) {
        const Vec& p = state.momenta[i];
        out += p.dot(f.grad_q[i]) + (force[i] - p).dot(f.grad_p[i]) + f.hess_p[i].trace();
      }
      return out;
    }
    case ModelKind::relativistic: {
      const double e = *cfg.epsilon;
      const DiffusionSpec spec{RelativisticFriction{e}};
      for (int i = 0; i < n; ++i) {
        const Vec& p = state.momenta[i];
        const double rs = std::sqrt(1.0 + e * p.squaredNorm());
        const Mat dm = d_matrix(spec, p);
        out += p.dot(f.grad_q[i]) / rs;
        out += (force[i] - dm * p / rs + div_d(spec, p)).dot(f.grad_p[i]);
        out += (dm * f.hess_p[i]).trace();
      }
      return out;
    }
    default:
      throw KindError("no generator for " + std::string(to_string(cfg.kind)));
  }
}

double apply_generator(const SmoothObservable& f, const PhaseState& state, const ModelConfig& cfg,
                       const ModelSpecs& specs) {
  return apply_generator(f.jet(state), state, cfg, specs);
}

std::string_view to_string(LyapunovKind kind) {
  switch (kind) {
    case LyapunovKind::classical: return "classical";
    case LyapunovKind::relativistic_single: return "relativistic_single";
    case LyapunovKind::relativistic_multi: return "relativistic_multi";
  }
  return "unknown";
}

double default_alpha(LyapunovKind kind, int power) {
  switch (kind) {
    case LyapunovKind::classical: return 1.0;
    case LyapunovKind::relativistic_single: return (power - 0.5) / power;
    case LyapunovKind::relativistic_multi: return (power - 1.0 / 3.0) / power;
  }
  return 1.0;
}

std::vector<PhaseState> plan_states(const SamplePlan& plan, const ModelConfig& cfg,
                                    LyapunovKind kind) {
  const int n = cfg.particle_count, d = cfg.dimension;
  std::mt19937_64 rng(plan.seed);
  const auto rq = radii(plan.q_min, plan.q_max, plan.q_count);
  const auto rp = radii(plan.p_min, plan.p_max, plan.p_count);
  std::vector<PhaseState> out;

  // Direction sets: signs in d = 1, random unit vectors otherwise.
  auto directions = [&](int count) {
    std::vector<Vec> dirs;
    if (d == 1) {
      dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else {
      for (int k = 0; k < count; ++k) dirs.push_back(random_unit(d, rng));
    }
    return dirs;
  };

  if (n == 1) {
    const auto dq = directions(plan.directions);
    const auto dp = directions(plan.directions);
    for (double a : rq) {
      if (a == 0.0 && kind == LyapunovKind::relativistic_single) continue;
      for (double b : rp)
        for (const auto& u : dq)
          for (const auto& w : dp) {
            PhaseState s = PhaseState::zeros(1, d);
            s.positions[0] = a * u;
            s.momenta[0] = b * w;
            out.push_back(std::move(s));
          }
    }
    return out;
  }

  std::vector<double> seps = plan.near_collision;
  for (int k = 0; k < plan.q_count; ++k) seps.push_back(logspace(plan.q_min, plan.q_max, k, plan.q_count));
  std::vector<double> centers{0.0};
  for (int k = 0; k < plan.q_count; ++k) {
    const double c = logspace(plan.q_min, plan.q_max, k, plan.q_count);
    centers.push_back(c);
    centers.push_back(-c);
  }
  // Momentum patterns: each particle moves along +dir, -dir or not at all.
  std::vector<std::vector<int>> patterns;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 1; code < total; ++code) {
    std::vector<int> pat(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      pat[i] = c % 3 - 1;
      c /= 3;
    }
    patterns.push_back(pat);
  }
  const int draws = d == 1 ? 1 : plan.directions;
  for (int draw = 0; draw < draws; ++draw) {
    const Vec axis = d == 1 ? Vec::Constant(1, 1.0) : random_unit(d, rng);
    const Vec line = d == 1 ? Vec::Constant(1, 1.0) : random_unit(d, rng);
    std::vector<Vec> pdir(n);
    for (int i = 0; i < n; ++i) pdir[i] = d == 1 ? Vec::Constant(1, 1.0) : random_unit(d, rng);
    for (double c : centers)
      for (double s : seps) {
        PhaseState base = PhaseState::zeros(n, d);
        for (int i = 0; i < n; ++i)
          base.positions[i] = c * axis + (i - 0.5 * (n - 1)) * s * line;
        PhaseState rest = base;
        out.push_back(rest);
        for (double b : rp) {
          if (b == 0.0) continue;
          for (const auto& pat : patterns) {
            PhaseState st = base;
            for (int i = 0; i < n; ++i) st.momenta[i] = (b * pat[i]) * pdir[i];
            out.push_back(std::move(st));
          }
        }
      }
  }
  return out;
}

namespace {

struct Evaluated {
  std::vector<double> w;   // V^n
  std::vector<double> lw;  // generator of V^n
};

Jet lyapunov_jet(LyapunovKind kind, const PhaseState& s, const ModelConfig& cfg,
                 const ModelSpecs& specs, double eps1, double kappa, const LyapunovParams& p) {
  switch (kind) {
    case LyapunovKind::classical: {
      Jet j = V_classical_jet(s, specs.potential, *cfg.mass, eps1);
      j.value += kappa;
      return j;
    }
    case LyapunovKind::relativistic_single:
      return V_relativistic_single_jet(s, specs.potential, *cfg.epsilon, eps1, kappa);
    case LyapunovKind::relativistic_multi:
      return V_relativistic_multi_jet(s, specs.potential, *cfg.epsilon, p.A1, p.A2, kappa);
  }
  throw KindError("unknown Lyapunov kind");
}

void fit(DriftCertificate& cert, const Evaluated& ev) {
  const size_t n = ev.w.size();
  cert.sample_count = static_cast<long>(n);
  if (n == 0) {
    cert.valid = false;
    cert.c = 0.0;
    return;
  }
  std::vector<double> sorted = ev.w;
  std::sort(sorted.begin(), sorted.end());
  const size_t qi = std::min(n - 1, static_cast<size_t>(std::floor(cert.plan.core_quantile * (n - 1))));
  cert.V0 = sorted[qi];
  cert.C0 = -std::numeric_limits<double>::infinity();
  cert.core_count = 0;
  for (size_t k = 0; k < n; ++k)
    if (ev.w[k] <= cert.V0) {
      cert.C0 = std::max(cert.C0, ev.lw[k]);
      ++cert.core_count;
    }
  double c = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < n; ++k)
    if (ev.w[k] > cert.V0) c = std::min(c, (cert.C0 - ev.lw[k]) / std::pow(ev.w[k], cert.alpha));
  cert.trivial = !std::isfinite(c);
  if (cert.trivial) c = 1.0;
  cert.c = c;
  double big_c = 0.0;
  for (size_t k = 0; k < n; ++k)
    big_c = std::max(big_c, ev.lw[k] + c * std::pow(ev.w[k], cert.alpha));
  cert.C = big_c;
  cert.max_residual = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < n; ++k)
    cert.max_residual =
        std::max(cert.max_residual, ev.lw[k] + c * std::pow(ev.w[k], cert.alpha) - big_c);
  cert.valid = c > 0.0 && std::isfinite(big_c) && cert.max_residual <= 0.0;
}

}  // namespace

DriftCertificate certify_drift(LyapunovKind kind, const ModelConfig& cfg, const ModelSpecs& specs,
                               double alpha, const SamplePlan& plan, const LyapunovParams& params,
                               const std::vector<PhaseState>& explicit_states) {
  const ModelKind b = cfg.kind;
  if (kind == LyapunovKind::classical && b != ModelKind::classical)
    throw KindError("classical Lyapunov function needs the classical model");
  if (kind != LyapunovKind::classical && b != ModelKind::relativistic)
    throw KindError("relativistic Lyapunov function needs the relativistic model");
  if (kind == LyapunovKind::relativistic_single && cfg.particle_count != 1)
    throw KindError("single-particle Lyapunov function needs N = 1");
  if (kind == LyapunovKind::relativistic_multi) {
    if (cfg.particle_count < 2) throw KindError("multi-particle Lyapunov function needs N >= 2");
    auto c = specs.potential.constants;
    c.relativistic_multi = true;
    if (!c.problems().empty()) throw ConfigError("multi-particle Lyapunov function needs beta1 in (1, 2]");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (params.power < 1) throw ConfigError("Lyapunov power must be >= 1");

  std::vector<PhaseState> states;
  for (auto& s : explicit_states.empty() ? plan_states(plan, cfg, kind) : explicit_states) {
    if (validate_state(s, cfg)) continue;
    if (singular_distance(s, specs.potential) < cfg.collision_guard) continue;
    if (kind == LyapunovKind::relativistic_single && s.positions[0].norm() < cfg.collision_guard)
      continue;
    states.push_back(s);
  }

  double eps1 = params.eps1;
  if (std::isnan(eps1)) {
    eps1 = 1e-2;
    if (kind == LyapunovKind::classical)
      eps1 = std::min(1e-2, *cfg.mass * specs.potential.constants.a2 / 4.0);
  }

  // eps1 is only known to work when small enough; sweep it down by decades
  // until the fit succeeds or the floor is reached.
  constexpr double kEps1Floor = 1e-6;
  std::vector<DriftAttempt> attempts;
  DriftCertificate cert;
  for (;;) {
    cert = DriftCertificate{};
    cert.kind = kind;
    cert.alpha = alpha;
    cert.power = params.power;
    cert.plan = plan;
    cert.A1 = params.A1;
    cert.A2 = params.A2;
    cert.eps1 = kind == LyapunovKind::relativistic_multi ? 0.0 : eps1;

    double kappa = params.kappa;
    if (std::isnan(kappa)) {
      double lo = std::numeric_limits<double>::infinity();
      for (const auto& s : states) lo = std::min(lo, lyapunov_jet(kind, s, cfg, specs, eps1, 0.0, params).value);
      kappa = 1.0 + std::max(0.0, states.empty() ? 0.0 : -lo);
    }
    cert.kappa = kappa;

    Evaluated ev;
    for (const auto& s : states) {
      const Jet w = pow(lyapunov_jet(kind, s, cfg, specs, eps1, kappa, params), params.power);
      ev.w.push_back(w.value);
      ev.lw.push_back(apply_generator(w, s, cfg, specs));
    }
    fit(cert, ev);
    attempts.push_back({cert.eps1, cert.c});
    if (cert.valid || kind == LyapunovKind::relativistic_multi || eps1 / 10.0 < kEps1Floor * (1.0 - 1e-9))
      break;
    eps1 /= 10.0;
  }
  cert.attempts = std::move(attempts);
  return cert;
}

}  // namespace langevin
