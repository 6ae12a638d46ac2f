#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "langevin/errors.hpp"
#include "langevin/lyapunov.hpp"
#include "oracles.hpp"

using namespace langevin;
using doctest::Approx;

namespace {

ModelConfig classical(int n, int d, double mass) {
  ModelConfig c;
  c.kind = ModelKind::classical;
  c.mass = mass;
  c.particle_count = n;
  c.dimension = d;
  return c;
}

ModelConfig relativistic(int n, int d, double eps) {
  ModelConfig c;
  c.kind = ModelKind::relativistic;
  c.epsilon = eps;
  c.particle_count = n;
  c.dimension = d;
  return c;
}

ModelConfig classical_limit(int n, int d) {
  ModelConfig c;
  c.kind = ModelKind::classical_limit;
  c.particle_count = n;
  c.dimension = d;
  return c;
}

ModelSpecs specs(PairPotential pair, DiffusionSpec diff = {}) {
  return ModelSpecs{PotentialSpec::make({1.0, 1.0}, pair), diff};
}

PhaseState line_state(std::vector<double> q, std::vector<double> p) {
  PhaseState s = PhaseState::zeros(static_cast<int>(q.size()), 1);
  for (size_t i = 0; i < q.size(); ++i) {
    s.positions[i][0] = q[i];
    s.momenta[i][0] = p[i];
  }
  return s;
}

using JetFn = std::function<Jet(const PhaseState&)>;

// Compares the jet of f with central differences of its value and momentum gradient.
void check_jet(const JetFn& f, const PhaseState& s, double tol) {
  const Jet j = f(s);
  const int n = s.particle_count(), d = s.dimension();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      const double hq = 1e-6 * (1.0 + std::abs(s.positions[i][c]));
      const double hp = 1e-6 * (1.0 + std::abs(s.momenta[i][c]));
      PhaseState a = s, b = s;
      a.positions[i][c] += hq;
      b.positions[i][c] -= hq;
      const double gq = (f(a).value - f(b).value) / (2.0 * hq);
      CHECK(std::abs(gq - j.grad_q[i][c]) <= tol * (1.0 + std::abs(j.value)));
      a = s;
      b = s;
      a.momenta[i][c] += hp;
      b.momenta[i][c] -= hp;
      const Jet ja = f(a), jb = f(b);
      const double gp = (ja.value - jb.value) / (2.0 * hp);
      CHECK(std::abs(gp - j.grad_p[i][c]) <= tol * (1.0 + std::abs(j.value)));
      const Vec hcol = (ja.grad_p[i] - jb.grad_p[i]) / (2.0 * hp);
      CHECK((hcol - j.hess_p[i].col(c)).norm() <= tol * (1.0 + j.hess_p[i].norm()));
    }
}

// Position gradient of U + G coded from the closed forms, independent of the library.
std::vector<Vec> oracle_forces(const PhaseState& s, double k_log) {
  const int n = s.particle_count();
  std::vector<Vec> f(n);
  for (int i = 0; i < n; ++i) f[i] = -2.0 * s.positions[i];
  // a lone particle is repelled by a fixed source at the origin
  if (n == 1) f[0] += (k_log / s.positions[0].squaredNorm()) * s.positions[0];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        const Vec r = s.positions[i] - s.positions[j];
        f[i] += (k_log / r.squaredNorm()) * r;
      }
  return f;
}

// One Euler step from s with Gaussian increments, expectation by Gauss-Hermite.
double one_step_expectation(const std::function<double(const PhaseState&)>& f, const PhaseState& s,
                            const std::vector<Vec>& bq, const std::vector<Vec>& bp,
                            const std::vector<Mat>& sigma, double h, const oracle::GaussRule& rule) {
  const int n = s.particle_count(), d = s.dimension();
  return oracle::gaussian_expectation(
      [&](const std::vector<double>& xi) {
        PhaseState t = s;
        for (int i = 0; i < n; ++i) {
          Vec z(d);
          for (int c = 0; c < d; ++c) z[c] = xi[i * d + c];
          t.positions[i] += h * bq[i];
          t.momenta[i] += h * bp[i] + std::sqrt(h) * (sigma[i] * z);
        }
        return f(t);
      },
      n * d, rule);
}

double richardson_generator(const std::function<double(const PhaseState&)>& f, const PhaseState& s,
                            const std::vector<Vec>& bq, const std::vector<Vec>& bp,
                            const std::vector<Mat>& sigma) {
  const auto rule = oracle::gauss_hermite(8);
  const double f0 = f(s);
  const double h = 1e-3;
  const double a1 = (one_step_expectation(f, s, bq, bp, sigma, h, rule) - f0) / h;
  const double a2 = (one_step_expectation(f, s, bq, bp, sigma, h / 2, rule) - f0) / (h / 2);
  return 2.0 * a2 - a1;
}

}  // namespace

TEST_CASE("Hamiltonian examples") {
  const auto nopair = specs(NoPair{});
  CHECK(hamiltonian(line_state({0.0}, {0.0}), nopair.potential, classical(1, 1, 1.0)) == 1.0);
  CHECK(hamiltonian(line_state({1.0}, {1.0}), nopair.potential, classical(1, 1, 2.0)) == 3.0);
  const auto lg = specs(LogRepulsive{1.0});
  CHECK(hamiltonian(line_state({-1.0, 1.0}, {1.0, -1.0}), lg.potential, classical(2, 1, 2.0)) ==
        Approx(6.0 - std::log(2.0)).epsilon(1e-15));
  // relativistic: sqrt(1 + eps |p|^2) + eps U
  CHECK(hamiltonian(line_state({0.0}, {0.0}), nopair.potential, relativistic(1, 1, 0.3)) ==
        Approx(1.3).epsilon(1e-15));
  CHECK(hamiltonian(line_state({1.0}, {2.0}), nopair.potential, relativistic(1, 1, 2.0)) ==
        Approx(3.0 + 4.0).epsilon(1e-15));
  CHECK_THROWS_AS(hamiltonian(line_state({0.0}, {0.0}), nopair.potential,
                              [] { ModelConfig c; c.kind = ModelKind::overdamped; return c; }()),
                  KindError);
}

TEST_CASE("Lyapunov function examples") {
  const auto nopair = specs(NoPair{});
  const PhaseState s = line_state({1.0}, {0.0});
  const double h = hamiltonian(s, nopair.potential, classical(1, 1, 1.0));
  CHECK(V_classical(s, nopair.potential, 1.0, 0.1) == h);
  CHECK(V_classical(line_state({1.0}, {1.0}), nopair.potential, 1.0, 0.1) == Approx(2.6).epsilon(1e-15));
  // the unit-vector coupling: v = (1, 1) gives zero relative velocity
  const auto pw = specs(PowerRepulsive{1.0, 2.0});
  const PhaseState two = line_state({-1.0, 1.0}, {1.0, 1.0});
  const double h2 = hamiltonian(two, pw.potential, classical(2, 1, 1.0));
  CHECK(V_classical(two, pw.potential, 1.0, 0.1) == Approx(h2).epsilon(1e-15));
  // relative velocity (-1 - 1) along unit(-2) = -1: coupling value 2, V = H - eps1 m * 2
  const PhaseState apart = line_state({-1.0, 1.0}, {-1.0, 1.0});
  const double ha = hamiltonian(apart, pw.potential, classical(2, 1, 1.0));
  CHECK(V_classical(apart, pw.potential, 1.0, 0.1) == Approx(ha + 0.1 * 2.0 - 0.1 * 2.0).epsilon(1e-15));

  const auto lg = specs(LogRepulsive{1.0});
  const PhaseState r = line_state({2.0}, {0.0});
  const double hr = hamiltonian(r, lg.potential, relativistic(1, 1, 0.5));
  CHECK(V_relativistic_single(r, lg.potential, 0.5, 0.01, 3.0) == Approx(hr * hr + 3.0).epsilon(1e-15));
  const PhaseState m = line_state({-1.0, 1.0}, {0.0, 0.0});
  const double hm = hamiltonian(m, pw.potential, relativistic(2, 1, 0.5));
  CHECK(V_relativistic_multi(m, pw.potential, 0.5, 10.0, 10.0, 2.0) ==
        Approx(10.0 * hm * hm * hm + 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(V_relativistic_single(m, lg.potential, 0.5, 0.01, 1.0), KindError);
  CHECK_THROWS_AS(V_relativistic_multi(r, lg.potential, 0.5, 1.0, 1.0, 1.0), KindError);
}

TEST_CASE("classical Lyapunov function is sandwiched by H") {
  // |V - H| <= eps1 H (m N / 2 + N) for U = 1 + |q|^2 and G >= 0
  const auto pw = specs(PowerRepulsive{1.0, 2.0});
  auto g = oracle::rng(41);
  for (int t = 0; t < 3000; ++t) {
    const int n = 1 + t % 4, d = 1 + t % 3;
    const double m = oracle::log_uniform(g, 1e-2, 1e2);
    const double eps1 = 0.01;
    const PhaseState s = oracle::random_state(g, n, d, oracle::log_uniform(g, 0.1, 100.0),
                                              oracle::log_uniform(g, 1e-2, 100.0), 1e-2);
    const double h = hamiltonian(s, pw.potential, classical(n, d, m));
    const double v = V_classical(s, pw.potential, m, eps1);
    CHECK(std::abs(v - h) <= eps1 * h * (m * n / 2.0 + n) * (1.0 + 1e-12));
  }
}

TEST_CASE("jets agree with finite differences") {
  auto g = oracle::rng(42);
  const auto pw = specs(PowerRepulsive{1.0, 1.5});
  const auto lg = specs(LogRepulsive{1.0});
  for (int t = 0; t < 60; ++t) {
    const int d = 1 + t % 3;
    const PhaseState s2 = oracle::random_state(g, 2, d, 2.0, 2.0, 0.3);
    const PhaseState s3 = oracle::random_state(g, 3, d, 2.0, 2.0, 0.3);
    const PhaseState s1 = oracle::random_state(g, 1, d, 2.0, 2.0, 0.3);
    check_jet([&](const PhaseState& s) { return hamiltonian_jet(s, lg.potential, classical(2, d, 0.7)); }, s2, 1e-6);
    check_jet([&](const PhaseState& s) { return hamiltonian_jet(s, pw.potential, relativistic(3, d, 0.4)); }, s3, 1e-6);
    check_jet([&](const PhaseState& s) { return V_classical_jet(s, lg.potential, 0.7, 0.05); }, s3, 1e-6);
    check_jet([&](const PhaseState& s) { return V_relativistic_single_jet(s, lg.potential, 0.4, 0.05, 2.0); }, s1, 1e-6);
    check_jet([&](const PhaseState& s) { return V_relativistic_multi_jet(s, pw.potential, 0.4, 10.0, 10.0, 1.0); },
              s3, 1e-6);
    check_jet([&](const PhaseState& s) {
      return pow(V_classical_jet(s, lg.potential, 0.7, 0.05), 3);
    }, s2, 1e-6);
  }
}

TEST_CASE("generator kills constants") {
  auto g = oracle::rng(43);
  const auto lg = specs(LogRepulsive{1.0}, DiffusionSpec{SinePerturbedField{2.0, 1.0, Vec::Unit(2, 0)}});
  for (int t = 0; t < 200; ++t) {
    const PhaseState s = oracle::random_state(g, 3, 2, 3.0, 3.0);
    const Jet c = Jet::constant(5.0, 3, 2);
    CHECK(apply_generator(c, s, classical(3, 2, 0.5), lg) == 0.0);
    CHECK(apply_generator(c, s, relativistic(3, 2, 0.5), lg) == 0.0);
    CHECK(apply_generator(c, s, classical_limit(3, 2), lg) == 0.0);
  }
  ModelConfig od;
  od.kind = ModelKind::overdamped;
  od.particle_count = 3;
  od.dimension = 2;
  CHECK_THROWS_AS(apply_generator(Jet::constant(1.0, 3, 2), oracle::random_state(g, 3, 2, 3.0, 3.0), od, lg),
                  KindError);
}

TEST_CASE("generator of H has the closed forms") {
  // classical: L H = sum (-g |v|^2 + d g / m); relativistic:
  // L H = sum (-eps|p|^2/sqrt(s) + eps^2 d |p|^2 / s + eps d / s)
  const DiffusionSpec sine{SinePerturbedField{2.0, 1.5, Vec::Unit(2, 1)}};
  const auto sp = specs(LogRepulsive{1.0}, sine);
  auto g = oracle::rng(44);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + t % 3;
    const PhaseState s = oracle::random_state(g, n, 2, 3.0, 5.0);
    const double m = oracle::log_uniform(g, 0.01, 10.0);
    const auto cc = classical(n, 2, m);
    double expect = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gv = classical_field(sine, s.positions[i]).g;
      expect += -gv * s.momenta[i].squaredNorm() + 2.0 * gv / m;
    }
    const double got = apply_generator(hamiltonian_jet(s, sp.potential, cc), s, cc, sp);
    CHECK(std::abs(got - expect) <= 1e-10 * (1.0 + std::abs(expect) + 1.0 / m));

    const double eps = oracle::log_uniform(g, 1e-3, 10.0);
    const auto rc = relativistic(n, 2, eps);
    double er = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p2 = s.momenta[i].squaredNorm(), sv = 1.0 + eps * p2;
      er += -eps * p2 / std::sqrt(sv) + eps * eps * 2.0 * p2 / sv + eps * 2.0 / sv;
    }
    const double gr = apply_generator(hamiltonian_jet(s, sp.potential, rc), s, rc, sp);
    CHECK(std::abs(gr - er) <= 1e-10 * (1.0 + std::abs(er)));
  }
  // one particle, d = 1, m = g = 1, v = 2: -4 + 1
  const auto flat = specs(NoPair{});
  const PhaseState s = line_state({0.3}, {2.0});
  CHECK(apply_generator(hamiltonian_jet(s, flat.potential, classical(1, 1, 1.0)), s, classical(1, 1, 1.0), flat) ==
        Approx(-3.0).epsilon(1e-14));
}

TEST_CASE("generator matches the expected one-step increment of the SDE") {
  auto g = oracle::rng(45);
  const double k = 1.0;
  const auto lg = specs(LogRepulsive{k});
  for (int t = 0; t < 12; ++t) {
    const int n = t % 2 == 0 ? 1 : 2, d = t % 2 == 0 ? 2 : 1;
    const PhaseState s = oracle::random_state(g, n, d, 1.5, 1.5, 0.4);
    const auto force = oracle_forces(s, k);

    // classical, D = g I with g = 1, mass m
    const double m = 0.8;
    const auto cc = classical(n, d, m);
    std::vector<Vec> bq(n), bp(n);
    std::vector<Mat> sig(n);
    for (int i = 0; i < n; ++i) {
      bq[i] = s.momenta[i];
      bp[i] = (force[i] - s.momenta[i]) / m;
      sig[i] = (std::sqrt(2.0) / m) * Mat::Identity(d, d);
    }
    auto vc = [&](const PhaseState& x) { return V_classical(x, lg.potential, m, 0.05); };
    const double lc = apply_generator(V_classical_jet(s, lg.potential, m, 0.05), s, cc, lg);
    CHECK(std::abs(richardson_generator(vc, s, bq, bp, sig) - lc) <= 1e-4 * (1.0 + std::abs(lc)));

    // relativistic: drift F - p + eps d p / sqrt(s), noise sqrt(2) sqrt(D)
    const double eps = 0.7;
    const auto rc = relativistic(n, d, eps);
    for (int i = 0; i < n; ++i) {
      const Vec& p = s.momenta[i];
      const double rs = std::sqrt(1.0 + eps * p.squaredNorm());
      bq[i] = p / rs;
      bp[i] = force[i] - p + (eps * d / rs) * p;
      const Eigen::MatrixXd dm =
          (Eigen::MatrixXd::Identity(d, d) + eps * Eigen::MatrixXd(p * p.transpose())) / rs;
      sig[i] = std::sqrt(2.0) * Mat(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dm).operatorSqrt());
    }
    auto hr = [&](const PhaseState& x) { return hamiltonian(x, lg.potential, rc); };
    const double lr = apply_generator(hamiltonian_jet(s, lg.potential, rc), s, rc, lg);
    CHECK(std::abs(richardson_generator(hr, s, bq, bp, sig) - lr) <= 1e-4 * (1.0 + std::abs(lr)));
    if (n == 1) {
      auto vs = [&](const PhaseState& x) { return V_relativistic_single(x, lg.potential, eps, 0.05, 1.0); };
      const double ls = apply_generator(V_relativistic_single_jet(s, lg.potential, eps, 0.05, 1.0), s, rc, lg);
      CHECK(std::abs(richardson_generator(vs, s, bq, bp, sig) - ls) <= 1e-4 * (1.0 + std::abs(ls)));
    }
  }
}

TEST_CASE("generator integrates to zero against the Gibbs-Boltzmann measure") {
  // N = 1, d = 1, m = 1, U = 1 + x^2: x ~ N(0, 1/2), v ~ N(0, 1), for any D = g(x) I.
  const DiffusionSpec sine{SinePerturbedField{2.0, 1.0, Vec::Constant(1, 1.3)}};
  const auto sp = specs(NoPair{}, sine);
  const auto cfg = classical(1, 1, 1.0);
  const auto rule = oracle::gauss_hermite(40);
  auto quad = [&](const std::function<Jet(double, double)>& make) {
    return oracle::gaussian_expectation(
        [&](const std::vector<double>& xi) {
          const double x = xi[0] / std::sqrt(2.0), v = xi[1];
          return apply_generator(make(x, v), line_state({x}, {v}), cfg, sp);
        },
        2, rule);
  };
  auto jet = [](double value, double gq, double gp, double hp) {
    Jet j = Jet::constant(value, 1, 1);
    j.grad_q[0][0] = gq;
    j.grad_p[0][0] = gp;
    j.hess_p[0](0, 0) = hp;
    return j;
  };
  CHECK(std::abs(quad([&](double, double v) { return jet(v * v, 0.0, 2.0 * v, 2.0); })) < 1e-12);
  CHECK(std::abs(quad([&](double x, double v) { return jet(x * v, v, x, 0.0); })) < 1e-12);
  CHECK(std::abs(quad([&](double x, double) { return jet(x * x, 2.0 * x, 0.0, 0.0); })) < 1e-12);
  // a cubic observable whose generator picks up the x-dependent friction
  CHECK(std::abs(quad([&](double x, double v) { return jet(x * v * v, v * v, 2.0 * x * v, 2.0 * x); })) < 1e-12);
}

TEST_CASE("drift certificates") {
  auto cfg = classical(1, 1, 1.0);
  const auto sp = specs(NoPair{});
  const SamplePlan plan;
  const auto cert = certify_drift(LyapunovKind::classical, cfg, sp, 1.0, plan);
  CHECK(cert.valid);
  CHECK(cert.c > 0.0);
  CHECK(cert.sample_count > 100);
  CHECK_FALSE(cert.trivial);
  CHECK(cert.max_residual <= 0.0);
  CHECK_FALSE(cert.attempts.empty());

  // a single state is all core: the certificate is trivial
  const auto one = certify_drift(LyapunovKind::classical, cfg, sp, 1.0, plan, {}, {line_state({0.5}, {0.5})});
  CHECK(one.trivial);
  CHECK(one.sample_count == 1);
  CHECK(one.core_count == 1);

  CHECK(default_alpha(LyapunovKind::classical, 3) == 1.0);
  CHECK(default_alpha(LyapunovKind::relativistic_single, 1) == 0.5);
  CHECK(default_alpha(LyapunovKind::relativistic_multi, 1) == Approx(2.0 / 3.0));

  CHECK_THROWS_AS(certify_drift(LyapunovKind::relativistic_single, cfg, sp, 0.5, plan), KindError);
  CHECK_THROWS_AS(certify_drift(LyapunovKind::classical, cfg, sp, 1.5, plan), ConfigError);
  CHECK_THROWS_AS(certify_drift(LyapunovKind::relativistic_multi, relativistic(1, 1, 0.1), sp, 0.5, plan),
                  KindError);
  const auto lj = specs(LennardJones{1.0, 1.0});
  CHECK_THROWS_AS(certify_drift(LyapunovKind::relativistic_multi, relativistic(2, 1, 0.1), lj, 0.5, plan),
                  ConfigError);

  const auto lg = specs(LogRepulsive{1.0});
  const auto rc = certify_drift(LyapunovKind::relativistic_single, relativistic(1, 1, 0.01), lg, 0.5, plan);
  CHECK(rc.valid);
  CHECK(rc.c > 0.0);
}

TEST_CASE("sample plans cover rest states, near collisions and both signs") {
  SamplePlan plan;
  const auto states = plan_states(plan, classical(2, 1, 1.0), LyapunovKind::classical);
  double min_gap = INFINITY;
  bool rest = false, neg = false;
  for (const auto& s : states) {
    min_gap = std::min(min_gap, min_pair_distance(s));
    if (s.momenta[0].norm() == 0.0 && s.momenta[1].norm() == 0.0) rest = true;
    if (s.momenta[0][0] < 0.0) neg = true;
    CHECK_FALSE(validate_state(s, classical(2, 1, 1.0)));
  }
  CHECK(min_gap == Approx(1e-3));
  CHECK(rest);
  CHECK(neg);
  const auto single = plan_states(plan, relativistic(1, 2, 0.1), LyapunovKind::relativistic_single);
  for (const auto& s : single) CHECK(s.positions[0].norm() > 0.0);
}
