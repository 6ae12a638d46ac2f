#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "langevin/diffusion.hpp"
#include "langevin/errors.hpp"
#include "oracles.hpp"

using namespace langevin;
using doctest::Approx;

namespace {

DiffusionSpec rel(double eps) { return DiffusionSpec{RelativisticFriction{eps}}; }

DiffusionSpec sine(double g0, double amp, const Vec& k) {
  return DiffusionSpec{SinePerturbedField{g0, amp, k}};
}

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::VectorXd sym_eigenvalues(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(m)).eigenvalues();
}

}  // namespace

TEST_CASE("relativistic friction examples") {
  CHECK(max_abs(d_matrix(rel(1.0), Vec::Zero(3)) - Mat::Identity(3, 3)) == 0.0);

  const Mat d = d_matrix(rel(1.0), vec({1.0, 0.0}));
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = std::sqrt(2.0);
  expect(1, 1) = 1.0 / std::sqrt(2.0);
  CHECK(max_abs(d - expect) < 1e-15);

  // eps = 3, |p| = 1: s = 4, eigenvalues 2 and 1/2, square roots sqrt(2) and 1/sqrt(2)
  const Vec p = vec({0.6, 0.8});
  const auto ev = sym_eigenvalues(sqrt_d(rel(3.0), p));
  CHECK(ev[0] == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(ev[1] == Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("classical field examples") {
  const Vec k = vec({1.0, 0.0});
  const Mat d = d_matrix(sine(2.0, 1.0, k), vec({M_PI / 2.0, 5.0}));
  CHECK(max_abs(d - 3.0 * Mat::Identity(2, 2)) < 1e-15);
  CHECK(max_abs(sqrt_d(DiffusionSpec{ConstantField{4.0}}, Vec::Zero(2)) - 2.0 * Mat::Identity(2, 2)) == 0.0);
  CHECK(max_abs(inv_d(DiffusionSpec{ConstantField{2.0}}, Vec::Zero(3)) - 0.5 * Mat::Identity(3, 3)) == 0.0);
  CHECK(div_inv_d(DiffusionSpec{ConstantField{2.0}}, vec({1.0, 2.0})).norm() == 0.0);
  // div D^{-1} = -grad g / g^2 = -amplitude k / gamma0^2 at <k, x> = 0
  CHECK(div_inv_d(sine(2.0, 1.0, vec({1.0})), vec({0.0}))[0] == Approx(-0.25).epsilon(1e-15));
  CHECK_THROWS_AS(inv_d(rel(1.0), vec({1.0})), KindError);
  CHECK_THROWS_AS(div_inv_d(rel(1.0), vec({1.0})), KindError);
  CHECK_THROWS_AS(ellipticity_bounds(rel(1.0)), KindError);
}

TEST_CASE("div D of the relativistic friction matches finite differences") {
  // d = 1: D(p) = sqrt(1 + eps p^2), D' = eps p / sqrt(1 + eps p^2)
  CHECK(div_d(rel(1.0), vec({2.0}))[0] == Approx(2.0 / std::sqrt(5.0)).epsilon(1e-15));
  // the variant with (1 + eps p^2)^{3/2} in the denominator does not agree
  CHECK(std::abs(div_d(rel(1.0), vec({2.0}))[0] - 2.0 / std::pow(5.0, 1.5)) > 0.1);

  auto g = oracle::rng(21);
  for (int t = 0; t < 3000; ++t) {
    const int d = 1 + t % 3;
    const double eps = oracle::log_uniform(g, 1e-3, 1e2);
    const Vec p = oracle::random_vector(g, d, 1e-2, 1e2);
    const auto spec = rel(eps);
    const Vec fd = oracle::fd_divergence([&](const Vec& z) { return d_matrix(spec, z); }, p,
                                         1e-5 * (1.0 + p.norm()));
    const Vec an = div_d(spec, p);
    CHECK((fd - an).norm() <= 1e-5 * (1.0 + an.norm()));
  }
}

TEST_CASE("classical divergences match finite differences") {
  auto g = oracle::rng(22);
  for (int t = 0; t < 2000; ++t) {
    const int d = 1 + t % 3;
    const Vec k = oracle::random_vector(g, d, 0.1, 3.0);
    const auto spec = sine(2.0 + t % 3, 1.5, k);
    const Vec x = oracle::random_vector(g, d, 1e-2, 10.0);
    const double h = 1e-6;
    const Vec fd = oracle::fd_divergence([&](const Vec& z) { return d_matrix(spec, z); }, x, h);
    CHECK((fd - div_d(spec, x)).norm() < 1e-6);
    const Vec fdi = oracle::fd_divergence([&](const Vec& z) { return inv_d(spec, z); }, x, h);
    CHECK((fdi - div_inv_d(spec, x)).norm() < 1e-6);
    CHECK(max_abs(inv_d(spec, x) * d_matrix(spec, x) - Mat::Identity(d, d)) < 1e-14);
  }
}

TEST_CASE("square roots square to D, commute with D and have the stated eigenvalues") {
  auto g = oracle::rng(23);
  for (int t = 0; t < 10000; ++t) {
    const int d = 1 + t % 3;
    const double eps = oracle::log_uniform(g, 1e-4, 1e2);
    const Vec p = oracle::random_vector(g, d, 1e-3, 1e3);
    const auto spec = rel(eps);
    const Mat dm = d_matrix(spec, p), sq = sqrt_d(spec, p);
    const double scale = max_abs(dm);
    CHECK(max_abs(sq * sq - dm) <= 1e-13 * scale);
    CHECK(max_abs(sq * dm - dm * sq) <= 1e-13 * scale * std::sqrt(scale));
    // eigenvalues: s^{1/2} along p, s^{-1/2} across p, with s = 1 + eps |p|^2
    const double s = 1.0 + eps * p.squaredNorm();
    CHECK((dm * p - std::sqrt(s) * p).norm() <= 1e-13 * std::sqrt(s) * p.norm());
    if (d > 1) {
      Vec w = oracle::random_direction(g, d);
      w -= (w.dot(p) / p.squaredNorm()) * p;
      // the rounding left in w along p is amplified by |D| ~ sqrt(s)
      CHECK((dm * w - w / std::sqrt(s)).norm() <= 1e-13 * scale);
    }
    const IsoRank1 r = relativistic_d(eps, p);
    const Vec x = oracle::random_direction(g, d);
    CHECK((r.apply(p, x) - r.dense(p) * x).norm() <= 1e-13 * scale);
  }
}

TEST_CASE("ellipticity bounds") {
  const auto c = ellipticity_bounds(DiffusionSpec{ConstantField{1.5}});
  CHECK(c.first == 1.5);
  CHECK(c.second == 1.5);
  const auto s = ellipticity_bounds(sine(3.0, 0.25, vec({1.0})));
  CHECK(s.first == 2.75);
  CHECK(s.second == 3.25);
  auto g = oracle::rng(24);
  const auto spec = sine(3.0, 0.25, vec({2.0, -1.0}));
  for (int t = 0; t < 1000; ++t) {
    const double v = classical_field(spec, oracle::random_vector(g, 2, 1e-3, 1e3)).g;
    CHECK(v >= 2.75);
    CHECK(v <= 3.25);
  }
}

TEST_CASE("cutoff function") {
  CHECK(theta_r(0.0, 2.0) == 1.0);
  CHECK(theta_r(2.0, 2.0) == 1.0);
  CHECK(theta_r(2.5, 2.0) == 0.5);
  CHECK(theta_r(3.0, 2.0) == 0.0);
  CHECK(theta_r(30.0, 2.0) == 0.0);
  CHECK(theta_r(-2.5, 2.0) == 0.5);
  double prev = 1.0;
  for (double t = 2.0; t <= 3.0; t += 1e-3) {
    const double v = theta_r(t, 2.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("truncated friction") {
  const auto spec = rel(0.3);
  for (double r : {3.0, 3.5, 10.0}) {
    const auto t = truncated_d(spec, vec({r, 0.0}), 2.0);
    CHECK(max_abs(t.m - Mat::Identity(2, 2)) == 0.0);
    CHECK(max_abs(t.sqrt_m - Mat::Identity(2, 2)) == 0.0);
  }
  const auto z = truncated_d(spec, Vec::Zero(2), 2.0);
  CHECK(max_abs(z.m - Mat::Identity(2, 2)) == 0.0);
  // inside the cutoff the truncated matrix is D itself
  const Vec p = vec({1.0, 0.5});
  CHECK(max_abs(truncated_d(spec, p, 2.0).m - d_matrix(spec, p)) == 0.0);
  CHECK_THROWS_AS(truncated_d(DiffusionSpec{ConstantField{1.0}}, p, 2.0), KindError);

  auto g = oracle::rng(25);
  for (int t = 0; t < 5000; ++t) {
    const int d = 1 + t % 3;
    const double eps = oracle::log_uniform(g, 1e-3, 1.0);
    const double radius = 1.0 + 3.0 * std::uniform_real_distribution<double>()(g);
    const Vec q = oracle::random_vector(g, d, 1e-2, radius + 1.5);
    const auto tr = truncated_d(rel(eps), q, radius);
    CHECK(max_abs(tr.sqrt_m * tr.sqrt_m - tr.m) <= 1e-13 * max_abs(tr.m));
    const auto ev = sym_eigenvalues(tr.m);
    CHECK(ev[0] > 0.0);
    CHECK(ev[d - 1] <= 1.0 + 2.0 * eps * radius * radius);
  }

  // (sqrt(M) - I)^2 <= min(eps^2 R^2 |p|^2 / 4, eps^2 R^4) at eps = 0.01, R = 2, |p| = 1.5
  const double eps = 0.01, radius = 2.0;
  const Vec pp = vec({0.9, 1.2});
  const auto tr = truncated_d(rel(eps), pp, radius);
  const Mat dev = tr.sqrt_m - Mat::Identity(2, 2);
  const auto ev = sym_eigenvalues(dev * dev);
  const double bound = std::min(0.25 * eps * eps * radius * radius * pp.squaredNorm(),
                                eps * eps * std::pow(radius, 4));
  CHECK(ev[1] <= bound);
  CHECK(ev[1] > 0.0);
}

TEST_CASE("IsoRank1 apply agrees with the dense form") {
  auto g = oracle::rng(26);
  for (int t = 0; t < 2000; ++t) {
    const int d = 1 + t % 3;
    const IsoRank1 m{std::uniform_real_distribution<double>(-2.0, 2.0)(g),
                     std::uniform_real_distribution<double>(-2.0, 2.0)(g)};
    const Vec p = oracle::random_vector(g, d, 1e-2, 10.0);
    const Vec x = oracle::random_vector(g, d, 1e-2, 10.0);
    CHECK((m.apply(p, x) - m.dense(p) * x).norm() <= 1e-12 * (1.0 + (m.dense(p) * x).norm()));
  }
}

TEST_CASE("diffusion validation") {
  CHECK(DiffusionSpec{ConstantField{1.0}}.problems(2).empty());
  CHECK_FALSE(DiffusionSpec{ConstantField{0.0}}.problems(2).empty());
  CHECK_FALSE(sine(1.0, 1.0, vec({1.0})).problems(1).empty());
  CHECK_FALSE(sine(2.0, 1.0, vec({1.0})).problems(2).empty());
  CHECK_FALSE(rel(-1.0).problems(1).empty());
}
