#include "langevin/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double norm_checked(const Vec& r) {
  const double d = r.norm();
  if (!(d > 0.0)) throw SingularInputError("pair potential evaluated at zero separation");
  return d;
}

// d/dr of the radial factor f, divided by r, so that hess G = f I + g r r^T.
double pair_hess_factor(const PairPotential& pair, double dist) {
  return std::visit(
      Overloaded{
          [](const NoPair&) { return 0.0; },
          [&](const LogRepulsive& p) { return 2.0 * p.k / std::pow(dist, 4); },
          [&](const PowerRepulsive& p) {
            return p.k * (p.beta1 + 1.0) * std::pow(dist, -p.beta1 - 3.0);
          },
          [&](const LennardJones& p) {
            return 168.0 * p.a * std::pow(dist, -16) - 48.0 * p.b * std::pow(dist, -10);
          },
      },
      pair);
}

double spectral_norm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

std::string pair_name(const PairPotential& pair) {
  return std::visit(Overloaded{
                        [](const NoPair&) { return std::string("none"); },
                        [](const LogRepulsive&) { return std::string("log"); },
                        [](const PowerRepulsive&) { return std::string("power"); },
                        [](const LennardJones&) { return std::string("lennard_jones"); },
                    },
                    pair);
}

// Bounds used below, with t = 1 + |q|^2 and l = lambda:
//   U <= s 2^{(l+1)/2} (1 + |q|^{l+1})
//   |grad U| = s (l+1) t^{(l-1)/2} |q| <= s (l+1) 2^{(l-1)/2} (1 + |q|^l)
//   ||hess U|| <= s (l+1) l t^{(l-1)/2} <= s (l+1) l 2^{(l-1)/2} (1 + |q|^{l-1})
//   <grad U, q> >= s (l+1) |q|^{l+1}
// Pair variants are exact power laws (or sums of two), so a4 is the leading
// coefficient and the remainder of condition (ii) is zero or a single power.
AssumptionConstants derive_constants(const PolyConfining& confining, const PairPotential& pair) {
  AssumptionConstants c;
  const double l = confining.lambda;
  const double s = confining.scale;
  c.lambda = l;
  const double a1_u = s * (l + 1.0) * std::max(l, 1.0) * std::pow(2.0, (l + 1.0) / 2.0);
  c.a2 = s * (l + 1.0);
  c.a3 = s;
  double a1_g = 0.0;
  std::visit(Overloaded{
                 [&](const NoPair&) {
                   c.beta1 = 1.0;
                   c.beta2 = 0.0;
                   c.a4 = 1.0;
                   c.a5 = 0.0;
                   c.a6 = 0.0;
                 },
                 [&](const LogRepulsive& p) {
                   c.beta1 = 1.0;
                   c.beta2 = 0.0;
                   c.a4 = p.k;
                   c.a5 = 0.0;
                   c.a6 = 0.0;
                   a1_g = p.k;
                 },
                 [&](const PowerRepulsive& p) {
                   c.beta1 = p.beta1;
                   c.beta2 = 0.0;
                   c.a4 = p.k;
                   c.a5 = 0.0;
                   c.a6 = 0.0;
                   a1_g = p.k * std::max({1.0, p.beta1, 1.0 / (p.beta1 - 1.0)});
                 },
                 [&](const LennardJones& p) {
                   c.beta1 = 13.0;
                   c.beta2 = 7.0;
                   c.a4 = 12.0 * p.a;
                   c.a5 = -6.0 * p.b;
                   c.a6 = 0.0;
                   a1_g = 156.0 * p.a + 42.0 * p.b;
                 },
             },
             pair);
  c.a1 = std::max(a1_u, a1_g);
  return c;
}

PotentialSpec PotentialSpec::make(PolyConfining confining, PairPotential pair) {
  PotentialSpec spec;
  spec.confining = confining;
  spec.pair = pair;
  spec.constants = derive_constants(confining, pair);
  return spec;
}

std::vector<std::string> PotentialSpec::problems() const {
  std::vector<std::string> out = constants.problems();
  if (!(confining.lambda >= 1.0)) out.push_back("confining lambda must be >= 1");
  // scale >= 1 keeps U >= 1 everywhere, since (1 + |q|^2)^{(lambda+1)/2} >= 1
  if (!(confining.scale >= 1.0)) out.push_back("confining scale must be >= 1 so that U >= 1");
  std::visit(Overloaded{
                 [](const NoPair&) {},
                 [&](const LogRepulsive& p) {
                   if (!(p.k > 0.0)) out.push_back("log repulsion needs k > 0");
                 },
                 [&](const PowerRepulsive& p) {
                   if (!(p.k > 0.0)) out.push_back("power repulsion needs k > 0");
                   if (!(p.beta1 > 1.0)) out.push_back("power repulsion needs beta1 > 1");
                 },
                 [&](const LennardJones& p) {
                   if (!(p.a > 0.0 && p.b >= 0.0))
                     out.push_back("Lennard-Jones needs A > 0 and B >= 0");
                 },
             },
             pair);
  return out;
}

double eval_U(const PotentialSpec& spec, const Vec& q) {
  const auto& c = spec.confining;
  return c.scale * std::pow(1.0 + q.squaredNorm(), 0.5 * (c.lambda + 1.0));
}

Vec grad_U(const PotentialSpec& spec, const Vec& q) {
  const auto& c = spec.confining;
  return (c.scale * (c.lambda + 1.0) * std::pow(1.0 + q.squaredNorm(), 0.5 * (c.lambda - 1.0))) *
         q;
}

Mat hess_U(const PotentialSpec& spec, const Vec& q) {
  const auto& c = spec.confining;
  const double t = 1.0 + q.squaredNorm();
  const double k = c.scale * (c.lambda + 1.0);
  Mat h = (k * std::pow(t, 0.5 * (c.lambda - 1.0))) * Mat::Identity(q.size(), q.size());
  h.noalias() += (k * (c.lambda - 1.0) * std::pow(t, 0.5 * (c.lambda - 3.0))) * (q * q.transpose());
  return h;
}

double pair_force_factor(const PotentialSpec& spec, double dist) {
  return std::visit(Overloaded{
                        [](const NoPair&) { return 0.0; },
                        [&](const LogRepulsive& p) { return -p.k / (dist * dist); },
                        [&](const PowerRepulsive& p) {
                          return -p.k * std::pow(dist, -p.beta1 - 1.0);
                        },
                        [&](const LennardJones& p) {
                          return -12.0 * p.a * std::pow(dist, -14) +
                                 6.0 * p.b * std::pow(dist, -8);
                        },
                    },
                    spec.pair);
}

double eval_G(const PotentialSpec& spec, const Vec& r) {
  if (!spec.has_pair()) return 0.0;
  const double d = norm_checked(r);
  return std::visit(Overloaded{
                        [](const NoPair&) { return 0.0; },
                        [&](const LogRepulsive& p) { return -p.k * std::log(d); },
                        [&](const PowerRepulsive& p) {
                          return p.k * std::pow(d, 1.0 - p.beta1) / (p.beta1 - 1.0);
                        },
                        [&](const LennardJones& p) {
                          return p.a * std::pow(d, -12) - p.b * std::pow(d, -6);
                        },
                    },
                    spec.pair);
}

Vec grad_G(const PotentialSpec& spec, const Vec& r) {
  if (!spec.has_pair()) return Vec::Zero(r.size());
  return pair_force_factor(spec, norm_checked(r)) * r;
}

Mat hess_G(const PotentialSpec& spec, const Vec& r) {
  if (!spec.has_pair()) return Mat::Zero(r.size(), r.size());
  const double d = norm_checked(r);
  Mat h = pair_force_factor(spec, d) * Mat::Identity(r.size(), r.size());
  h.noalias() += pair_hess_factor(spec.pair, d) * (r * r.transpose());
  return h;
}

long AuditReport::total_violations() const {
  long n = 0;
  for (const auto& i : inequalities) n += i.violations;
  return n;
}

AuditReport audit_assumptions(const PotentialSpec& spec, int dimension, long sample_count,
                              double r_min, double r_max, std::uint64_t seed, int bin_count) {
  AuditReport rep;
  rep.dimension = dimension;
  rep.sample_count = sample_count;
  rep.r_min = r_min;
  rep.r_max = r_max;
  rep.seed = seed;
  rep.constants = spec.constants;
  const auto& c = spec.constants;

  std::vector<std::string> names = {"U_growth",        "gradU_growth", "gradU_coercive",
                                    "hessU_growth",    "gradU_lower"};
  if (spec.has_pair()) {
    names.insert(names.end(), {"G_growth", "gradG_growth", "hessG_growth", "gradG_singular_part",
                               "gradG_singular_part_strong"});
  }
  const double log_lo = std::log(r_min), log_hi = std::log(r_max);
  for (const auto& n : names) {
    InequalityAudit a;
    a.name = n;
    a.worst_relative_slack = std::numeric_limits<double>::infinity();
    for (int b = 0; b < bin_count; ++b) {
      RadiusBin bin;
      bin.r_lo = std::exp(log_lo + (log_hi - log_lo) * b / bin_count);
      bin.r_hi = std::exp(log_lo + (log_hi - log_lo) * (b + 1) / bin_count);
      a.bins.push_back(bin);
    }
    rep.inequalities.push_back(std::move(a));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  rep.min_U = std::numeric_limits<double>::infinity();
  rep.min_G = spec.has_pair() ? std::numeric_limits<double>::infinity() : 0.0;

  // `magnitude` covers the size of terms that cancel inside lhs, so rounding
  // in an exact identity is not reported as a violation.
  auto record = [&](size_t idx, double radius, double lhs, double rhs, double magnitude = 0.0) {
    auto& a = rep.inequalities[idx];
    const double scale = std::max({std::abs(lhs), std::abs(rhs), magnitude, 1e-300});
    const double slack = (rhs - lhs) / scale;
    ++a.checked;
    int b = static_cast<int>((std::log(radius) - log_lo) / (log_hi - log_lo) * bin_count);
    b = std::clamp(b, 0, bin_count - 1);
    ++a.bins[b].checked;
    if (slack < a.worst_relative_slack) {
      a.worst_relative_slack = slack;
      a.worst_radius = radius;
    }
    if (slack < -1e-12) {
      ++a.violations;
      ++a.bins[b].violations;
      if (a.violating_radii.size() < 16) a.violating_radii.push_back(radius);
    }
  };

  const double b1 = c.beta1, b2 = c.beta2, l = c.lambda;
  for (long k = 0; k < sample_count; ++k) {
    const double radius =
        (log_hi > log_lo) ? std::exp(log_lo + (log_hi - log_lo) * unif(rng)) : r_min;
    Vec dir(dimension);
    do {
      for (int i = 0; i < dimension; ++i) dir[i] = gauss(rng);
    } while (dir.norm() == 0.0);
    const Vec q = radius * dir.normalized();

    const double u = eval_U(spec, q);
    const Vec gu = grad_U(spec, q);
    rep.min_U = std::min(rep.min_U, u);
    record(0, radius, std::abs(u), c.a1 * (1.0 + std::pow(radius, l + 1.0)));
    record(1, radius, gu.norm(), c.a1 * (1.0 + std::pow(radius, l)));
    record(2, radius, c.a2 * std::pow(radius, l + 1.0) - c.a3, gu.dot(q));
    record(3, radius, spectral_norm(hess_U(spec, q)), c.a1 * (1.0 + std::pow(radius, l - 1.0)));
    record(4, radius, c.a2 * std::pow(radius, l) - std::max(c.a2, c.a3), gu.norm());

    if (!spec.has_pair()) continue;
    const double g = eval_G(spec, q);
    const Vec gg = grad_G(spec, q);
    rep.min_G = std::min(rep.min_G, g);
    record(5, radius, std::abs(g), c.a1 * (1.0 + radius + std::pow(radius, -b1)));
    record(6, radius, gg.norm(), c.a1 * (1.0 + std::pow(radius, -b1)));
    record(7, radius, spectral_norm(hess_G(spec, q)), c.a1 * (1.0 + std::pow(radius, -b1 - 1.0)));
    const Vec singular = gg + c.a4 * std::pow(radius, -b1 - 1.0) * q;
    const double cancelled = gg.norm() + c.a4 * std::pow(radius, -b1);
    record(8, radius, singular.norm(), std::abs(c.a5) * std::pow(radius, -b2) + c.a6, cancelled);
    record(9, radius, (singular + c.a5 * std::pow(radius, -b2 - 1.0) * q).norm(), c.a6,
           cancelled + std::abs(c.a5) * std::pow(radius, -b2));
  }
  return rep;
}

}  // namespace langevin
