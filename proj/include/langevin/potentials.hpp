#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "langevin/assumptions.hpp"
#include "langevin/types.hpp"

namespace langevin {

// U(q) = scale * (1 + |q|^2)^{(lambda+1)/2}
struct PolyConfining {
  double lambda = 1.0;
  double scale = 1.0;
  bool operator==(const PolyConfining&) const = default;
};

struct NoPair {
  bool operator==(const NoPair&) const = default;
};
// G(r) = -k log|r|
struct LogRepulsive {
  double k = 1.0;
  bool operator==(const LogRepulsive&) const = default;
};
// G(r) = k |r|^{1-beta1} / (beta1 - 1), beta1 > 1
struct PowerRepulsive {
  double k = 1.0;
  double beta1 = 2.0;
  bool operator==(const PowerRepulsive&) const = default;
};
// G(r) = A |r|^{-12} - B |r|^{-6}
struct LennardJones {
  double a = 1.0;
  double b = 1.0;
  bool operator==(const LennardJones&) const = default;
};

using PairPotential = std::variant<NoPair, LogRepulsive, PowerRepulsive, LennardJones>;

std::string pair_name(const PairPotential& pair);

// Constants that provably hold for the given variants (see potentials.cpp for
// the derivations). Ellipticity bounds are left at 1 and filled in from the
// diffusion field by callers that need them.
AssumptionConstants derive_constants(const PolyConfining& confining, const PairPotential& pair);

struct PotentialSpec {
  PolyConfining confining;
  PairPotential pair = NoPair{};
  AssumptionConstants constants;

  static PotentialSpec make(PolyConfining confining, PairPotential pair);

  bool has_pair() const { return !std::holds_alternative<NoPair>(pair); }
  std::vector<std::string> problems() const;

  bool operator==(const PotentialSpec&) const = default;
};

double eval_U(const PotentialSpec& spec, const Vec& q);
Vec grad_U(const PotentialSpec& spec, const Vec& q);
Mat hess_U(const PotentialSpec& spec, const Vec& q);

// Pair potential and derivatives at separation r != 0. These throw
// SingularInputError at r = 0 and return 0 for NoPair.
double eval_G(const PotentialSpec& spec, const Vec& r);
Vec grad_G(const PotentialSpec& spec, const Vec& r);
Mat hess_G(const PotentialSpec& spec, const Vec& r);

// Radial profile f with grad G(r) = f(|r|) r. Used by the force loops, which
// avoid building temporaries.
double pair_force_factor(const PotentialSpec& spec, double dist);

struct RadiusBin {
  double r_lo = 0.0;
  double r_hi = 0.0;
  long checked = 0;
  long violations = 0;
};

struct InequalityAudit {
  std::string name;
  long checked = 0;
  long violations = 0;
  // min over samples of (rhs - lhs) / max(|lhs|, |rhs|, 1e-300)
  double worst_relative_slack = 0.0;
  double worst_radius = 0.0;
  std::vector<double> violating_radii;  // first few only
  std::vector<RadiusBin> bins;
};

struct AuditReport {
  int dimension = 1;
  long sample_count = 0;
  double r_min = 0.0, r_max = 0.0;
  std::uint64_t seed = 0;
  AssumptionConstants constants;
  std::vector<InequalityAudit> inequalities;
  double min_U = 0.0;  // sampled infimum estimates
  double min_G = 0.0;

  long total_violations() const;
};

AuditReport audit_assumptions(const PotentialSpec& spec, int dimension, long sample_count,
                              double r_min, double r_max, std::uint64_t seed, int bin_count = 12);

}  // namespace langevin
