#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "langevin/types.hpp"

namespace langevin {

// Classical fields are scalar multiples of the identity, D(x) = g(x) I.
struct ConstantField {
  double gamma = 1.0;
  bool operator==(const ConstantField&) const = default;
};

// g(x) = gamma0 + amplitude * sin(<wavevector, x>), gamma0 > amplitude >= 0.
struct SinePerturbedField {
  double gamma0 = 2.0;
  double amplitude = 1.0;
  Vec wavevector = Vec::Unit(1, 0);
  bool operator==(const SinePerturbedField&) const = default;
};

// D(p) = (I + eps p p^T) / sqrt(1 + eps |p|^2)
struct RelativisticFriction {
  double epsilon = 1.0;
  bool operator==(const RelativisticFriction&) const = default;
};

struct DiffusionSpec {
  std::variant<ConstantField, SinePerturbedField, RelativisticFriction> field = ConstantField{};

  bool is_relativistic() const { return std::holds_alternative<RelativisticFriction>(field); }
  std::string name() const;
  std::vector<std::string> problems(int dimension) const;

  bool operator==(const DiffusionSpec&) const = default;
};

// Matrices of the form alpha I + beta p p^T. D(p), its square root and the
// truncated matrix all share this shape, which keeps the hot loops free of
// dense d x d products.
struct IsoRank1 {
  double alpha = 1.0;
  double beta = 0.0;

  Vec apply(const Vec& p, const Vec& x) const { return alpha * x + (beta * p.dot(x)) * p; }
  Mat dense(const Vec& p) const;
};

IsoRank1 relativistic_d(double epsilon, const Vec& p);
IsoRank1 relativistic_sqrt_d(double epsilon, const Vec& p);
// M = theta_R(|p|) (D(p) - I) + I and its square root.
std::pair<IsoRank1, IsoRank1> relativistic_truncated(double epsilon, const Vec& p, double radius);

// Scalar field value and gradient for classical kinds.
struct ScalarField {
  double g;
  Vec grad;
};
ScalarField classical_field(const DiffusionSpec& spec, const Vec& x);

Mat d_matrix(const DiffusionSpec& spec, const Vec& z);
Mat sqrt_d(const DiffusionSpec& spec, const Vec& z);
Vec div_d(const DiffusionSpec& spec, const Vec& z);

// Classical kinds only; KindError otherwise.
Mat inv_d(const DiffusionSpec& spec, const Vec& z);
// [div D^{-1}]_i = -sum_j (D^{-1} d_j D D^{-1})_{ij}
Vec div_inv_d(const DiffusionSpec& spec, const Vec& z);
// (gamma_lo, gamma_hi) bounding the spectrum of D(x) over all x.
std::pair<double, double> ellipticity_bounds(const DiffusionSpec& spec);

struct TruncatedD {
  Mat m;
  Mat sqrt_m;
};
// Relativistic kind only.
TruncatedD truncated_d(const DiffusionSpec& spec, const Vec& p, double radius);

// C^1 cubic smoothstep: 1 on [0, R], 0 beyond R + 1.
double theta_r(double t, double radius);

}  // namespace langevin
