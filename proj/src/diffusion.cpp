#include "langevin/diffusion.hpp"

#include <cmath>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const RelativisticFriction& relativistic_or_throw(const DiffusionSpec& spec, const char* op) {
  const auto* r = std::get_if<RelativisticFriction>(&spec.field);
  if (!r) throw KindError(std::string(op) + " needs the relativistic friction matrix");
  return *r;
}

void classical_or_throw(const DiffusionSpec& spec, const char* op) {
  if (spec.is_relativistic()) throw KindError(std::string(op) + " is defined for classical fields only");
}

}  // namespace

std::string DiffusionSpec::name() const {
  return std::visit(Overloaded{
                        [](const ConstantField&) { return std::string("constant"); },
                        [](const SinePerturbedField&) { return std::string("sine"); },
                        [](const RelativisticFriction&) { return std::string("relativistic"); },
                    },
                    field);
}

std::vector<std::string> DiffusionSpec::problems(int dimension) const {
  std::vector<std::string> out;
  std::visit(Overloaded{
                 [&](const ConstantField& f) {
                   if (!(f.gamma > 0.0)) out.push_back("constant diffusion needs gamma > 0");
                 },
                 [&](const SinePerturbedField& f) {
                   if (!(f.amplitude >= 0.0 && f.gamma0 > f.amplitude))
                     out.push_back("sine diffusion needs gamma0 > amplitude >= 0");
                   if (f.wavevector.size() != dimension)
                     out.push_back("sine diffusion wavevector must have one entry per dimension");
                 },
                 [&](const RelativisticFriction& f) {
                   if (!(f.epsilon > 0.0)) out.push_back("relativistic diffusion needs epsilon > 0");
                 },
             },
             field);
  return out;
}

Mat IsoRank1::dense(const Vec& p) const {
  Mat m = alpha * Mat::Identity(p.size(), p.size());
  m.noalias() += beta * (p * p.transpose());
  return m;
}

IsoRank1 relativistic_d(double epsilon, const Vec& p) {
  const double rs = std::sqrt(1.0 + epsilon * p.squaredNorm());
  return {1.0 / rs, epsilon / rs};
}

// alpha = s^{-1/4}; beta = (s^{1/4} - s^{-1/4}) / |p|^2 rewritten as
// eps s^{-1/4} / (sqrt(s) + 1), which has no cancellation near p = 0 and
// equals eps / 2 there.
IsoRank1 relativistic_sqrt_d(double epsilon, const Vec& p) {
  const double rs = std::sqrt(1.0 + epsilon * p.squaredNorm());
  const double q = 1.0 / std::sqrt(rs);
  return {q, epsilon * q / (rs + 1.0)};
}

std::pair<IsoRank1, IsoRank1> relativistic_truncated(double epsilon, const Vec& p, double radius) {
  const double p2 = p.squaredNorm();
  const double rs = std::sqrt(1.0 + epsilon * p2);
  const double th = theta_r(std::sqrt(p2), radius);
  // Inside the cutoff the untruncated coefficients are returned verbatim so
  // that truncated and plain runs agree bit for bit there.
  if (th == 1.0) return {relativistic_d(epsilon, p), relativistic_sqrt_d(epsilon, p)};
  const IsoRank1 m{1.0 + th * (1.0 / rs - 1.0), th * epsilon / rs};
  const double perp = std::sqrt(m.alpha);
  const double along = std::sqrt(m.alpha + m.beta * p2);
  return {m, IsoRank1{perp, m.beta / (along + perp)}};
}

ScalarField classical_field(const DiffusionSpec& spec, const Vec& x) {
  return std::visit(
      Overloaded{
          [&](const ConstantField& f) { return ScalarField{f.gamma, Vec::Zero(x.size())}; },
          [&](const SinePerturbedField& f) {
            const double phase = f.wavevector.dot(x);
            return ScalarField{f.gamma0 + f.amplitude * std::sin(phase),
                               (f.amplitude * std::cos(phase)) * f.wavevector};
          },
          [&](const RelativisticFriction&) -> ScalarField {
            throw KindError("classical_field called on relativistic friction");
          },
      },
      spec.field);
}

Mat d_matrix(const DiffusionSpec& spec, const Vec& z) {
  if (const auto* r = std::get_if<RelativisticFriction>(&spec.field))
    return relativistic_d(r->epsilon, z).dense(z);
  return classical_field(spec, z).g * Mat::Identity(z.size(), z.size());
}

Mat sqrt_d(const DiffusionSpec& spec, const Vec& z) {
  if (const auto* r = std::get_if<RelativisticFriction>(&spec.field))
    return relativistic_sqrt_d(r->epsilon, z).dense(z);
  return std::sqrt(classical_field(spec, z).g) * Mat::Identity(z.size(), z.size());
}

Vec div_d(const DiffusionSpec& spec, const Vec& z) {
  if (const auto* r = std::get_if<RelativisticFriction>(&spec.field)) {
    const double d = static_cast<double>(z.size());
    return (r->epsilon * d / std::sqrt(1.0 + r->epsilon * z.squaredNorm())) * z;
  }
  // [div(g I)]_i = d_i g
  return classical_field(spec, z).grad;
}

Mat inv_d(const DiffusionSpec& spec, const Vec& z) {
  classical_or_throw(spec, "inv_d");
  return (1.0 / classical_field(spec, z).g) * Mat::Identity(z.size(), z.size());
}

Vec div_inv_d(const DiffusionSpec& spec, const Vec& z) {
  classical_or_throw(spec, "div_inv_d");
  const auto f = classical_field(spec, z);
  const int d = static_cast<int>(z.size());
  const Mat inv = (1.0 / f.g) * Mat::Identity(d, d);
  Vec out = Vec::Zero(d);
  for (int j = 0; j < d; ++j) {
    const Mat dj = f.grad[j] * Mat::Identity(d, d);
    out -= (inv * dj * inv).col(j);
  }
  return out;
}

std::pair<double, double> ellipticity_bounds(const DiffusionSpec& spec) {
  return std::visit(Overloaded{
                        [](const ConstantField& f) { return std::pair{f.gamma, f.gamma}; },
                        [](const SinePerturbedField& f) {
                          return std::pair{f.gamma0 - f.amplitude, f.gamma0 + f.amplitude};
                        },
                        [](const RelativisticFriction&) -> std::pair<double, double> {
                          throw KindError("relativistic friction is not uniformly elliptic");
                        },
                    },
                    spec.field);
}

TruncatedD truncated_d(const DiffusionSpec& spec, const Vec& p, double radius) {
  const auto& r = relativistic_or_throw(spec, "truncated_d");
  const auto [m, sm] = relativistic_truncated(r.epsilon, p, radius);
  return {m.dense(p), sm.dense(p)};
}

double theta_r(double t, double radius) {
  const double s = std::abs(t) - radius;
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  return 1.0 - s * s * (3.0 - 2.0 * s);
}

}  // namespace langevin
