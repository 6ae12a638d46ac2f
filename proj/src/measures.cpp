#include "langevin/measures.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using boost::math::quadrature::gauss_kronrod;

double integrate(const std::function<double(double)>& f, double a, double b, unsigned depth = 15) {
  return gauss_kronrod<double, 15>::integrate(f, a, b, depth, 1e-12);
}

double potential_part(const PhaseState& state, const PotentialSpec& potential) {
  const int n = state.particle_count();
  double e = 0.0;
  for (int i = 0; i < n; ++i) e += eval_U(potential, state.positions[i]);
  if (!potential.has_pair()) return e;
  if (n == 1) return e + eval_G(potential, state.positions[0]);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e += eval_G(potential, state.positions[i] - state.positions[j]);
  return e;
}

// (1 - sqrt(1 + eps r^2)) / eps without cancellation.
double mj_log_weight(double eps, double r) {
  const double r2 = r * r;
  return -r2 / (1.0 + std::sqrt(1.0 + eps * r2));
}

struct Envelope {
  double r0;
  double rate;        // a = -l'(r0)
  double acceptance;  // Z_target / Z_envelope
};

// Exponential envelope tangent to the MJ log weight at r0, for the radial
// density r^{d-1} exp(l(r)). Chooses r0 on a log grid to maximize acceptance.
Envelope mj_envelope(double eps, int d) {
  auto target = [&](double r) { return std::pow(r, d - 1) * std::exp(mj_log_weight(eps, r)); };
  const double z_target = integrate(target, 0.0, std::numeric_limits<double>::infinity());
  Envelope best{1.0, 0.0, 0.0};
  for (int k = 0; k <= 600; ++k) {
    const double r0 = std::pow(10.0, -3.0 + 7.0 * k / 600.0);
    const double a = r0 / std::sqrt(1.0 + eps * r0 * r0);
    // log Z_env = l(r0) + a r0 + lgamma(d) - d log a
    const double log_env = mj_log_weight(eps, r0) + a * r0 + std::lgamma(d) - d * std::log(a);
    const double acc = z_target * std::exp(-log_env);
    if (acc > best.acceptance) best = {r0, a, acc};
  }
  return best;
}

Vec random_direction(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = g(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace

std::string measure_name(const MeasureKind& kind) {
  return std::visit(Overloaded{
                        [](const GibbsBoltzmann& g) {
                          std::ostringstream os;
                          os << "gibbs_boltzmann(m=" << g.mass << ")";
                          return os.str();
                        },
                        [](const MaxwellJuttner& m) {
                          std::ostringstream os;
                          os << "maxwell_juttner(eps=" << m.epsilon << ")";
                          return os.str();
                        },
                    },
                    kind);
}

double log_density(const MeasureKind& kind, const PhaseState& state,
                   const PotentialSpec& potential) {
  double kinetic = 0.0;
  std::visit(Overloaded{
                 [&](const GibbsBoltzmann& g) {
                   for (const auto& v : state.momenta) kinetic += 0.5 * g.mass * v.squaredNorm();
                 },
                 [&](const MaxwellJuttner& m) {
                   for (const auto& p : state.momenta)
                     kinetic += std::sqrt(1.0 + m.epsilon * p.squaredNorm()) / m.epsilon;
                 },
             },
             kind);
  return -kinetic - potential_part(state, potential);
}

double momentum_log_weight(const MeasureKind& kind, double speed) {
  return std::visit(Overloaded{
                        [&](const GibbsBoltzmann& g) { return -0.5 * g.mass * speed * speed; },
                        [&](const MaxwellJuttner& m) { return mj_log_weight(m.epsilon, speed); },
                    },
                    kind);
}

MomentumSamples sample_momentum_marginal(const MeasureKind& kind, int dimension, long count,
                                         std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  MomentumSamples out;
  out.samples.reserve(count);
  std::mt19937_64 rng(seed);
  if (const auto* g = std::get_if<GibbsBoltzmann>(&kind)) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(g->mass));
    for (long k = 0; k < count; ++k) {
      Vec v(dimension);
      for (int c = 0; c < dimension; ++c) v[c] = normal(rng);
      out.samples.push_back(v);
    }
    out.proposals = count;
    return out;
  }
  const double eps = std::get<MaxwellJuttner>(kind).epsilon;
  const Envelope env = mj_envelope(eps, dimension);
  out.predicted_acceptance = env.acceptance;
  if (env.acceptance < 1e-3) {
    std::ostringstream os;
    os << "Maxwell-Juttner envelope acceptance " << env.acceptance << " below 1e-3 at eps = " << eps;
    throw EnvelopeFailure(os.str());
  }
  std::gamma_distribution<double> radial(dimension, 1.0 / env.rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double l0 = mj_log_weight(eps, env.r0);
  while (static_cast<long>(out.samples.size()) < count) {
    ++out.proposals;
    const double r = radial(rng);
    const double log_ratio = mj_log_weight(eps, r) - (l0 - env.rate * (r - env.r0));
    if (std::log(unif(rng)) <= log_ratio) out.samples.push_back(r * random_direction(dimension, rng));
    if (out.proposals > 1000 * count + 1000000)
      throw EnvelopeFailure("Maxwell-Juttner rejection sampler made no progress");
  }
  out.acceptance_rate = static_cast<double>(count) / static_cast<double>(out.proposals);
  return out;
}

DistanceReport ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf,
                           std::string reference) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return {DistanceReport::Statistic::kolmogorov_smirnov, std::clamp(d, 0.0, 1.0),
          static_cast<long>(samples.size()), std::move(reference)};
}

DistanceReport ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return {DistanceReport::Statistic::kolmogorov_smirnov, d, static_cast<long>(a.size()),
          "two-sample"};
}

DistanceReport ks_distance_density(std::vector<double> samples,
                                   const std::function<double(double)>& density, double lo,
                                   double hi, std::string reference) {
  std::sort(samples.begin(), samples.end());
  const double z = integrate(density, lo, hi);
  const double n = static_cast<double>(samples.size());
  double mass = 0.0, prev = lo, d = 0.0;
  for (size_t k = 0; k < samples.size(); ++k) {
    const double x = std::clamp(samples[k], lo, hi);
    if (x > prev) mass += integrate(density, prev, x, k == 0 ? 15 : 4);
    prev = x;
    const double f = std::clamp(mass / z, 0.0, 1.0);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return {DistanceReport::Statistic::kolmogorov_smirnov, d, static_cast<long>(samples.size()),
          std::move(reference)};
}

double gaussian_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

double integrated_autocorrelation_time(const std::vector<double>& series) {
  const size_t n = series.size();
  if (n < 4) return 1.0;
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> c(series.size());
  for (size_t t = 0; t < n; ++t) c[t] = series[t] - mean;
  auto autocov = [&](size_t lag) {
    double s = 0.0;
    for (size_t t = 0; t + lag < n; ++t) s += c[t] * c[t + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 1.0;
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0 / static_cast<double>(n));
}

double effective_sample_size(const std::vector<double>& series) {
  return static_cast<double>(series.size()) / integrated_autocorrelation_time(series);
}

std::vector<HistogramBin> histogram(const std::vector<double>& samples, int bins, double lo,
                                    double hi) {
  std::vector<HistogramBin> out;
  if (bins < 1 || !(hi > lo)) return out;
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) out.push_back({lo + b * w, lo + (b + 1) * w, 0});
  for (double x : samples) {
    if (x < lo || x > hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((x - lo) / w));
    ++out[b].count;
  }
  return out;
}

double gamma3(const PhaseState& state, const PotentialSpec& potential, double epsilon) {
  if (state.particle_count() != 1) throw KindError("gamma3 is defined for a single particle");
  const Vec& q = state.positions[0];
  const Vec& p = state.momenta[0];
  double phi = eval_U(potential, q);
  if (potential.has_pair()) phi += eval_G(potential, q);
  return 0.5 * epsilon * phi * phi + phi * std::sqrt(1.0 + epsilon * p.squaredNorm()) +
         0.5 * p.squaredNorm();
}

}  // namespace langevin
