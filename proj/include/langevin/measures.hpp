#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "langevin/potentials.hpp"
#include "langevin/state.hpp"

namespace langevin {

struct GibbsBoltzmann {
  double mass = 1.0;
};
struct MaxwellJuttner {
  double epsilon = 1.0;
};
using MeasureKind = std::variant<GibbsBoltzmann, MaxwellJuttner>;

std::string measure_name(const MeasureKind& kind);

// Unnormalized invariant log-density of the full state.
//   GB: -sum(m|v|^2/2 + U) - (1/2) sum_{i != j} G
//   MJ: -sum(sqrt(1 + eps|p|^2)/eps + U) - (1/2) sum_{i != j} G
// A single particle with a pair potential contributes -G(q).
double log_density(const MeasureKind& kind, const PhaseState& state, const PotentialSpec& potential);

// Unnormalized log-density of one particle's momentum as a function of |p|,
// shifted so that it is 0 at p = 0.
double momentum_log_weight(const MeasureKind& kind, double speed);

class EnvelopeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MomentumSamples {
  std::vector<Vec> samples;
  long proposals = 0;
  double acceptance_rate = 1.0;           // empirical
  double predicted_acceptance = 1.0;      // from the envelope constant
};

// Exact draws from the one-particle momentum marginal. MJ uses rejection
// from an exponential envelope exp(-a|p|) tangent to the (concave) log
// weight; `a` is tuned at startup to maximize acceptance. Throws
// EnvelopeFailure if acceptance would fall below 1e-3.
MomentumSamples sample_momentum_marginal(const MeasureKind& kind, int dimension, long count,
                                         std::uint64_t seed);

struct DistanceReport {
  enum class Statistic { kolmogorov_smirnov, moment_gap };
  Statistic statistic = Statistic::kolmogorov_smirnov;
  double value = 0.0;
  long sample_count = 0;
  std::string reference;
};

// Two-sided KS statistic against a CDF.
DistanceReport ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf,
                           std::string reference);
// Two-sample KS statistic.
DistanceReport ks_distance(std::vector<double> a, std::vector<double> b);
// KS against an unnormalized density on [lo, hi] (infinite bounds allowed);
// the CDF is built by adaptive Gauss-Kronrod quadrature between consecutive
// order statistics.
DistanceReport ks_distance_density(std::vector<double> samples,
                                   const std::function<double(double)>& density, double lo,
                                   double hi, std::string reference);

double gaussian_cdf(double x, double variance);

// Integrated autocorrelation time by Geyer's initial positive sequence, and
// the effective sample size n / tau.
double integrated_autocorrelation_time(const std::vector<double>& series);
double effective_sample_size(const std::vector<double>& series);

struct HistogramBin {
  double left, right;
  long count;
};
std::vector<HistogramBin> histogram(const std::vector<double>& samples, int bins, double lo,
                                    double hi);

// 0.5 eps phi^2 + phi sqrt(1 + eps|p|^2) + 0.5|p|^2 with phi = U(q) + G(q), N = 1.
double gamma3(const PhaseState& state, const PotentialSpec& potential, double epsilon);

}  // namespace langevin
