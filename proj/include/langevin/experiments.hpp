#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "langevin/config.hpp"
#include "langevin/measures.hpp"

namespace langevin {

using Json = nlohmann::ordered_json;

// Everything needed to judge and re-run one experiment. The wall-clock field
// is the only non-deterministic entry and is left out of canonical dumps.
struct ExperimentReport {
  std::string id;
  Json config;      // flat key/value snapshot of the RunConfig
  Json seeds;
  Json thresholds;
  Json metrics;
  bool pass = false;
  double wall_clock_seconds = 0.0;

  // Histogram of the tested marginal, when the experiment has one.
  std::vector<HistogramBin> histogram;

  Json to_json(bool include_wall_clock = true) const;
  std::string dump(bool include_wall_clock = true) const;
};

// Runs fn(0..n-1) on a small worker pool. Results must be written by index so
// the reduction afterwards does not depend on scheduling. The exception of
// the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

Json to_json(const DriftCertificate& cert);
Json to_json(const AuditReport& audit);
Json to_json(const DistanceReport& d);

LyapunovKind resolve_lyapunov_kind(const RunConfig& rc);

// One trajectory of the configured model. Rows go to `timeseries` when it is
// not null. Fails (pass = false) when a step is rejected for good.
ExperimentReport run_simulate(const RunConfig& rc, std::ostream* timeseries = nullptr);

// Long-run marginal KS distances at checkpoints, effective sample size and
// decay, with a drift certificate attached.
ExperimentReport run_ergodicity(const RunConfig& rc);

// Coupled classical runs over experiment.masses against the overdamped limit
// and, at the smallest mass, against the control without div D^{-1}.
ExperimentReport run_small_mass(const RunConfig& rc);

// Coupled relativistic runs over experiment.epsilons against the classical
// limit; truncated mode fits a log-log slope, untruncated mode checks that
// the error decreases.
ExperimentReport run_newtonian(const RunConfig& rc);

// Mean over the ensemble of sup_t Gamma_3 for each epsilon; passes when the
// largest and smallest means differ by less than experiment.band_factor.
ExperimentReport run_gamma3_band(const RunConfig& rc);

struct LemmaSummary {
  std::string name;
  long trials = 0;
  long violations = 0;
  double worst_relative_slack = 0.0;  // min of (lhs - rhs) / max(|lhs|, |rhs|)
};

// Random admissible configurations for each appendix inequality and for the
// growth, spectral and quadratic-variation bounds.
std::vector<LemmaSummary> lemma_trials(std::uint64_t seed, long trials, double tolerance,
                                       double* consistency_gap = nullptr);
ExperimentReport run_lemma_suite(const RunConfig& rc);

ExperimentReport run_certify_drift(const RunConfig& rc);
ExperimentReport run_audit(const RunConfig& rc);

// Left-hand sides of the appendix inequalities for a configuration x.
//   A1(s)        sum_i < sum_j r_ij / |r_ij|^{s+1}, sum_l r_il / |r_il| >
//   A2(s)        sum_i | sum_j r_ij / |r_ij|^{s+1} |^2
//   A3(gamma, s) sum_i < sum_j r_ij / |r_ij|^gamma, sum_k r_ik / |r_ik|^{s+1} >
// and the common right-hand side sum_{i<j} |r_ij|^{-t}.
double lemma_a1_lhs(const std::vector<Vec>& x, double s);
double lemma_a2_lhs(const std::vector<Vec>& x, double s);
double lemma_a3_lhs(const std::vector<Vec>& x, double gamma, double s);
double inverse_power_sum(const std::vector<Vec>& x, double t);

// Sandwich constants a7..a10 of
//   a7 S - a8 <= sum_i | sum_{j != i} grad G(q_i - q_j) |^2 <= a9 S + a10,
//   S = sum_{i != j} |q_i - q_j|^{-2 beta1},
// for pure log or inverse-power pairs (grad G = -a4 r / |r|^{beta1 + 1}).
struct NablaGBounds {
  double a7, a8, a9, a10;
};
NablaGBounds nabla_g_bounds(const PotentialSpec& spec, int particle_count);

// Median of a copy; NaN for an empty input.
double median(std::vector<double> xs);
// Least-squares slope of y against x; NaN when x has no spread.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace langevin
