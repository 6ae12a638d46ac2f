#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "langevin/integrators.hpp"
#include "langevin/lyapunov.hpp"

namespace langevin {

// Parameters of the experiment drivers. Fields unused by a given driver are
// ignored by it.
struct ExperimentParams {
  double horizon = 1.0;
  int ensemble = 64;
  double burn_in_fraction = 0.2;
  int stride = 10;
  std::vector<double> checkpoints = {0.01, 0.1, 1.0};
  double ks_threshold = 0.02;
  double min_ess = 1e5;
  bool attach_certificate = true;

  std::vector<double> masses = {0.1, 0.01, 0.001};
  double dt_per_mass = 0.05;
  double control_ratio = 2.0;

  std::vector<double> epsilons = {0.1, 0.01, 0.001};
  bool truncated = true;
  double slope_lo = 0.7;
  double slope_hi = 1.3;
  double band_factor = 2.0;

  long trials = 10000;
  double lemma_tolerance = 1e-10;

  std::string lyapunov = "auto";  // auto | classical | relativistic_single | relativistic_multi
  double alpha = std::numeric_limits<double>::quiet_NaN();
  LyapunovParams lyapunov_params;
  SamplePlan plan;

  long audit_samples = 10000;
  double audit_r_min = 1e-3;
  double audit_r_max = 1e3;

  int timeseries_stride = 1;
  int histogram_bins = 60;
};

struct RunConfig {
  ModelConfig model;
  ModelSpecs specs;
  PhaseState initial;
  ExperimentParams experiment;
};

// Flat `key = value` text; `#` starts a comment; lists are comma separated.
// Unknown or repeated keys are errors.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
RunConfig run_config_from(const KeyValues& kv);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

KeyValues to_key_values(const RunConfig& cfg);
std::string write_run_config(const RunConfig& cfg);

// Default initial state: positions spread along the first axis at unit
// spacing centred on the origin, momenta zero.
PhaseState default_initial_state(int particle_count, int dimension);

}  // namespace langevin
