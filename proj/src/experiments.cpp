#include "langevin/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "langevin/errors.hpp"
#include "langevin/observers.hpp"

namespace langevin {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Json config_snapshot(const RunConfig& rc) {
  Json j = Json::object();
  for (const auto& [k, v] : to_key_values(rc)) j[k] = v;
  return j;
}

Json ensemble_seeds(const RunConfig& rc, int ensemble) {
  return Json{{"seed", rc.model.seed}, {"trajectories", ensemble}, {"first_trajectory", 0}};
}

Json vec_json(const std::vector<double>& xs) {
  Json j = Json::array();
  for (double x : xs) j.push_back(x);
  return j;
}

Json state_json(const PhaseState& s) {
  Json q = Json::array(), p = Json::array();
  for (const auto& v : s.positions) q.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  for (const auto& v : s.momenta) p.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return Json{{"time", s.time}, {"positions", q}, {"momenta", p}};
}

ExperimentReport make_report(std::string id, const RunConfig& rc) {
  ExperimentReport r;
  r.id = std::move(id);
  r.config = config_snapshot(rc);
  r.seeds = Json{{"seed", rc.model.seed}};
  r.thresholds = Json::object();
  r.metrics = Json::object();
  return r;
}

bool strictly_decreasing(const std::vector<double>& xs) {
  for (size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] < xs[i - 1])) return false;
  return true;
}

void require_non_increasing(const std::vector<double>& xs, const std::string& what) {
  if (xs.empty()) throw ConfigError(what + " must not be empty");
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0)) throw ConfigError(what + " entries must be positive");
    if (i > 0 && xs[i] > xs[i - 1]) throw ConfigError(what + " must be listed in descending order");
  }
}

// Smallest dyadic refinement of base_dt not exceeding target.
int level_for(double base_dt, double target) {
  int level = 0;
  while (base_dt / std::ldexp(1.0, level) > target * (1.0 + 1e-12)) {
    if (++level > NoiseStream::kMaxLevel) throw ConfigError("time step refinement too deep");
  }
  return level;
}

}  // namespace

Json ExperimentReport::to_json(bool include_wall_clock) const {
  Json j;
  j["id"] = id;
  j["pass"] = pass;
  j["seeds"] = seeds;
  j["thresholds"] = thresholds;
  j["metrics"] = metrics;
  j["config"] = config;
  if (include_wall_clock) j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

std::string ExperimentReport::dump(bool include_wall_clock) const {
  return to_json(include_wall_clock).dump(2) + "\n";
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(x.begin(), x.begin() + n, 0.0) / n;
  const double my = std::accumulate(y.begin(), y.begin() + n, 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

Json to_json(const DriftCertificate& c) {
  Json attempts = Json::array();
  for (const auto& a : c.attempts) attempts.push_back(Json{{"eps1", a.eps1}, {"c", a.c}});
  const auto& p = c.plan;
  return Json{{"lyapunov", std::string(to_string(c.kind))},
              {"alpha", c.alpha},
              {"power", c.power},
              {"valid", c.valid},
              {"trivial", c.trivial},
              {"c", c.c},
              {"C", c.C},
              {"C0", c.C0},
              {"V0", c.V0},
              {"max_residual", c.max_residual},
              {"sample_count", c.sample_count},
              {"core_count", c.core_count},
              {"eps1", c.eps1},
              {"kappa", c.kappa},
              {"A1", c.A1},
              {"A2", c.A2},
              {"attempts", attempts},
              {"plan",
               {{"q_min", p.q_min},
                {"q_max", p.q_max},
                {"q_count", p.q_count},
                {"p_min", p.p_min},
                {"p_max", p.p_max},
                {"p_count", p.p_count},
                {"directions", p.directions},
                {"near_collision", vec_json(p.near_collision)},
                {"core_quantile", p.core_quantile},
                {"seed", p.seed}}}};
}

Json to_json(const AuditReport& a) {
  Json ineqs = Json::array();
  for (const auto& q : a.inequalities) {
    Json bins = Json::array();
    for (const auto& b : q.bins)
      bins.push_back(Json{{"r_lo", b.r_lo}, {"r_hi", b.r_hi}, {"checked", b.checked},
                          {"violations", b.violations}});
    ineqs.push_back(Json{{"name", q.name},
                         {"checked", q.checked},
                         {"violations", q.violations},
                         {"worst_relative_slack", q.worst_relative_slack},
                         {"worst_radius", q.worst_radius},
                         {"violating_radii", vec_json(q.violating_radii)},
                         {"bins", bins}});
  }
  const auto& c = a.constants;
  return Json{{"dimension", a.dimension},
              {"sample_count", a.sample_count},
              {"r_min", a.r_min},
              {"r_max", a.r_max},
              {"seed", a.seed},
              {"constants",
               {{"lambda", c.lambda}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"a1", c.a1},
                {"a2", c.a2}, {"a3", c.a3}, {"a4", c.a4}, {"a5", c.a5}, {"a6", c.a6},
                {"gamma_lo", c.gamma_lo}, {"gamma_hi", c.gamma_hi}}},
              {"min_U", a.min_U},
              {"min_G", a.min_G},
              {"total_violations", a.total_violations()},
              {"inequalities", ineqs}};
}

Json to_json(const DistanceReport& d) {
  return Json{{"statistic", d.statistic == DistanceReport::Statistic::kolmogorov_smirnov
                                ? "kolmogorov_smirnov"
                                : "moment_gap"},
              {"value", d.value},
              {"sample_count", d.sample_count},
              {"reference", d.reference}};
}

LyapunovKind resolve_lyapunov_kind(const RunConfig& rc) {
  const std::string& name = rc.experiment.lyapunov;
  if (name == "classical") return LyapunovKind::classical;
  if (name == "relativistic_single") return LyapunovKind::relativistic_single;
  if (name == "relativistic_multi") return LyapunovKind::relativistic_multi;
  if (name != "auto") throw ConfigError("unknown Lyapunov function '" + name + "'");
  switch (rc.model.kind) {
    case ModelKind::classical:
      return LyapunovKind::classical;
    case ModelKind::relativistic:
      return rc.model.particle_count == 1 ? LyapunovKind::relativistic_single
                                          : LyapunovKind::relativistic_multi;
    default:
      throw KindError("no Lyapunov function for model kind " + std::string(to_string(rc.model.kind)));
  }
}

namespace {

DriftCertificate certify(const RunConfig& rc) {
  const LyapunovKind kind = resolve_lyapunov_kind(rc);
  const auto& e = rc.experiment;
  const double alpha =
      std::isnan(e.alpha) ? default_alpha(kind, e.lyapunov_params.power) : e.alpha;
  return certify_drift(kind, rc.model, rc.specs, alpha, e.plan, e.lyapunov_params);
}

void check_initial(const RunConfig& rc) {
  if (auto v = validate_state(rc.initial, rc.model))
    throw ConfigError("initial state is invalid: " + v->message);
}

}  // namespace

ExperimentReport run_simulate(const RunConfig& rc, std::ostream* timeseries) {
  const auto t0 = Clock::now();
  check_initial(rc);
  ExperimentReport rep = make_report("simulate", rc);
  rep.seeds = ensemble_seeds(rc, 1);

  std::vector<std::pair<std::string, ScalarFn>> extra;
  try {
    (void)hamiltonian(rc.initial, rc.specs.potential, rc.model);
    extra.emplace_back("hamiltonian", [&rc](const PhaseState& s) {
      return hamiltonian(s, rc.specs.potential, rc.model);
    });
  } catch (const KindError&) {
  }
  std::unique_ptr<TimeSeriesWriter> writer;
  std::vector<Observer*> observers;
  if (timeseries) {
    writer = std::make_unique<TimeSeriesWriter>(*timeseries, rc.experiment.timeseries_stride, extra);
    observers.push_back(writer.get());
  }
  ExitTimeRecorder exit_time(10.0);
  observers.push_back(&exit_time);

  rep.thresholds = Json{{"collision_rejections", 0}};
  try {
    const auto sum = simulate(rc.initial, rc.model, rc.specs, rc.experiment.horizon, observers, 0);
    rep.metrics = Json{{"steps", sum.steps},
                       {"substepped_steps", sum.substepped_steps},
                       {"collision_rejections", sum.collision_rejections},
                       {"horizon", sum.horizon},
                       {"exit_time_radius_10", exit_time.exit_time()},
                       {"rows_written", writer ? writer->rows() : 0},
                       {"final_state", state_json(sum.final_state)}};
    rep.pass = sum.collision_rejections == 0;
  } catch (const SimulationAborted& a) {
    rep.metrics = Json{{"aborted", true},
                       {"reason", a.what()},
                       {"step", a.step},
                       {"state", state_json(a.state)},
                       {"rows_written", writer ? writer->rows() : 0}};
    rep.pass = false;
  }
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_ergodicity(const RunConfig& rc) {
  const auto t0 = Clock::now();
  check_initial(rc);
  const auto& cfg = rc.model;
  const auto& e = rc.experiment;
  const bool relativistic = cfg.kind == ModelKind::relativistic;
  if (cfg.kind != ModelKind::classical && !relativistic)
    throw ConfigError("ergodicity needs the classical or relativistic model");
  if (e.checkpoints.empty()) throw ConfigError("experiment.checkpoints must not be empty");
  for (size_t i = 0; i < e.checkpoints.size(); ++i)
    if (!(e.checkpoints[i] > 0.0 && e.checkpoints[i] <= 1.0) ||
        (i > 0 && !(e.checkpoints[i] > e.checkpoints[i - 1])))
      throw ConfigError("experiment.checkpoints must increase within (0, 1]");

  const int n = cfg.particle_count, d = cfg.dimension;
  const std::int64_t steps = step_count(e.horizon, cfg.dt);
  const auto burn = static_cast<std::int64_t>(std::floor(e.burn_in_fraction * steps));

  // Marginal tested: every velocity component (classical), the momentum
  // (relativistic, d = 1) or the speed |p_i| (relativistic, d > 1).
  const bool speed = relativistic && d > 1;
  SeriesSampler::Extractor extract = [n, d, speed](const PhaseState& s, std::vector<double>& out) {
    for (int i = 0; i < n; ++i) {
      if (speed) {
        out.push_back(s.momenta[i].norm());
      } else {
        for (int c = 0; c < d; ++c) out.push_back(s.momenta[i][c]);
      }
    }
  };

  struct Run {
    std::vector<std::vector<double>> series;
    TrajectorySummary summary;
    double exit_time = 0.0;
  };
  std::vector<Run> runs(e.ensemble);
  parallel_for(runs.size(), [&](std::size_t k) {
    SeriesSampler sampler(extract, burn, e.stride);
    ExitTimeRecorder exit_time(10.0);
    std::vector<Observer*> obs{&sampler, &exit_time};
    runs[k].summary = simulate(rc.initial, cfg, rc.specs, e.horizon, obs, k);
    runs[k].series = sampler.series();
    runs[k].exit_time = exit_time.exit_time();
  });

  std::vector<const std::vector<double>*> all;
  std::int64_t rejections = 0, substepped = 0;
  std::vector<double> exits;
  for (const auto& r : runs) {
    for (const auto& s : r.series) all.push_back(&s);
    rejections += r.summary.collision_rejections;
    substepped += r.summary.substepped_steps;
    exits.push_back(r.exit_time);
  }

  double ess = 0.0;
  for (const auto* s : all)
    if (s->size() >= 2) ess += effective_sample_size(*s);

  MeasureKind measure = relativistic ? MeasureKind{MaxwellJuttner{*cfg.epsilon}}
                                     : MeasureKind{GibbsBoltzmann{*cfg.mass}};
  auto distance = [&](std::vector<double> pooled) {
    if (!relativistic) {
      const double var = 1.0 / *cfg.mass;
      return ks_distance(std::move(pooled), [var](double x) { return gaussian_cdf(x, var); },
                         "gaussian(0, 1/m)");
    }
    const MeasureKind mk = measure;
    if (!speed)
      return ks_distance_density(
          std::move(pooled),
          [mk](double p) { return std::exp(momentum_log_weight(mk, std::abs(p))); },
          -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          "maxwell_juttner momentum (quadrature)");
    return ks_distance_density(
        std::move(pooled),
        [mk, d](double r) { return std::pow(r, d - 1) * std::exp(momentum_log_weight(mk, r)); },
        0.0, std::numeric_limits<double>::infinity(), "maxwell_juttner speed (quadrature)");
  };

  Json checkpoints = Json::array();
  std::vector<double> ks_values;
  std::vector<double> final_pool;
  for (double f : e.checkpoints) {
    std::vector<double> pooled;
    for (const auto* s : all) {
      const auto take = static_cast<size_t>(std::ceil(f * static_cast<double>(s->size()) - 1e-9));
      pooled.insert(pooled.end(), s->begin(), s->begin() + std::min(take, s->size()));
    }
    if (pooled.empty()) throw ConfigError("no samples after burn-in; increase experiment.horizon");
    if (f == e.checkpoints.back()) final_pool = pooled;
    const auto dist = distance(std::move(pooled));
    ks_values.push_back(dist.value);
    Json row = to_json(dist);
    row["fraction"] = f;
    checkpoints.push_back(row);
  }
  const double final_ks = ks_values.back();
  const bool decayed = ks_values.size() < 2 || final_ks < 0.5 * ks_values.front();

  ExperimentReport rep = make_report("ergodicity", rc);
  rep.seeds = ensemble_seeds(rc, e.ensemble);
  rep.thresholds = Json{{"ks_max", e.ks_threshold},
                        {"min_effective_samples", e.min_ess},
                        {"decay_factor", 0.5}};
  rep.metrics["measure"] = measure_name(measure);
  rep.metrics["marginal"] = relativistic ? (speed ? "speed" : "momentum") : "velocity components";
  rep.metrics["steps_per_trajectory"] = steps;
  rep.metrics["burn_in_steps"] = burn;
  rep.metrics["series"] = all.size();
  rep.metrics["samples"] = final_pool.size();
  rep.metrics["effective_samples"] = ess;
  rep.metrics["checkpoints"] = checkpoints;
  rep.metrics["final_ks"] = final_ks;
  rep.metrics["decayed"] = decayed;
  rep.metrics["collision_rejections"] = rejections;
  rep.metrics["substepped_steps"] = substepped;
  rep.metrics["exit_times_radius_10"] = vec_json(exits);
  if (e.attach_certificate) {
    const auto cert = certify(rc);
    rep.metrics["certificate"] = to_json(cert);
  }
  rep.pass = final_ks < e.ks_threshold && ess >= e.min_ess && decayed;

  if (!final_pool.empty()) {
    const auto [lo, hi] = std::minmax_element(final_pool.begin(), final_pool.end());
    const double pad = *hi > *lo ? 0.0 : 0.5;
    rep.histogram = histogram(final_pool, e.histogram_bins, *lo - pad, *hi + pad);
  }
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_small_mass(const RunConfig& rc) {
  const auto t0 = Clock::now();
  check_initial(rc);
  const auto& e = rc.experiment;
  if (rc.model.kind != ModelKind::classical)
    throw ConfigError("small-mass needs the classical model");
  if (rc.specs.diffusion.is_relativistic())
    throw ConfigError("small-mass needs a classical diffusion field");
  require_non_increasing(e.masses, "experiment.masses");

  const double base_dt = rc.model.dt;
  std::vector<ModelConfig> configs;
  std::vector<int> levels;
  for (double m : e.masses) {
    ModelConfig c = rc.model;
    c.mass = m;
    const int level = level_for(base_dt, e.dt_per_mass * m);
    c.dt = base_dt / std::ldexp(1.0, level);
    levels.push_back(level);
    configs.push_back(c);
  }
  const int finest = *std::max_element(levels.begin(), levels.end());
  ModelConfig od = rc.model;
  od.kind = ModelKind::overdamped;
  od.mass.reset();
  od.dt = base_dt / std::ldexp(1.0, finest);
  od.noise_induced_drift = true;
  ModelConfig control = od;
  control.noise_induced_drift = false;
  const int nm = static_cast<int>(e.masses.size());
  configs.push_back(od);
  configs.push_back(control);
  const std::vector<ModelSpecs> specs(configs.size(), rc.specs);

  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < nm; ++k) pairs.emplace_back(k, nm);
  pairs.emplace_back(nm - 1, nm + 1);

  std::vector<CoupledResult> results(e.ensemble);
  parallel_for(results.size(), [&](std::size_t k) {
    results[k] = coupled_simulate(rc.initial, configs, specs, e.horizon, pairs, k);
  });

  std::vector<double> medians;
  Json per_mass = Json::array();
  for (int k = 0; k < nm; ++k) {
    std::vector<double> sups;
    for (const auto& r : results) sups.push_back(r.distances[k].sup_q);
    medians.push_back(median(sups));
    per_mass.push_back(Json{{"mass", e.masses[k]},
                            {"dt", configs[k].dt},
                            {"median_sup_error", medians.back()},
                            {"sup_errors", vec_json(sups)}});
  }
  std::vector<double> control_sups;
  for (const auto& r : results) control_sups.push_back(r.distances[nm].sup_q);
  const double control_median = median(control_sups);
  const double ratio = control_median / medians.back();
  const bool decreasing = strictly_decreasing(medians);
  const bool sine = std::holds_alternative<SinePerturbedField>(rc.specs.diffusion.field);

  ExperimentReport rep = make_report("small-mass", rc);
  rep.seeds = ensemble_seeds(rc, e.ensemble);
  rep.thresholds = Json{{"strictly_decreasing", true},
                        {"control_ratio_min", e.control_ratio},
                        {"control_ratio_applies", sine}};
  rep.metrics["overdamped_dt"] = od.dt;
  rep.metrics["per_mass"] = per_mass;
  rep.metrics["strictly_decreasing"] = decreasing;
  rep.metrics["control_median_sup_error"] = control_median;
  rep.metrics["control_sup_errors"] = vec_json(control_sups);
  rep.metrics["control_ratio"] = ratio;
  rep.pass = decreasing && (!sine || ratio >= e.control_ratio);
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_newtonian(const RunConfig& rc) {
  const auto t0 = Clock::now();
  check_initial(rc);
  const auto& e = rc.experiment;
  if (base_kind(rc.model.kind) != ModelKind::relativistic)
    throw ConfigError("newtonian needs a relativistic model");
  require_non_increasing(e.epsilons, "experiment.epsilons");
  if (e.truncated && !rc.model.truncation_radius)
    throw ConfigError("truncated newtonian run needs truncation_radius");

  std::vector<ModelConfig> configs;
  for (double eps : e.epsilons) {
    ModelConfig c = rc.model;
    c.kind = e.truncated ? ModelKind::relativistic_truncated : ModelKind::relativistic;
    c.epsilon = eps;
    if (!e.truncated) c.truncation_radius.reset();
    configs.push_back(c);
  }
  ModelConfig limit = rc.model;
  limit.kind = e.truncated ? ModelKind::classical_limit_truncated : ModelKind::classical_limit;
  limit.epsilon.reset();
  if (!e.truncated) limit.truncation_radius.reset();
  const int ne = static_cast<int>(e.epsilons.size());
  configs.push_back(limit);
  const std::vector<ModelSpecs> specs(configs.size(), rc.specs);
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < ne; ++k) pairs.emplace_back(k, ne);

  std::vector<CoupledResult> results(e.ensemble);
  parallel_for(results.size(), [&](std::size_t k) {
    results[k] = coupled_simulate(rc.initial, configs, specs, e.horizon, pairs, k);
  });

  std::vector<double> med_sq, med_abs, log_eps, log_sq, log_abs;
  Json per_eps = Json::array();
  for (int k = 0; k < ne; ++k) {
    std::vector<double> sq, ab;
    for (const auto& r : results) {
      sq.push_back(r.distances[k].sup_sq);
      ab.push_back(std::sqrt(r.distances[k].sup_sq));
    }
    med_sq.push_back(median(sq));
    med_abs.push_back(median(ab));
    per_eps.push_back(Json{{"epsilon", e.epsilons[k]},
                           {"median_sup_sq_error", med_sq.back()},
                           {"median_sup_error", med_abs.back()},
                           {"sup_sq_errors", vec_json(sq)}});
    if (med_sq.back() > 0.0 && std::isfinite(med_sq.back())) {
      log_eps.push_back(std::log(e.epsilons[k]));
      log_sq.push_back(std::log(med_sq.back()));
      log_abs.push_back(std::log(med_abs.back()));
    }
  }
  const double slope = least_squares_slope(log_eps, log_sq);
  const double slope_abs = least_squares_slope(log_eps, log_abs);
  const bool degenerate = std::isnan(slope);
  const bool decreasing = strictly_decreasing(med_sq);

  ExperimentReport rep = make_report("newtonian", rc);
  rep.seeds = ensemble_seeds(rc, e.ensemble);
  rep.metrics["mode"] = e.truncated ? "truncated" : "untruncated";
  rep.metrics["per_epsilon"] = per_eps;
  rep.metrics["degenerate_sweep"] = degenerate;
  rep.metrics["strictly_decreasing"] = decreasing;
  rep.metrics["slope_sup_sq"] = degenerate ? Json(nullptr) : Json(slope);
  rep.metrics["slope_sup"] = std::isnan(slope_abs) ? Json(nullptr) : Json(slope_abs);
  if (e.truncated) {
    rep.thresholds = Json{{"slope_lo", e.slope_lo}, {"slope_hi", e.slope_hi}};
    rep.pass = !degenerate && slope >= e.slope_lo && slope <= e.slope_hi;
  } else {
    rep.thresholds = Json{{"strictly_decreasing", true}};
    rep.pass = !degenerate && decreasing;
  }
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_gamma3_band(const RunConfig& rc) {
  const auto t0 = Clock::now();
  check_initial(rc);
  const auto& e = rc.experiment;
  if (rc.model.kind != ModelKind::relativistic || rc.model.particle_count != 1)
    throw ConfigError("gamma3 band needs the relativistic model with one particle");
  if (e.epsilons.empty()) throw ConfigError("experiment.epsilons must not be empty");

  std::vector<double> means;
  Json per_eps = Json::array();
  for (double eps : e.epsilons) {
    ModelConfig c = rc.model;
    c.epsilon = eps;
    std::vector<double> sups(e.ensemble);
    parallel_for(sups.size(), [&](std::size_t k) {
      RunningMax rm([&](const PhaseState& s) { return gamma3(s, rc.specs.potential, eps); });
      std::vector<Observer*> obs{&rm};
      simulate(rc.initial, c, rc.specs, e.horizon, obs, k);
      sups[k] = rm.value();
    });
    means.push_back(std::accumulate(sups.begin(), sups.end(), 0.0) / sups.size());
    per_eps.push_back(Json{{"epsilon", eps}, {"mean_sup_gamma3", means.back()},
                           {"sup_gamma3", vec_json(sups)}});
  }
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  const double ratio = *hi / *lo;

  ExperimentReport rep = make_report("gamma3-band", rc);
  rep.seeds = ensemble_seeds(rc, e.ensemble);
  rep.thresholds = Json{{"band_factor", e.band_factor}};
  rep.metrics["per_epsilon"] = per_eps;
  rep.metrics["max_over_min"] = ratio;
  rep.pass = ratio < e.band_factor;
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Appendix inequalities

double lemma_a3_lhs(const std::vector<Vec>& x, double gamma, double s) {
  const int n = static_cast<int>(x.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec a = Vec::Zero(x[i].size()), b = Vec::Zero(x[i].size());
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec r = x[i] - x[j];
      const double len = r.norm();
      a += r / std::pow(len, gamma);
      b += r / std::pow(len, s + 1.0);
    }
    total += a.dot(b);
  }
  return total;
}

double lemma_a1_lhs(const std::vector<Vec>& x, double s) { return lemma_a3_lhs(x, 1.0, s); }

double lemma_a2_lhs(const std::vector<Vec>& x, double s) {
  return lemma_a3_lhs(x, s + 1.0, s);
}

double inverse_power_sum(const std::vector<Vec>& x, double t) {
  double total = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = i + 1; j < x.size(); ++j) total += std::pow((x[i] - x[j]).norm(), -t);
  return total;
}

NablaGBounds nabla_g_bounds(const PotentialSpec& spec, int particle_count) {
  if (!std::holds_alternative<LogRepulsive>(spec.pair) &&
      !std::holds_alternative<PowerRepulsive>(spec.pair))
    throw KindError("gradient sandwich constants need a log or inverse-power pair");
  if (particle_count < 2) throw ConfigError("gradient sandwich needs at least two particles");
  const double a4 = spec.constants.a4;
  const double n = particle_count;
  return {2.0 * a4 * a4 / (n * (n - 1.0) * (n - 1.0)), 0.0, a4 * a4 * (n - 1.0), 0.0};
}

namespace {

double relative_slack(double lhs, double rhs) {
  return (lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

// Accumulates one inequality lhs >= rhs per call.
class Tally {
 public:
  Tally(std::string name, double tol) : tol_(tol) { s_.name = std::move(name); }
  void trial(bool ok) {
    ++s_.trials;
    if (!ok) ++s_.violations;
  }
  // true when lhs >= rhs within the relative tolerance
  bool holds(double lhs, double rhs) {
    const double slack = relative_slack(lhs, rhs);
    s_.worst_relative_slack = first_ ? slack : std::min(s_.worst_relative_slack, slack);
    first_ = false;
    return slack >= -tol_;
  }
  const LemmaSummary& summary() const { return s_; }

 private:
  LemmaSummary s_;
  double tol_;
  bool first_ = true;
};

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Vec random_direction(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> z;
  Vec v(d);
  do {
    for (int c = 0; c < d; ++c) v[c] = z(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Chain of points whose consecutive separations are log-uniform in
// [1e-6, 1e3]; in d = 1 the chain is ordered.
std::vector<Vec> random_configuration(std::mt19937_64& rng, int n, int d) {
  std::vector<Vec> x(n, Vec::Zero(d));
  for (int i = 1; i < n; ++i) {
    const double r = log_uniform(rng, 1e-6, 1e3);
    x[i] = x[i - 1] + r * (d == 1 ? Vec::Ones(1) : random_direction(rng, d));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!((x[i] - x[j]).norm() > 0.0)) return random_configuration(rng, n, d);
  return x;
}

}  // namespace

std::vector<LemmaSummary> lemma_trials(std::uint64_t seed, long trials, double tol,
                                       double* consistency_gap) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_n(2, 6), pick_d(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Tally a1("lemma_A1", tol), a2i("lemma_A2_i", tol), a2ii("lemma_A2_ii", tol),
      a3("lemma_A3", tol), ng("grad_G_sandwich", tol), sb("truncated_spectral_bound", tol),
      qv("gamma3_quadratic_variation", tol);
  double gap = 0.0;

  for (long t = 0; t < trials; ++t) {
    const int n = pick_n(rng), d = pick_d(rng);
    const auto x = random_configuration(rng, n, d);

    const double s1 = 4.0 * unit(rng);
    const double l1 = lemma_a1_lhs(x, s1);
    a1.trial(a1.holds(l1, 2.0 * inverse_power_sum(x, s1)));
    const double a3_at_one = lemma_a3_lhs(x, 1.0, s1);
    gap = std::max(gap, std::abs(a3_at_one - l1) / std::max(std::abs(l1), 1e-300));

    const double s2 = 4.0 * unit(rng);
    a2i.trial(a2i.holds(lemma_a2_lhs(x, s2),
                        4.0 / (n * (n - 1.0) * (n - 1.0)) * inverse_power_sum(x, 2.0 * s2)));

    const double s3 = unit(rng);
    a2ii.trial(a2ii.holds(lemma_a2_lhs(x, s3), 2.0 * inverse_power_sum(x, 2.0 * s3)));

    const double gamma = 1.0 - unit(rng);  // (0, 1]
    const double s4 = 4.0 * unit(rng);
    a3.trial(a3.holds(lemma_a3_lhs(x, gamma, s4), 2.0 * inverse_power_sum(x, s4 + gamma - 1.0)));

    // gradient sandwich for a random log or inverse-power pair
    {
      const double k = log_uniform(rng, 0.1, 10.0);
      PairPotential pair = LogRepulsive{k};
      if (unit(rng) < 0.5) pair = PowerRepulsive{k, 1.0 + 2.0 * (1.0 - unit(rng))};
      const auto spec = PotentialSpec::make(PolyConfining{1.0, 1.0}, pair);
      const auto b = nabla_g_bounds(spec, n);
      double lhs = 0.0;
      for (int i = 0; i < n; ++i) {
        Vec f = Vec::Zero(d);
        for (int j = 0; j < n; ++j)
          if (j != i) f += grad_G(spec, x[i] - x[j]);
        lhs += f.squaredNorm();
      }
      const double sum = 2.0 * inverse_power_sum(x, 2.0 * spec.constants.beta1);
      const bool lower = ng.holds(lhs, b.a7 * sum - b.a8);
      const bool upper = ng.holds(b.a9 * sum + b.a10, lhs);
      ng.trial(lower && upper);
    }

    // spectral bounds of the truncated friction matrix
    {
      const double eps = log_uniform(rng, 1e-6, 1.0);
      const double radius = 1.0 + 9.0 * unit(rng);
      const double speed = unit(rng) < 0.5 ? 2.0 * (radius + 1.0) * unit(rng)
                                           : log_uniform(rng, 1e-3, 1e3);
      const Vec p = speed * random_direction(rng, d);
      DiffusionSpec spec{RelativisticFriction{eps}};
      const auto tr = truncated_d(spec, p, radius);
      Eigen::SelfAdjointEigenSolver<Mat> em(tr.m);
      const double top_m = em.eigenvalues().maxCoeff();
      // Eigenvalues of sqrt(M) - I in closed form: sqrt(1 + theta (s^{-1/2} - 1))
      // across p and sqrt(1 + theta (s^{1/2} - 1)) along p, s = 1 + eps |p|^2.
      // expm1/log1p keep them accurate when eps |p|^2 is tiny.
      const double th = theta_r(speed, radius);
      const double x2 = eps * speed * speed;
      const double across = std::expm1(0.5 * std::log1p(th * std::expm1(-0.5 * std::log1p(x2))));
      const double along = std::expm1(0.5 * std::log1p(th * std::expm1(0.5 * std::log1p(x2))));
      const double top_r = std::max(d > 1 ? across * across : 0.0, along * along);
      const bool first = sb.holds(1.0 + 2.0 * eps * radius * radius, top_m);
      const double cap = std::min(0.25 * eps * eps * radius * radius * speed * speed,
                                  eps * eps * std::pow(radius, 4));
      const bool second = sb.holds(cap, top_r);
      sb.trial(first && second);
    }

    // pointwise quadratic-variation bound of M_5, epsilon <= 1
    {
      const double eps = log_uniform(rng, 1e-6, 1.0);
      const double lambda = 1.0 + 2.0 * unit(rng);
      const double scale = log_uniform(rng, 0.1, 10.0);
      PairPotential pair = NoPair{};
      if (unit(rng) < 0.5) pair = PowerRepulsive{log_uniform(rng, 0.1, 10.0), 1.0 + (1.0 - unit(rng))};
      const auto spec = PotentialSpec::make(PolyConfining{lambda, scale}, pair);
      PhaseState st = PhaseState::zeros(1, d);
      st.positions[0] = log_uniform(rng, 1e-3, 1e2) * random_direction(rng, d);
      st.momenta[0] = log_uniform(rng, 1e-3, 1e3) * random_direction(rng, d);
      const Vec& q = st.positions[0];
      const Vec& p = st.momenta[0];
      double phi = eval_U(spec, q);
      if (spec.has_pair()) phi += eval_G(spec, q);
      const double rs = std::sqrt(1.0 + eps * p.squaredNorm());
      const Vec v = (phi * eps / rs + 1.0) * p;
      const Vec noise = std::sqrt(2.0) * relativistic_sqrt_d(eps, p).apply(p, v);
      const double g3 = gamma3(st, spec, eps);
      qv.trial(qv.holds(8.0 * std::sqrt(2.0) * (std::pow(g3, 1.5) + g3), noise.squaredNorm()));
    }
  }
  if (consistency_gap) *consistency_gap = gap;
  return {a1.summary(), a2i.summary(), a2ii.summary(), a3.summary(),
          ng.summary(), sb.summary(),  qv.summary()};
}

ExperimentReport run_lemma_suite(const RunConfig& rc) {
  const auto t0 = Clock::now();
  const auto& e = rc.experiment;
  double gap = 0.0;
  const auto rows = lemma_trials(rc.model.seed, e.trials, e.lemma_tolerance, &gap);

  ExperimentReport rep = make_report("lemmas", rc);
  rep.seeds = Json{{"seed", rc.model.seed}, {"trials_per_lemma", e.trials}};
  rep.thresholds = Json{{"relative_tolerance", e.lemma_tolerance},
                        {"violations", 0},
                        {"a3_a1_consistency_max", 1e-12}};
  Json lemmas = Json::array();
  long total = 0;
  for (const auto& r : rows) {
    total += r.violations;
    lemmas.push_back(Json{{"name", r.name},
                          {"trials", r.trials},
                          {"violations", r.violations},
                          {"worst_relative_slack", r.worst_relative_slack}});
  }
  rep.metrics["lemmas"] = lemmas;
  rep.metrics["total_violations"] = total;
  rep.metrics["a3_a1_consistency_gap"] = gap;
  rep.pass = total == 0 && gap <= 1e-12;
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_certify_drift(const RunConfig& rc) {
  const auto t0 = Clock::now();
  ExperimentReport rep = make_report("certify-drift", rc);
  const auto cert = certify(rc);
  rep.seeds = Json{{"plan_seed", rc.experiment.plan.seed}};
  rep.thresholds = Json{{"c_min_exclusive", 0.0}};
  rep.metrics["certificate"] = to_json(cert);
  rep.pass = cert.valid;
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_audit(const RunConfig& rc) {
  const auto t0 = Clock::now();
  const auto& e = rc.experiment;
  ExperimentReport rep = make_report("audit-potentials", rc);
  const auto audit = audit_assumptions(rc.specs.potential, rc.model.dimension, e.audit_samples,
                                       e.audit_r_min, e.audit_r_max, rc.model.seed);
  rep.thresholds = Json{{"violations", 0}, {"relative_tolerance", 1e-12}};
  rep.metrics["audit"] = to_json(audit);
  rep.pass = audit.total_violations() == 0;
  rep.wall_clock_seconds = seconds_since(t0);
  return rep;
}

}  // namespace langevin
