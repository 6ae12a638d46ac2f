#include "langevin/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

// Reads keys and remembers which were consumed so leftovers can be reported.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  double num(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return to_double(key, str(key, ""));
  }

  std::optional<double> opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return num(key, 0.0);
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const std::string v = str(key, "");
    try {
      size_t pos = 0;
      const long x = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
    }
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string v = str(key, "");
    try {
      size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      const auto x = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = str(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
  }

  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(str(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(to_double(key, item));
    }
    return out;
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) unknown.push_back(k);
    if (unknown.empty()) return;
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

 private:
  static double to_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
    }
  }

  const KeyValues& kv_;
  std::set<std::string> used_;
};

std::vector<Vec> unflatten(const std::vector<double>& flat, int n, int d, const std::string& key) {
  if (static_cast<int>(flat.size()) != n * d)
    throw ConfigError("key '" + key + "' needs particle_count * dimension = " +
                      std::to_string(n * d) + " entries");
  std::vector<Vec> out(n, Vec::Zero(d));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) out[i][c] = flat[i * d + c];
  return out;
}

std::vector<double> flatten(const std::vector<Vec>& vs) {
  std::vector<double> out;
  for (const auto& v : vs)
    for (int c = 0; c < v.size(); ++c) out.push_back(v[c]);
  return out;
}

}  // namespace

PhaseState default_initial_state(int particle_count, int dimension) {
  PhaseState s = PhaseState::zeros(particle_count, dimension);
  for (int i = 0; i < particle_count; ++i) s.positions[i][0] = i - 0.5 * (particle_count - 1);
  return s;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
  }
  return kv;
}

RunConfig run_config_from(const KeyValues& kv) {
  Reader r(kv);
  RunConfig rc;
  ModelConfig& m = rc.model;

  const std::string kind = r.str("kind", "classical");
  const auto parsed = parse_model_kind(kind);
  if (!parsed) throw ConfigError("unknown model kind '" + kind + "'");
  m.kind = *parsed;
  m.mass = r.opt("mass");
  m.epsilon = r.opt("epsilon");
  m.truncation_radius = r.opt("truncation_radius");
  m.dimension = static_cast<int>(r.integer("dimension", 1));
  m.particle_count = static_cast<int>(r.integer("particle_count", 1));
  m.dt = r.num("dt", 1e-3);
  m.seed = r.u64("seed", 0);
  m.collision_guard = r.num("collision_guard", 1e-10);
  m.noise_induced_drift = r.flag("noise_induced_drift", true);
  m.validate();

  PolyConfining conf{r.num("potential.lambda", 1.0), r.num("potential.scale", 1.0)};
  const std::string pair = r.str("potential.pair", "none");
  PairPotential pp;
  if (pair == "none") {
    pp = NoPair{};
  } else if (pair == "log") {
    pp = LogRepulsive{r.num("potential.k", 1.0)};
  } else if (pair == "power") {
    pp = PowerRepulsive{r.num("potential.k", 1.0), r.num("potential.beta1", 2.0)};
  } else if (pair == "lennard_jones") {
    pp = LennardJones{r.num("potential.A", 1.0), r.num("potential.B", 1.0)};
  } else {
    throw ConfigError("unknown pair potential '" + pair + "'");
  }
  rc.specs.potential = PotentialSpec::make(conf, pp);

  const std::string dk = r.str("diffusion.kind", "constant");
  if (dk == "constant") {
    rc.specs.diffusion.field = ConstantField{r.num("diffusion.gamma", 1.0)};
  } else if (dk == "sine") {
    SinePerturbedField f;
    f.gamma0 = r.num("diffusion.gamma0", 2.0);
    f.amplitude = r.num("diffusion.amplitude", 1.0);
    const auto wv = r.list("diffusion.wavevector", {});
    if (wv.empty()) {
      f.wavevector = Vec::Unit(m.dimension, 0);
    } else {
      f.wavevector = Vec::Zero(static_cast<int>(std::min<size_t>(wv.size(), kMaxDim)));
      for (int c = 0; c < f.wavevector.size(); ++c) f.wavevector[c] = wv[c];
    }
    rc.specs.diffusion.field = f;
  } else if (dk == "relativistic") {
    rc.specs.diffusion.field = RelativisticFriction{r.num("diffusion.epsilon", m.epsilon.value_or(1.0))};
  } else {
    throw ConfigError("unknown diffusion kind '" + dk + "'");
  }

  auto& c = rc.specs.potential.constants;
  if (!rc.specs.diffusion.is_relativistic()) {
    if (rc.specs.diffusion.problems(m.dimension).empty()) {
      const auto [lo, hi] = ellipticity_bounds(rc.specs.diffusion);
      c.gamma_lo = lo;
      c.gamma_hi = hi;
    }
  }
  c.lambda = r.num("constants.lambda", c.lambda);
  c.beta1 = r.num("constants.beta1", c.beta1);
  c.beta2 = r.num("constants.beta2", c.beta2);
  c.a1 = r.num("constants.a1", c.a1);
  c.a2 = r.num("constants.a2", c.a2);
  c.a3 = r.num("constants.a3", c.a3);
  c.a4 = r.num("constants.a4", c.a4);
  c.a5 = r.num("constants.a5", c.a5);
  c.a6 = r.num("constants.a6", c.a6);
  c.gamma_lo = r.num("constants.gamma_lo", c.gamma_lo);
  c.gamma_hi = r.num("constants.gamma_hi", c.gamma_hi);

  const auto problems = model_problems(m, rc.specs);
  if (!problems.empty()) {
    std::string msg = "invalid model:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }

  rc.initial = default_initial_state(m.particle_count, m.dimension);
  if (r.has("initial.positions"))
    rc.initial.positions = unflatten(r.list("initial.positions", {}), m.particle_count, m.dimension,
                                     "initial.positions");
  if (r.has("initial.momenta"))
    rc.initial.momenta = unflatten(r.list("initial.momenta", {}), m.particle_count, m.dimension,
                                   "initial.momenta");

  ExperimentParams& e = rc.experiment;
  const ExperimentParams def;
  e.horizon = r.num("experiment.horizon", def.horizon);
  e.ensemble = static_cast<int>(r.integer("experiment.ensemble", def.ensemble));
  e.burn_in_fraction = r.num("experiment.burn_in_fraction", def.burn_in_fraction);
  e.stride = static_cast<int>(r.integer("experiment.stride", def.stride));
  e.checkpoints = r.list("experiment.checkpoints", def.checkpoints);
  e.ks_threshold = r.num("experiment.ks_threshold", def.ks_threshold);
  e.min_ess = r.num("experiment.min_ess", def.min_ess);
  e.attach_certificate = r.flag("experiment.attach_certificate", def.attach_certificate);
  e.masses = r.list("experiment.masses", def.masses);
  e.dt_per_mass = r.num("experiment.dt_per_mass", def.dt_per_mass);
  e.control_ratio = r.num("experiment.control_ratio", def.control_ratio);
  e.epsilons = r.list("experiment.epsilons", def.epsilons);
  e.truncated = r.flag("experiment.truncated", def.truncated);
  e.slope_lo = r.num("experiment.slope_lo", def.slope_lo);
  e.slope_hi = r.num("experiment.slope_hi", def.slope_hi);
  e.band_factor = r.num("experiment.band_factor", def.band_factor);
  e.trials = r.integer("experiment.trials", def.trials);
  e.lemma_tolerance = r.num("experiment.lemma_tolerance", def.lemma_tolerance);
  e.lyapunov = r.str("experiment.lyapunov", def.lyapunov);
  e.alpha = r.num("experiment.alpha", def.alpha);
  auto& lp = e.lyapunov_params;
  lp.eps1 = r.num("experiment.eps1", lp.eps1);
  lp.kappa = r.num("experiment.kappa", lp.kappa);
  lp.A1 = r.num("experiment.A1", lp.A1);
  lp.A2 = r.num("experiment.A2", lp.A2);
  lp.power = static_cast<int>(r.integer("experiment.power", lp.power));
  auto& pl = e.plan;
  pl.q_min = r.num("experiment.plan.q_min", pl.q_min);
  pl.q_max = r.num("experiment.plan.q_max", pl.q_max);
  pl.q_count = static_cast<int>(r.integer("experiment.plan.q_count", pl.q_count));
  pl.p_min = r.num("experiment.plan.p_min", pl.p_min);
  pl.p_max = r.num("experiment.plan.p_max", pl.p_max);
  pl.p_count = static_cast<int>(r.integer("experiment.plan.p_count", pl.p_count));
  pl.directions = static_cast<int>(r.integer("experiment.plan.directions", pl.directions));
  pl.near_collision = r.list("experiment.plan.near_collision", pl.near_collision);
  pl.core_quantile = r.num("experiment.plan.core_quantile", pl.core_quantile);
  pl.seed = r.u64("experiment.plan.seed", pl.seed);
  e.audit_samples = r.integer("experiment.audit_samples", def.audit_samples);
  e.audit_r_min = r.num("experiment.audit_r_min", def.audit_r_min);
  e.audit_r_max = r.num("experiment.audit_r_max", def.audit_r_max);
  e.timeseries_stride = static_cast<int>(r.integer("experiment.timeseries_stride", def.timeseries_stride));
  e.histogram_bins = static_cast<int>(r.integer("experiment.histogram_bins", def.histogram_bins));

  if (!(e.horizon >= 0.0)) throw ConfigError("experiment.horizon must be >= 0");
  if (e.ensemble < 1) throw ConfigError("experiment.ensemble must be >= 1");
  if (e.stride < 1) throw ConfigError("experiment.stride must be >= 1");
  if (!(e.burn_in_fraction >= 0.0 && e.burn_in_fraction < 1.0))
    throw ConfigError("experiment.burn_in_fraction must lie in [0, 1)");
  if (e.trials < 1) throw ConfigError("experiment.trials must be >= 1");

  r.finish();
  return rc;
}

RunConfig parse_run_config(const std::string& text) { return run_config_from(parse_key_values(text)); }

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

KeyValues to_key_values(const RunConfig& rc) {
  KeyValues kv;
  const auto& m = rc.model;
  kv["kind"] = std::string(to_string(m.kind));
  if (m.mass) kv["mass"] = fmt(*m.mass);
  if (m.epsilon) kv["epsilon"] = fmt(*m.epsilon);
  if (m.truncation_radius) kv["truncation_radius"] = fmt(*m.truncation_radius);
  kv["dimension"] = std::to_string(m.dimension);
  kv["particle_count"] = std::to_string(m.particle_count);
  kv["dt"] = fmt(m.dt);
  kv["seed"] = std::to_string(m.seed);
  kv["collision_guard"] = fmt(m.collision_guard);
  kv["noise_induced_drift"] = m.noise_induced_drift ? "true" : "false";

  const auto& pot = rc.specs.potential;
  kv["potential.lambda"] = fmt(pot.confining.lambda);
  kv["potential.scale"] = fmt(pot.confining.scale);
  kv["potential.pair"] = pair_name(pot.pair);
  if (const auto* p = std::get_if<LogRepulsive>(&pot.pair)) kv["potential.k"] = fmt(p->k);
  if (const auto* p = std::get_if<PowerRepulsive>(&pot.pair)) {
    kv["potential.k"] = fmt(p->k);
    kv["potential.beta1"] = fmt(p->beta1);
  }
  if (const auto* p = std::get_if<LennardJones>(&pot.pair)) {
    kv["potential.A"] = fmt(p->a);
    kv["potential.B"] = fmt(p->b);
  }
  const auto& c = pot.constants;
  kv["constants.lambda"] = fmt(c.lambda);
  kv["constants.beta1"] = fmt(c.beta1);
  kv["constants.beta2"] = fmt(c.beta2);
  kv["constants.a1"] = fmt(c.a1);
  kv["constants.a2"] = fmt(c.a2);
  kv["constants.a3"] = fmt(c.a3);
  kv["constants.a4"] = fmt(c.a4);
  kv["constants.a5"] = fmt(c.a5);
  kv["constants.a6"] = fmt(c.a6);
  kv["constants.gamma_lo"] = fmt(c.gamma_lo);
  kv["constants.gamma_hi"] = fmt(c.gamma_hi);

  const auto& diff = rc.specs.diffusion;
  kv["diffusion.kind"] = diff.name();
  if (const auto* f = std::get_if<ConstantField>(&diff.field)) kv["diffusion.gamma"] = fmt(f->gamma);
  if (const auto* f = std::get_if<SinePerturbedField>(&diff.field)) {
    kv["diffusion.gamma0"] = fmt(f->gamma0);
    kv["diffusion.amplitude"] = fmt(f->amplitude);
    kv["diffusion.wavevector"] = fmt_list(std::vector<double>(f->wavevector.data(), f->wavevector.data() + f->wavevector.size()));
  }
  if (const auto* f = std::get_if<RelativisticFriction>(&diff.field))
    kv["diffusion.epsilon"] = fmt(f->epsilon);

  kv["initial.positions"] = fmt_list(flatten(rc.initial.positions));
  kv["initial.momenta"] = fmt_list(flatten(rc.initial.momenta));

  const auto& e = rc.experiment;
  kv["experiment.horizon"] = fmt(e.horizon);
  kv["experiment.ensemble"] = std::to_string(e.ensemble);
  kv["experiment.burn_in_fraction"] = fmt(e.burn_in_fraction);
  kv["experiment.stride"] = std::to_string(e.stride);
  kv["experiment.checkpoints"] = fmt_list(e.checkpoints);
  kv["experiment.ks_threshold"] = fmt(e.ks_threshold);
  kv["experiment.min_ess"] = fmt(e.min_ess);
  kv["experiment.attach_certificate"] = e.attach_certificate ? "true" : "false";
  kv["experiment.masses"] = fmt_list(e.masses);
  kv["experiment.dt_per_mass"] = fmt(e.dt_per_mass);
  kv["experiment.control_ratio"] = fmt(e.control_ratio);
  kv["experiment.epsilons"] = fmt_list(e.epsilons);
  kv["experiment.truncated"] = e.truncated ? "true" : "false";
  kv["experiment.slope_lo"] = fmt(e.slope_lo);
  kv["experiment.slope_hi"] = fmt(e.slope_hi);
  kv["experiment.band_factor"] = fmt(e.band_factor);
  kv["experiment.trials"] = std::to_string(e.trials);
  kv["experiment.lemma_tolerance"] = fmt(e.lemma_tolerance);
  kv["experiment.lyapunov"] = e.lyapunov;
  kv["experiment.alpha"] = fmt(e.alpha);
  kv["experiment.eps1"] = fmt(e.lyapunov_params.eps1);
  kv["experiment.kappa"] = fmt(e.lyapunov_params.kappa);
  kv["experiment.A1"] = fmt(e.lyapunov_params.A1);
  kv["experiment.A2"] = fmt(e.lyapunov_params.A2);
  kv["experiment.power"] = std::to_string(e.lyapunov_params.power);
  const auto& pl = e.plan;
  kv["experiment.plan.q_min"] = fmt(pl.q_min);
  kv["experiment.plan.q_max"] = fmt(pl.q_max);
  kv["experiment.plan.q_count"] = std::to_string(pl.q_count);
  kv["experiment.plan.p_min"] = fmt(pl.p_min);
  kv["experiment.plan.p_max"] = fmt(pl.p_max);
  kv["experiment.plan.p_count"] = std::to_string(pl.p_count);
  kv["experiment.plan.directions"] = std::to_string(pl.directions);
  kv["experiment.plan.near_collision"] = fmt_list(pl.near_collision);
  kv["experiment.plan.core_quantile"] = fmt(pl.core_quantile);
  kv["experiment.plan.seed"] = std::to_string(pl.seed);
  kv["experiment.audit_samples"] = std::to_string(e.audit_samples);
  kv["experiment.audit_r_min"] = fmt(e.audit_r_min);
  kv["experiment.audit_r_max"] = fmt(e.audit_r_max);
  kv["experiment.timeseries_stride"] = std::to_string(e.timeseries_stride);
  kv["experiment.histogram_bins"] = std::to_string(e.histogram_bins);
  return kv;
}

std::string write_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace langevin
