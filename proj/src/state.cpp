#include "langevin/state.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "langevin/errors.hpp"

namespace langevin {

namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 8> kKindNames{{
    {ModelKind::classical, "classical"},
    {ModelKind::relativistic, "relativistic"},
    {ModelKind::overdamped, "overdamped"},
    {ModelKind::classical_limit, "classical_limit"},
    {ModelKind::classical_truncated, "classical_truncated"},
    {ModelKind::relativistic_truncated, "relativistic_truncated"},
    {ModelKind::overdamped_truncated, "overdamped_truncated"},
    {ModelKind::classical_limit_truncated, "classical_limit_truncated"},
}};

bool all_finite(const std::vector<Vec>& vs) {
  for (const auto& v : vs)
    if (!v.allFinite()) return false;
  return true;
}

}  // namespace

PhaseState PhaseState::zeros(int particle_count, int dimension) {
  PhaseState s;
  s.positions.assign(particle_count, Vec::Zero(dimension));
  s.momenta.assign(particle_count, Vec::Zero(dimension));
  return s;
}

bool PhaseState::operator==(const PhaseState& other) const {
  if (time != other.time || positions.size() != other.positions.size() ||
      momenta.size() != other.momenta.size())
    return false;
  for (size_t i = 0; i < positions.size(); ++i)
    if (positions[i] != other.positions[i]) return false;
  for (size_t i = 0; i < momenta.size(); ++i)
    if (momenta[i] != other.momenta[i]) return false;
  return true;
}

std::string_view to_string(ModelKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_truncated(ModelKind kind) {
  switch (kind) {
    case ModelKind::classical_truncated:
    case ModelKind::relativistic_truncated:
    case ModelKind::overdamped_truncated:
    case ModelKind::classical_limit_truncated:
      return true;
    default:
      return false;
  }
}

ModelKind base_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::classical_truncated: return ModelKind::classical;
    case ModelKind::relativistic_truncated: return ModelKind::relativistic;
    case ModelKind::overdamped_truncated: return ModelKind::overdamped;
    case ModelKind::classical_limit_truncated: return ModelKind::classical_limit;
    default: return kind;
  }
}

bool needs_mass(ModelKind kind) { return base_kind(kind) == ModelKind::classical; }

bool needs_epsilon(ModelKind kind) { return base_kind(kind) == ModelKind::relativistic; }

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  if (!(dt > 0.0) || !std::isfinite(dt)) out.push_back("dt must be positive and finite");
  if (!(collision_guard > 0.0)) out.push_back("collision_guard must be positive");
  if (dimension < 1 || dimension > kMaxDim)
    out.push_back("dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (particle_count < 1) out.push_back("particle_count must be at least 1");
  if (mass && !(*mass > 0.0)) out.push_back("mass must be positive");
  if (epsilon && !(*epsilon > 0.0)) out.push_back("epsilon must be positive");
  if (truncation_radius && !(*truncation_radius >= 1.0))
    out.push_back("truncation_radius must be at least 1");
  if (needs_mass(kind) && !mass)
    out.push_back(std::string(to_string(kind)) + " requires mass");
  if (needs_epsilon(kind) && !epsilon)
    out.push_back(std::string(to_string(kind)) + " requires epsilon");
  if (is_truncated(kind) && !truncation_radius)
    out.push_back(std::string(to_string(kind)) + " requires truncation_radius");
  return out;
}

void ModelConfig::validate() const {
  auto p = problems();
  if (p.empty()) return;
  std::ostringstream os;
  os << "invalid model config:";
  for (const auto& s : p) os << "\n  " << s;
  throw ConfigError(os.str());
}

double min_pair_distance(const PhaseState& state) {
  double best = std::numeric_limits<double>::infinity();
  const int n = state.particle_count();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      best = std::min(best, (state.positions[i] - state.positions[j]).norm());
  return best;
}

std::optional<StateViolation> validate_state(const PhaseState& state, const ModelConfig& cfg) {
  using K = StateViolation::Kind;
  const int n = state.particle_count();
  if (n != cfg.particle_count || static_cast<int>(state.momenta.size()) != n)
    return StateViolation{K::shape, -1, -1, "particle count does not match config"};
  for (int i = 0; i < n; ++i)
    if (state.positions[i].size() != cfg.dimension || state.momenta[i].size() != cfg.dimension)
      return StateViolation{K::shape, i, -1, "dimension does not match config"};
  if (!all_finite(state.positions) || !all_finite(state.momenta) || !std::isfinite(state.time) ||
      state.time < 0.0)
    return StateViolation{K::non_finite, -1, -1, "non-finite coordinate or negative time"};

  if (cfg.dimension == 1) {
    for (int i = 0; i + 1 < n; ++i)
      if (!(state.positions[i][0] < state.positions[i + 1][0]))
        return StateViolation{K::ordering, i, i + 1,
                              "positions " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                  " break the ordering"};
    return std::nullopt;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (state.positions[i] == state.positions[j])
        return StateViolation{K::collision, i, j,
                              "particles " + std::to_string(i) + " and " + std::to_string(j) +
                                  " coincide"};
  return std::nullopt;
}

}  // namespace langevin
