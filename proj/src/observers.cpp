#include "langevin/observers.hpp"

#include <cmath>
#include <iomanip>

namespace langevin {

TimeSeriesWriter::TimeSeriesWriter(std::ostream& out, int stride,
                                   std::vector<std::pair<std::string, ScalarFn>> extra)
    : out_(out), stride_(std::max(1, stride)), extra_(std::move(extra)) {}

void TimeSeriesWriter::on_start(const PhaseState& state) {
  out_ << "time";
  for (int i = 0; i < state.particle_count(); ++i)
    for (int c = 0; c < state.dimension(); ++c) out_ << "\tq" << i << '_' << c;
  for (int i = 0; i < state.particle_count(); ++i)
    for (int c = 0; c < state.dimension(); ++c) out_ << "\tp" << i << '_' << c;
  for (const auto& [name, fn] : extra_) out_ << '\t' << name;
  out_ << '\n';
}

void TimeSeriesWriter::on_step(const PhaseState& state, std::int64_t step) {
  if (step % stride_ != 0) return;
  out_ << std::setprecision(17) << state.time;
  for (const auto& q : state.positions)
    for (int c = 0; c < q.size(); ++c) out_ << '\t' << q[c];
  for (const auto& p : state.momenta)
    for (int c = 0; c < p.size(); ++c) out_ << '\t' << p[c];
  for (const auto& [name, fn] : extra_) out_ << '\t' << fn(state);
  out_ << '\n';
  ++rows_;
}

SeriesSampler::SeriesSampler(Extractor extract, std::int64_t burn_in_steps, int stride)
    : extract_(std::move(extract)), burn_in_(burn_in_steps), stride_(std::max(1, stride)) {}

void SeriesSampler::on_step(const PhaseState& state, std::int64_t step) {
  if (step <= burn_in_ || (step - burn_in_) % stride_ != 0) return;
  scratch_.clear();
  extract_(state, scratch_);
  if (series_.size() < scratch_.size()) series_.resize(scratch_.size());
  for (size_t k = 0; k < scratch_.size(); ++k) series_[k].push_back(scratch_[k]);
}

double phase_norm(const PhaseState& state) {
  double s = 0.0;
  for (const auto& q : state.positions) s += q.squaredNorm();
  for (const auto& p : state.momenta) s += p.squaredNorm();
  return std::sqrt(s);
}

void ExitTimeRecorder::on_start(const PhaseState& state) {
  if (phase_norm(state) >= radius_) exit_time_ = state.time;
}

void ExitTimeRecorder::on_step(const PhaseState& state, std::int64_t) {
  if (std::isnan(exit_time_) && phase_norm(state) >= radius_) exit_time_ = state.time;
}

}  // namespace langevin
