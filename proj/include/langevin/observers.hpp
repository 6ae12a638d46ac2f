#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "langevin/integrators.hpp"

namespace langevin {

using ScalarFn = std::function<double(const PhaseState&)>;

// Writes one tab-separated row per sampled step:
//   time, q[i][c] for all i, c, p[i][c] for all i, c, then extra columns.
// The header row is written on start, so a zero-length run leaves only it.
class TimeSeriesWriter : public Observer {
 public:
  TimeSeriesWriter(std::ostream& out, int stride,
                   std::vector<std::pair<std::string, ScalarFn>> extra = {});
  void on_start(const PhaseState& state) override;
  void on_step(const PhaseState& state, std::int64_t step) override;
  std::int64_t rows() const { return rows_; }

 private:
  std::ostream& out_;
  int stride_;
  std::vector<std::pair<std::string, ScalarFn>> extra_;
  std::int64_t rows_ = 0;
};

// Collects values from every `stride`-th step after `burn_in_steps`. The
// extractor appends any number of values per sampled state; each slot of
// that list is kept as its own series so autocorrelation stays meaningful.
class SeriesSampler : public Observer {
 public:
  using Extractor = std::function<void(const PhaseState&, std::vector<double>&)>;
  SeriesSampler(Extractor extract, std::int64_t burn_in_steps, int stride);
  void on_step(const PhaseState& state, std::int64_t step) override;
  const std::vector<std::vector<double>>& series() const { return series_; }

 private:
  Extractor extract_;
  std::int64_t burn_in_;
  int stride_;
  std::vector<double> scratch_;
  std::vector<std::vector<double>> series_;
};

// Running maximum of a scalar over the path, initial state included.
class RunningMax : public Observer {
 public:
  explicit RunningMax(ScalarFn f) : f_(std::move(f)) {}
  void on_start(const PhaseState& state) override { value_ = f_(state); }
  void on_step(const PhaseState& state, std::int64_t) override { value_ = std::max(value_, f_(state)); }
  double value() const { return value_; }

 private:
  ScalarFn f_;
  double value_ = -std::numeric_limits<double>::infinity();
};

// First time the full phase-space norm reaches `radius` (the stopping times
// used to localize the moment estimates). NaN if it never does.
class ExitTimeRecorder : public Observer {
 public:
  explicit ExitTimeRecorder(double radius) : radius_(radius) {}
  void on_start(const PhaseState& state) override;
  void on_step(const PhaseState& state, std::int64_t step) override;
  double exit_time() const { return exit_time_; }

 private:
  double radius_;
  double exit_time_ = std::numeric_limits<double>::quiet_NaN();
};

double phase_norm(const PhaseState& state);

}  // namespace langevin
