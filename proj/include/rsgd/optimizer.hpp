#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rsgd/geometry.hpp"
#include "rsgd/objectives.hpp"
#include "rsgd/schedule.hpp"

namespace rsgd {

struct RunConfig {
  ObjectivePtr objective;
  StepSchedule schedule;
  long iterations = 10'000;
  std::uint64_t seed = 0;
  long eval_every = 10;         // full loss / retracted-gradient cadence
  long renormalize_every = 100; // representation drift control
  bool use_exp_when_available = true;

  void validate() const;
};

// One row of a trace. full_loss / rgrad_norm are NaN outside the eval grid;
// stoch_loss is NaN on the trailing k = K row.
struct StepRecord {
  long k = 0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double stoch_loss = std::numeric_limits<double>::quiet_NaN();
  double full_loss = std::numeric_limits<double>::quiet_NaN();
  double rgrad_norm = std::numeric_limits<double>::quiet_NaN();
};

struct RunTrace {
  std::vector<StepRecord> records;  // k = 0..K-1 plus a final k = K row
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::optional<ManifoldPoint> final_point;
  bool failed = false;
  std::string error_message;
  long error_iteration = -1;

  std::vector<long> eval_ks() const;  // rows carrying full evaluations
};

struct StepResult {
  ManifoldPoint next;
  double stoch_loss = 0.0;
};

// One update x <- R_x(-alpha * P_x(g)) with g the sampled ambient selection;
// uses the exponential map instead of R when requested and available.
// Throws NumericError (tagged with k) on non-finite subgradients.
StepResult rsgd_step(const StochasticObjective& obj, const ManifoldPoint& x,
                     double alpha, CounterRng& rng, bool use_exp, long k);

// Full loop from a seed-derived random start. Numeric failures are recorded
// on the returned trace instead of thrown.
RunTrace run(const RunConfig& config);

struct SeriesStats {
  std::vector<double> mean, stddev, min, max;
};

struct MultiRunResult {
  std::vector<RunTrace> runs;
  std::vector<long> eval_ks;
  std::vector<double> alpha;  // schedule values on the eval grid
  SeriesStats stoch_loss, full_loss, rgrad_norm;
  int n_success = 0;
  std::vector<int> failed_runs;
};

// n_runs independent runs with seeds derived from config.seed (or the given
// seed function), optionally on a bounded worker pool. Aggregation happens
// after all runs complete; per-run traces are retained.
MultiRunResult multi_run(const RunConfig& config, int n_runs, int workers = 1,
                         const std::function<std::uint64_t(int)>& seed_for_run = {});

}  // namespace rsgd
