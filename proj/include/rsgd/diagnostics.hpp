#pragma once

#include "rsgd/objectives.hpp"
#include "rsgd/optimizer.hpp"

namespace rsgd {

// Metric norm of the tangent projection of the deterministic ambient
// subgradient selection at x, the stationarity diagnostic plotted on traces.
double retracted_grad_norm(const StochasticObjective& obj, const ManifoldPoint& x);

struct TrendSummary {
  double first_decile_median = 0.0;
  double last_decile_median = 0.0;
  double ratio = 1.0;  // last / first, 1 when both vanish
  bool decreased = false;
};

struct TraceStats {
  std::vector<long> eval_ks;
  SeriesStats full_loss, rgrad_norm;
  std::vector<double> running_min_full_loss;  // of the mean curve
  TrendSummary loss_trend, rgrad_trend;
  bool converging = false;  // both trends non-increasing
  int n_runs = 0;
};

TraceStats trend_report(const MultiRunResult& agg);
TraceStats trend_report(const RunTrace& trace);

double median(std::vector<double> v);
std::vector<double> running_min(const std::vector<double>& v);
TrendSummary decile_trend(const std::vector<double>& series);

// Reference sets of minimizers for instances where they are computable.
struct SolutionSpec {
  enum class Kind { Subspace, Matrix };
  Kind kind = Kind::Matrix;
  Matrix target;

  // Column span of an orthonormal basis; distance is the sine of the largest
  // principal angle, invariant under right-rotation of either factor.
  static SolutionSpec subspace(Matrix orthonormal_basis);
  // A fixed ambient matrix; distance is Frobenius.
  static SolutionSpec matrix(Matrix target);
};

double distance_to_known_solution(const ManifoldPoint& x, const SolutionSpec& spec);

}  // namespace rsgd
