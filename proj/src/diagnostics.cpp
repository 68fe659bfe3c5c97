#include "rsgd/diagnostics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace rsgd {

double retracted_grad_norm(const StochasticObjective& obj, const ManifoldPoint& x) {
  if (!obj.has_full_subgrad())
    throw CapabilityError("retracted_grad_norm needs a deterministic full selection");
  return norm(tangent_project(x, obj.full_subgrad(x)));
}

double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty series");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> running_min(const std::vector<double>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  double best = std::numeric_limits<double>::infinity();
  for (double x : v) {
    best = std::min(best, x);
    out.push_back(best);
  }
  return out;
}

TrendSummary decile_trend(const std::vector<double>& series) {
  if (series.empty()) throw DomainError("trend of an empty series");
  const size_t n = series.size();
  const size_t w = std::max<size_t>(1, (n + 9) / 10);
  TrendSummary t;
  t.first_decile_median = median({series.begin(), series.begin() + w});
  t.last_decile_median = median({series.end() - w, series.end()});
  if (t.first_decile_median != 0.0)
    t.ratio = t.last_decile_median / t.first_decile_median;
  else
    t.ratio = t.last_decile_median == 0.0
                  ? 1.0
                  : std::numeric_limits<double>::infinity();
  t.decreased = t.last_decile_median <= t.first_decile_median;
  return t;
}

TraceStats trend_report(const MultiRunResult& agg) {
  if (agg.eval_ks.empty())
    throw DomainError("trend_report: aggregate carries no evaluations");
  TraceStats stats;
  stats.eval_ks = agg.eval_ks;
  stats.full_loss = agg.full_loss;
  stats.rgrad_norm = agg.rgrad_norm;
  stats.running_min_full_loss = running_min(agg.full_loss.mean);
  stats.loss_trend = decile_trend(agg.full_loss.mean);
  stats.rgrad_trend = decile_trend(agg.rgrad_norm.mean);
  stats.converging = stats.loss_trend.decreased && stats.rgrad_trend.decreased;
  stats.n_runs = agg.n_success;
  return stats;
}

TraceStats trend_report(const RunTrace& trace) {
  if (trace.records.empty()) throw DomainError("trend_report: empty trace");
  MultiRunResult single;
  single.runs = {trace};
  single.eval_ks = trace.eval_ks();
  std::vector<double> full, rgrad;
  for (const auto& r : trace.records) {
    if (std::isnan(r.full_loss)) continue;
    full.push_back(r.full_loss);
    rgrad.push_back(r.rgrad_norm);
  }
  if (full.empty()) throw DomainError("trend_report: trace carries no evaluations");
  single.full_loss = {full, std::vector<double>(full.size(), 0.0), full, full};
  single.rgrad_norm = {rgrad, std::vector<double>(rgrad.size(), 0.0), rgrad, rgrad};
  single.n_success = 1;
  return trend_report(single);
}

SolutionSpec SolutionSpec::subspace(Matrix orthonormal_basis) {
  const Matrix gram = orthonormal_basis.transpose() * orthonormal_basis;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).norm() > 1e-8)
    throw DomainError("subspace spec needs an orthonormal basis");
  return SolutionSpec{Kind::Subspace, std::move(orthonormal_basis)};
}

SolutionSpec SolutionSpec::matrix(Matrix target) {
  return SolutionSpec{Kind::Matrix, std::move(target)};
}

double distance_to_known_solution(const ManifoldPoint& x, const SolutionSpec& spec) {
  switch (spec.kind) {
    case SolutionSpec::Kind::Subspace: {
      const auto kind = x.descriptor.kind();
      if (kind != ManifoldDescriptor::Kind::Stiefel &&
          kind != ManifoldDescriptor::Kind::Sphere)
        throw CapabilityError("subspace distance needs a Stiefel or sphere point");
      const Matrix& m = x.data[0];
      if (m.rows() != spec.target.rows() || m.cols() != spec.target.cols())
        throw DimensionError("subspace distance: shape mismatch");
      // cosines of the principal angles are the singular values of B^T X
      Eigen::JacobiSVD<Matrix> svd(spec.target.transpose() * m);
      const double c = std::min(1.0, svd.singularValues().minCoeff());
      return std::sqrt(std::max(0.0, 1.0 - c * c));
    }
    case SolutionSpec::Kind::Matrix: {
      const Matrix d = dense(x);
      if (d.rows() != spec.target.rows() || d.cols() != spec.target.cols())
        throw DimensionError("matrix distance: shape mismatch");
      return (d - spec.target).norm();
    }
  }
  throw CapabilityError("unknown solution spec");
}

}  // namespace rsgd
