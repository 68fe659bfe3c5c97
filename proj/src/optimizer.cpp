#include "rsgd/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <semaphore>
#include <thread>

#include "rsgd/diagnostics.hpp"

namespace rsgd {

void RunConfig::validate() const {
  if (!objective) throw ConfigError("run config: objective is missing");
  schedule.validate();
  if (iterations < 1) throw ConfigError("run config: iterations must be >= 1");
  if (eval_every < 1) throw ConfigError("run config: eval_every must be >= 1");
  if (renormalize_every < 1)
    throw ConfigError("run config: renormalize_every must be >= 1");
}

std::vector<long> RunTrace::eval_ks() const {
  std::vector<long> ks;
  for (const auto& r : records)
    if (!std::isnan(r.full_loss)) ks.push_back(r.k);
  return ks;
}

StepResult rsgd_step(const StochasticObjective& obj, const ManifoldPoint& x,
                     double alpha, CounterRng& rng, bool use_exp, long k) {
  const Sample sample = obj.draw_sample(rng);
  const Blocks g = obj.stoch_subgrad(x, sample);
  if (!blocks_finite(g))
    throw NumericError("non-finite subgradient at iteration " + std::to_string(k), k);
  const double stoch_loss = obj.stoch_value(x, sample);
  const TangentVector direction = scaled(tangent_project(x, g), -alpha);
  ManifoldPoint next = (use_exp && has_exp_map(x.descriptor))
                           ? exp_map(x, direction)
                           : retract(x, direction);
  return StepResult{std::move(next), stoch_loss};
}

RunTrace run(const RunConfig& config) {
  config.validate();
  const auto& obj = *config.objective;
  const long K = config.iterations;

  RunTrace trace;
  trace.seed = config.seed;
  trace.records.reserve(K + 1);
  const auto t0 = std::chrono::steady_clock::now();

  CounterRng rng(config.seed);
  ManifoldPoint x = random_point(obj.descriptor(), rng);
  StepSequence steps(config.schedule);

  const bool evals = obj.has_full_value() && obj.has_full_subgrad();
  double alpha = 0.0;
  try {
    for (long k = 0; k < K; ++k) {
      alpha = steps.next();
      StepRecord rec;
      rec.k = k;
      rec.alpha = alpha;
      if (evals && k % config.eval_every == 0) {
        rec.full_loss = obj.full_value(x);
        rec.rgrad_norm = retracted_grad_norm(obj, x);
      }
      StepResult result = rsgd_step(obj, x, alpha, rng, config.use_exp_when_available, k);
      rec.stoch_loss = result.stoch_loss;
      trace.records.push_back(rec);
      x = std::move(result.next);
      if ((k + 1) % config.renormalize_every == 0) x = renormalize(x);
    }
    StepRecord last;
    last.k = K;
    last.alpha = steps.next();
    if (evals) {
      last.full_loss = obj.full_value(x);
      last.rgrad_norm = retracted_grad_norm(obj, x);
    }
    trace.records.push_back(last);
    trace.final_point = x;
  } catch (const NumericError& e) {
    trace.failed = true;
    trace.error_message = e.what();
    trace.error_iteration = e.iteration;
  }

  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

namespace {

SeriesStats aggregate_series(const std::vector<std::vector<double>>& per_run) {
  SeriesStats stats;
  if (per_run.empty()) return stats;
  const size_t len = per_run.front().size();
  const double n = static_cast<double>(per_run.size());
  stats.mean.assign(len, 0.0);
  stats.stddev.assign(len, 0.0);
  stats.min.assign(len, std::numeric_limits<double>::infinity());
  stats.max.assign(len, -std::numeric_limits<double>::infinity());
  for (const auto& series : per_run) {
    for (size_t i = 0; i < len; ++i) {
      stats.mean[i] += series[i];
      stats.min[i] = std::min(stats.min[i], series[i]);
      stats.max[i] = std::max(stats.max[i], series[i]);
    }
  }
  for (size_t i = 0; i < len; ++i) stats.mean[i] /= n;
  if (per_run.size() > 1) {
    for (const auto& series : per_run)
      for (size_t i = 0; i < len; ++i) {
        const double d = series[i] - stats.mean[i];
        stats.stddev[i] += d * d;
      }
    for (size_t i = 0; i < len; ++i)
      stats.stddev[i] = std::sqrt(stats.stddev[i] / (n - 1.0));
  }
  return stats;
}

}  // namespace

MultiRunResult multi_run(const RunConfig& config, int n_runs, int workers,
                         const std::function<std::uint64_t(int)>& seed_for_run) {
  config.validate();
  if (n_runs < 1) throw ConfigError("multi_run: n_runs must be >= 1");
  if (workers < 1) workers = 1;

  MultiRunResult result;
  result.runs.resize(n_runs);

  auto seed_of = [&](int i) {
    return seed_for_run ? seed_for_run(i) : CounterRng::mix(config.seed, i);
  };

  // bounded pool; runs share only the immutable objective
  std::counting_semaphore<> slots(workers);
  std::vector<std::future<void>> futures;
  futures.reserve(n_runs);
  for (int i = 0; i < n_runs; ++i) {
    slots.acquire();
    futures.push_back(std::async(std::launch::async, [&, i] {
      RunConfig rc = config;
      rc.seed = seed_of(i);
      result.runs[i] = run(rc);
      slots.release();
    }));
  }
  for (auto& f : futures) f.get();

  std::vector<std::vector<double>> stoch, full, rgrad;
  for (int i = 0; i < n_runs; ++i) {
    const RunTrace& t = result.runs[i];
    if (t.failed) {
      result.failed_runs.push_back(i);
      continue;
    }
    if (result.eval_ks.empty()) {
      result.eval_ks = t.eval_ks();
      for (const auto& r : t.records)
        if (!std::isnan(r.full_loss)) result.alpha.push_back(r.alpha);
    }
    std::vector<double> s, f, g;
    for (const auto& r : t.records) {
      if (std::isnan(r.full_loss)) continue;
      s.push_back(r.stoch_loss);
      f.push_back(r.full_loss);
      g.push_back(r.rgrad_norm);
    }
    stoch.push_back(std::move(s));
    full.push_back(std::move(f));
    rgrad.push_back(std::move(g));
    ++result.n_success;
  }
  result.stoch_loss = aggregate_series(stoch);
  result.full_loss = aggregate_series(full);
  result.rgrad_norm = aggregate_series(rgrad);
  return result;
}

}  // namespace rsgd
