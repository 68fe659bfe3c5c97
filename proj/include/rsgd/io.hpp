#pragma once

#include <string>

#include "json.hpp"
#include "rsgd/diagnostics.hpp"
#include "rsgd/objectives.hpp"
#include "rsgd/optimizer.hpp"
#include "rsgd/schedule.hpp"
#include "rsgd/theory_checks.hpp"

namespace rsgd {

using Json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "0.1.0";

// %.17g round-trip formatting; NaN renders as an empty CSV field.
std::string format_double(double v);

// ---- JSON codecs ------------------------------------------------------------

// {"kind": "...", "dims": [...]}; products carry "components".
Json descriptor_to_json(const ManifoldDescriptor& d);
ManifoldDescriptor descriptor_from_json(const Json& j);

Json schedule_to_json(const StepSchedule& s);
StepSchedule schedule_from_json(const Json& j);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json check_report_to_json(const CheckReport& r);

// ---- problem / experiment configs -------------------------------------------

// A problem entry of an experiment config. Keeps the raw JSON (echoed into
// run metadata) and knows how to build the objective, loading referenced
// instance or dataset files.
struct ProblemSpec {
  std::string type;
  Json params;

  static ProblemSpec from_json(const Json& j);
  Json to_json() const;
  // meta, when given, receives instance provenance (normalization, rank
  // projection, file paths, rng name).
  ObjectivePtr build(Json* meta = nullptr) const;
};

struct ExperimentConfig {
  std::string name = "run";
  ProblemSpec problem;
  std::vector<StepSchedule> schedules;  // one entry for cmd_run, grid for sweep
  long iterations = 10'000;
  int n_runs = 10;
  std::uint64_t base_seed = 0;
  long eval_every = 10;
  long renormalize_every = 100;
  bool use_exp_when_available = true;
  int workers = 1;
  std::string output_dir = "out";

  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;
  void validate() const;
};

// ---- file helpers ------------------------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
Json read_json_file(const std::string& path);

void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

// ---- trace serialization -------------------------------------------------

// Pinned header "k,alpha,stoch_loss,full_loss,rgrad_norm", one row per
// evaluation point.
std::string trace_csv(const RunTrace& trace);
// Aggregate grid with mean/std/min/max columns per traced quantity.
std::string aggregate_csv(const MultiRunResult& agg);
Json stats_json(const TraceStats& stats);

// FNV-1a digest of the point's raw bytes, hex-encoded.
std::string point_digest(const ManifoldPoint& x);

// ---- instance generation -----------------------------------------------------

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);
// Scales to unit spectral norm.
Matrix normalize_spectral(const Matrix& m);
// Scales to unit Frobenius norm, then truncates to the leading rank terms.
Matrix normalized_rank_projected(const Matrix& m, Index rank);

}  // namespace rsgd
