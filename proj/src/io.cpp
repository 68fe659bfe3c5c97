#include "rsgd/io.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rsgd/libsvm.hpp"

namespace rsgd {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- JSON codecs ------------------------------------------------------------

Json descriptor_to_json(const ManifoldDescriptor& d) {
  Json j;
  switch (d.kind()) {
    case ManifoldDescriptor::Kind::Sphere:
      j["kind"] = "sphere";
      break;
    case ManifoldDescriptor::Kind::Stiefel:
      j["kind"] = "stiefel";
      break;
    case ManifoldDescriptor::Kind::FixedRank:
      j["kind"] = "fixed_rank";
      break;
    case ManifoldDescriptor::Kind::Euclidean:
      j["kind"] = "euclidean";
      break;
    case ManifoldDescriptor::Kind::Product: {
      j["kind"] = "product";
      Json comps = Json::array();
      for (const auto& c : d.components()) comps.push_back(descriptor_to_json(c));
      j["components"] = comps;
      return j;
    }
  }
  j["dims"] = d.dims();
  return j;
}

ManifoldDescriptor descriptor_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "product") {
    std::vector<ManifoldDescriptor> comps;
    for (const auto& c : j.at("components")) comps.push_back(descriptor_from_json(c));
    return ManifoldDescriptor::product(std::move(comps));
  }
  const auto dims = j.at("dims").get<std::vector<Index>>();
  auto need = [&](size_t n) {
    if (dims.size() != n)
      throw ConfigError("descriptor '" + kind + "' needs " + std::to_string(n) +
                        " dims");
  };
  if (kind == "sphere") {
    need(1);
    return ManifoldDescriptor::sphere(dims[0]);
  }
  if (kind == "stiefel") {
    need(2);
    return ManifoldDescriptor::stiefel(dims[0], dims[1]);
  }
  if (kind == "fixed_rank") {
    need(3);
    return ManifoldDescriptor::fixed_rank(dims[0], dims[1], dims[2]);
  }
  if (kind == "euclidean") {
    need(1);
    return ManifoldDescriptor::euclidean(dims[0]);
  }
  throw ConfigError("unknown manifold kind: " + kind);
}

Json schedule_to_json(const StepSchedule& s) {
  switch (s.kind) {
    case StepSchedule::Kind::Constant:
      return Json{{"type", "constant"}, {"s", s.s}};
    case StepSchedule::Kind::Regime1:
      return Json{{"type", "regime1"}, {"s0", s.s0}, {"c", s.c}};
    case StepSchedule::Kind::Regime2:
      return Json{{"type", "regime2"}, {"a", s.a}, {"b", s.b}};
  }
  throw ConfigError("unknown schedule kind");
}

StepSchedule schedule_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") return StepSchedule::constant(j.at("s").get<double>());
  if (type == "regime1")
    return StepSchedule::regime1(j.at("s0").get<double>(), j.at("c").get<double>());
  if (type == "regime2")
    return StepSchedule::regime2(j.at("a").get<double>(), j.at("b").get<double>());
  throw ConfigError("unknown schedule type: " + type);
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("matrix JSON must be a nonempty array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (static_cast<Index>(row.size()) != cols)
      throw ParseError("matrix JSON rows have inconsistent lengths");
    for (Index c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
  }
  return m;
}

Json check_report_to_json(const CheckReport& r) {
  Json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["max_defect"] = r.max_defect;
  j["tolerance"] = r.tolerance;
  j["sample_count"] = r.sample_count;
  j["metrics"] = r.metrics;
  j["notes"] = r.notes;
  return j;
}

// ---- problem specs -----------------------------------------------------------

ProblemSpec ProblemSpec::from_json(const Json& j) {
  ProblemSpec spec;
  spec.type = j.at("type").get<std::string>();
  spec.params = j;
  return spec;
}

Json ProblemSpec::to_json() const { return params; }

namespace {

Matrix load_instance_payload(const std::string& instance_path, Json* meta) {
  const Json inst = read_json_file(instance_path);
  const std::string payload = inst.at("payload").get<std::string>();
  // payload paths are relative to the instance file
  const auto slash = instance_path.find_last_of('/');
  const std::string dir =
      slash == std::string::npos ? "" : instance_path.substr(0, slash + 1);
  if (meta) (*meta)["instance"] = inst;
  return read_matrix_csv(dir + payload);
}

}  // namespace

ObjectivePtr ProblemSpec::build(Json* meta) const {
  if (meta) (*meta)["problem"] = params;
  if (type == "sparse_pca") {
    const double rho = params.value("rho", 1.0);
    const Index p_cols = params.value("p_cols", Index{2});
    Matrix a;
    if (params.contains("instance")) {
      a = load_instance_payload(params.at("instance").get<std::string>(), meta);
    } else {
      const Index n = params.at("n").get<Index>();
      if (n < 1) throw ConfigError("sparse_pca: n must be >= 1");
      a = gaussian_matrix(n, n, params.value("seed", std::uint64_t{0}));
    }
    if (params.value("normalize", false)) {
      a = normalize_spectral(a);
      if (meta) (*meta)["normalized_spectral"] = true;
    }
    return std::make_shared<SparsePca>(std::move(a), rho, p_cols);
  }
  if (type == "matrix_completion") {
    const double sigma = params.value("sigma", 0.0);
    const Index rank = params.at("rank").get<Index>();
    Matrix a;
    if (params.contains("instance")) {
      a = load_instance_payload(params.at("instance").get<std::string>(), meta);
    } else {
      const Index m = params.at("m").get<Index>();
      const Index n = params.at("n").get<Index>();
      if (m < 1 || n < 1) throw ConfigError("matrix_completion: m, n must be >= 1");
      // normalized random ground truth, projected to the target rank so a
      // zero-loss solution exists
      a = normalized_rank_projected(
          gaussian_matrix(m, n, params.value("seed", std::uint64_t{0})), rank);
      if (meta) {
        (*meta)["normalized_frobenius"] = true;
        (*meta)["rank_projected"] = true;
      }
    }
    return std::make_shared<MatrixCompletion>(std::move(a), rank, sigma);
  }
  if (type == "relu_net") {
    Dataset ds;
    if (params.contains("data_path")) {
      ds = parse_libsvm(params.at("data_path").get<std::string>(),
                        params.value("dim", Index{-1}),
                        params.value("standardize", false));
    } else if (params.contains("synthetic")) {
      const Json& syn = params.at("synthetic");
      ds = make_synthetic_regression(syn.at("n_rows").get<Index>(),
                                     syn.at("dim").get<Index>(),
                                     syn.value("seed", std::uint64_t{0}));
    } else {
      throw ConfigError("relu_net needs data_path or synthetic");
    }
    if (meta) {
      (*meta)["dataset_name"] = ds.name;
      (*meta)["dataset_rows"] = ds.features.rows();
      (*meta)["dataset_dim"] = ds.features.cols();
    }
    const auto widths = params.at("widths").get<std::vector<Index>>();
    return std::make_shared<ReluNet>(std::move(ds), widths,
                                     params.value("n_out", Index{1}),
                                     params.at("batch").get<Index>());
  }
  if (type == "l1_sphere") {
    const Index n = params.at("n").get<Index>();
    return make_l1_objective(ManifoldDescriptor::sphere(n));
  }
  throw ConfigError("unknown problem type: " + type);
}

// ---- experiment configs --------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  c.name = j.value("name", std::string("run"));
  c.problem = ProblemSpec::from_json(j.at("problem"));
  if (j.contains("schedules")) {
    for (const auto& s : j.at("schedules")) c.schedules.push_back(schedule_from_json(s));
  } else if (j.contains("schedule")) {
    c.schedules.push_back(schedule_from_json(j.at("schedule")));
  }
  c.iterations = j.value("iterations", 10'000L);
  c.n_runs = j.value("n_runs", 10);
  c.base_seed = j.value("base_seed", std::uint64_t{0});
  c.eval_every = j.value("eval_every", 10L);
  c.renormalize_every = j.value("renormalize_every", 100L);
  c.use_exp_when_available = j.value("use_exp_when_available", true);
  c.workers = j.value("workers", 1);
  c.output_dir = j.value("output_dir", std::string("out"));
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["name"] = name;
  j["problem"] = problem.to_json();
  if (schedules.size() == 1) {
    j["schedule"] = schedule_to_json(schedules[0]);
  } else {
    Json arr = Json::array();
    for (const auto& s : schedules) arr.push_back(schedule_to_json(s));
    j["schedules"] = arr;
  }
  j["iterations"] = iterations;
  j["n_runs"] = n_runs;
  j["base_seed"] = base_seed;
  j["eval_every"] = eval_every;
  j["renormalize_every"] = renormalize_every;
  j["use_exp_when_available"] = use_exp_when_available;
  j["workers"] = workers;
  j["output_dir"] = output_dir;
  return j;
}

void ExperimentConfig::validate() const {
  if (schedules.empty())
    throw ConfigError("experiment config needs a schedule or a schedules grid");
  for (const auto& s : schedules) s.validate();
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (renormalize_every < 1) throw ConfigError("renormalize_every must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

// ---- files ---------------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << content;
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ostringstream os;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

Matrix read_matrix_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix CSV is empty: " + path);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

// ---- traces ---------------------------------------------------------------------

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream os;
  os << "k,alpha,stoch_loss,full_loss,rgrad_norm\n";
  for (const auto& r : trace.records) {
    if (std::isnan(r.full_loss)) continue;  // one row per evaluation point
    os << r.k << ',' << format_double(r.alpha) << ','
       << format_double(r.stoch_loss) << ',' << format_double(r.full_loss) << ','
       << format_double(r.rgrad_norm) << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const MultiRunResult& agg) {
  std::ostringstream os;
  os << "k,alpha";
  for (const char* q : {"stoch_loss", "full_loss", "rgrad_norm"})
    os << ',' << q << "_mean," << q << "_std," << q << "_min," << q << "_max";
  os << '\n';
  for (size_t i = 0; i < agg.eval_ks.size(); ++i) {
    os << agg.eval_ks[i] << ',' << format_double(agg.alpha[i]);
    for (const SeriesStats* s : {&agg.stoch_loss, &agg.full_loss, &agg.rgrad_norm})
      os << ',' << format_double(s->mean[i]) << ',' << format_double(s->stddev[i])
         << ',' << format_double(s->min[i]) << ',' << format_double(s->max[i]);
    os << '\n';
  }
  return os.str();
}

namespace {

Json trend_to_json(const TrendSummary& t) {
  return Json{{"first_decile_median", t.first_decile_median},
              {"last_decile_median", t.last_decile_median},
              {"ratio", t.ratio},
              {"decreased", t.decreased}};
}

}  // namespace

Json stats_json(const TraceStats& stats) {
  Json j;
  j["n_runs"] = stats.n_runs;
  j["eval_count"] = stats.eval_ks.size();
  j["loss_trend"] = trend_to_json(stats.loss_trend);
  j["rgrad_trend"] = trend_to_json(stats.rgrad_trend);
  j["converging"] = stats.converging;
  if (!stats.full_loss.mean.empty()) {
    j["final_full_loss_mean"] = stats.full_loss.mean.back();
    j["final_rgrad_norm_mean"] = stats.rgrad_norm.mean.back();
    j["initial_full_loss_mean"] = stats.full_loss.mean.front();
    j["final_running_min_full_loss"] = stats.running_min_full_loss.back();
  }
  return j;
}

std::string point_digest(const ManifoldPoint& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& b : x.data)
    eat(b.data(), sizeof(double) * static_cast<size_t>(b.size()));
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- instance generation ---------------------------------------------------------

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  CounterRng rng(seed);
  return rng.normal_matrix(rows, cols);
}

Matrix normalize_spectral(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const double top = svd.singularValues()(0);
  if (top <= 0) throw NumericError("cannot normalize a zero matrix");
  return m / top;
}

Matrix normalized_rank_projected(const Matrix& m, Index rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols()))
    throw ConfigError("rank projection: invalid rank");
  Matrix g = m / m.norm();
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(rank) *
         svd.singularValues().head(rank).asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

}  // namespace rsgd
