#include "rsgd/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "rsgd/io.hpp"
#include "rsgd/libsvm.hpp"

namespace rsgd {

namespace fs = std::filesystem;

namespace {

std::string output_root(const CliOptions& opts, const std::string& config_dir) {
  if (opts.out) return *opts.out;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return config_dir;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

ExperimentConfig load_experiment(const CliOptions& opts) {
  ExperimentConfig config = ExperimentConfig::from_json(read_json_file(opts.config_path));
  if (opts.seed) config.base_seed = *opts.seed;
  if (opts.workers) config.workers = *opts.workers;
  config.validate();
  return config;
}

struct CellResult {
  StepSchedule schedule;
  MultiRunResult agg;
  TraceStats stats;
  Json meta;
};

// Runs one schedule cell of an experiment and writes its artifacts.
CellResult run_cell(const ExperimentConfig& config, const StepSchedule& schedule,
                    const fs::path& dir) {
  fs::create_directories(dir);

  Json meta;
  meta["library_version"] = kLibraryVersion;
  meta["rng"] = CounterRng::kName;
  meta["timestamp"] = iso_timestamp();

  RunConfig rc;
  rc.objective = config.problem.build(&meta);
  rc.schedule = schedule;
  rc.iterations = config.iterations;
  rc.seed = config.base_seed;
  rc.eval_every = config.eval_every;
  rc.renormalize_every = config.renormalize_every;
  rc.use_exp_when_available = config.use_exp_when_available;

  meta["descriptor"] = descriptor_to_json(rc.objective->descriptor());
  meta["dist_kind"] = dist_kind(rc.objective->descriptor());
  meta["schedule"] = schedule_to_json(schedule);

  MultiRunResult agg = multi_run(rc, config.n_runs, config.workers);

  Json run_meta = Json::array();
  Json final_points = Json::array();
  double total_wall = 0.0;
  for (int i = 0; i < config.n_runs; ++i) {
    const RunTrace& trace = agg.runs[i];
    char name[32];
    std::snprintf(name, sizeof name, "run_%03d.csv", i);
    write_text_file((dir / name).string(), trace_csv(trace));
    Json rm;
    rm["run"] = i;
    rm["seed"] = trace.seed;
    rm["wall_seconds"] = trace.wall_seconds;
    rm["failed"] = trace.failed;
    if (trace.failed) {
      rm["error"] = trace.error_message;
      rm["error_iteration"] = trace.error_iteration;
    } else if (trace.final_point) {
      rm["final_point_digest"] = point_digest(*trace.final_point);
      Json blocks = Json::array();
      for (const auto& b : trace.final_point->data) blocks.push_back(matrix_to_json(b));
      final_points.push_back(Json{{"run", i}, {"blocks", blocks}});
    }
    total_wall += trace.wall_seconds;
    run_meta.push_back(std::move(rm));
  }
  meta["runs"] = run_meta;
  meta["n_success"] = agg.n_success;
  meta["total_wall_seconds"] = total_wall;

  if (agg.n_success == 0) {
    write_text_file((dir / "metadata.json").string(), meta.dump(2) + "\n");
    throw NumericError("all runs failed for schedule " + schedule.label());
  }

  CellResult cell{schedule, std::move(agg), {}, {}};
  cell.stats = trend_report(cell.agg);
  write_text_file((dir / "aggregate.csv").string(), aggregate_csv(cell.agg));
  write_text_file((dir / "summary.json").string(), stats_json(cell.stats).dump(2) + "\n");
  write_text_file((dir / "metadata.json").string(), meta.dump(2) + "\n");
  write_text_file((dir / "final_points.json").string(), final_points.dump(2) + "\n");
  cell.meta = std::move(meta);
  return cell;
}

int run_or_sweep(const CliOptions& opts, bool sweep) {
  ExperimentConfig config = load_experiment(opts);
  if (sweep && config.schedules.empty())
    throw ConfigError("sweep needs a nonempty schedules grid");
  if (!sweep && config.schedules.size() != 1)
    throw ConfigError("run needs exactly one schedule (use sweep for grids)");

  const fs::path root = fs::path(output_root(opts, config.output_dir)) / config.name;
  fs::create_directories(root);
  write_text_file((root / "config.json").string(), config.to_json().dump(2) + "\n");

  if (!sweep) {
    const CellResult cell = run_cell(config, config.schedules[0], root);
    std::cout << "run " << config.name << ": " << cell.agg.n_success << "/"
              << config.n_runs << " runs ok, final full loss mean "
              << format_double(cell.stats.full_loss.mean.back()) << "\n";
    return kExitOk;
  }

  std::ostringstream comparison;
  comparison << "schedule,n_success,initial_full_loss_mean,final_full_loss_mean,"
                "final_rgrad_norm_mean,loss_ratio,rgrad_ratio,converging\n";
  int failures = 0;
  for (const auto& schedule : config.schedules) {
    try {
      const CellResult cell = run_cell(config, schedule, root / schedule.label());
      comparison << schedule.label() << ',' << cell.agg.n_success << ','
                 << format_double(cell.stats.full_loss.mean.front()) << ','
                 << format_double(cell.stats.full_loss.mean.back()) << ','
                 << format_double(cell.stats.rgrad_norm.mean.back()) << ','
                 << format_double(cell.stats.loss_trend.ratio) << ','
                 << format_double(cell.stats.rgrad_trend.ratio) << ','
                 << (cell.stats.converging ? "true" : "false") << '\n';
      std::cout << "sweep cell " << schedule.label() << ": ok\n";
    } catch (const NumericError& e) {
      // record and continue with the remaining cells
      comparison << schedule.label() << ",0,,,,,,failed\n";
      std::cerr << "sweep cell " << schedule.label() << " failed: " << e.what()
                << "\n";
      ++failures;
    }
  }
  write_text_file((root / "comparison.csv").string(), comparison.str());
  if (failures == static_cast<int>(config.schedules.size())) return kExitNumeric;
  return kExitOk;
}

// ---- check command -----------------------------------------------------------

ObjectivePtr build_check_objective(const Json& spec) {
  ObjectivePtr obj = ProblemSpec::from_json(spec).build();
  if (spec.value("flip_subgrad_sign", false)) obj = flip_subgrad_sign(obj);
  return obj;
}

CurveSpec build_curve(const Json& j, const ObjectivePtr& obj) {
  const std::string type = j.at("type").get<std::string>();
  CounterRng rng(j.value("seed", std::uint64_t{0}));
  const int t_steps = j.value("t_steps", 64);
  if (type == "random_geodesic") {
    const ManifoldPoint x = random_point(obj->descriptor(), rng);
    const TangentVector v = random_tangent(x, rng, j.value("norm", 0.5));
    return CurveSpec::geodesic(x, v, t_steps);
  }
  if (type == "random_loop") {
    return random_loop(obj->descriptor(), j.value("vertices", 3),
                       j.value("radius", 0.4), t_steps, rng);
  }
  if (type == "positive_orthant_loop") {
    // loop confined to the all-positive orthant of a sphere, where the l1
    // objective is smooth
    const ManifoldDescriptor& d = obj->descriptor();
    if (d.kind() != ManifoldDescriptor::Kind::Sphere)
      throw ConfigError("positive_orthant_loop needs a sphere objective");
    Matrix base = gaussian_matrix(d.dims()[0], 1, j.value("seed", std::uint64_t{0}));
    base = base.cwiseAbs() + Matrix::Constant(d.dims()[0], 1, 0.5);
    base /= base.norm();
    const ManifoldPoint x = make_point(d, {base});
    const double radius = j.value("radius", 0.15);
    const int n_vertices = j.value("vertices", 3);
    std::vector<ManifoldPoint> vertices;
    for (int i = 0; i < n_vertices; ++i) {
      ManifoldPoint p = retract(x, random_tangent(x, rng, radius));
      if (p.data[0].minCoeff() <= 0.05)
        p = x;  // keep safely inside the orthant
      vertices.push_back(std::move(p));
    }
    return CurveSpec::loop(std::move(vertices), t_steps);
  }
  throw ConfigError("unknown curve type: " + type);
}

CheckReport run_one_check(const Json& j) {
  const std::string name = j.at("name").get<std::string>();
  CounterRng rng(j.value("seed", std::uint64_t{0}));
  if (name == "retraction_axioms") {
    const ManifoldDescriptor d = descriptor_from_json(j.at("descriptor"));
    RetractionFn fn;
    if (j.contains("retraction_scale"))
      fn = scaled_retraction(j.at("retraction_scale").get<double>());
    return check_retraction_axioms(d, j.value("n_points", 5), j.value("n_dirs", 3),
                                   rng, fn);
  }
  if (name == "chain_rule") {
    ObjectivePtr obj = build_check_objective(j.at("objective"));
    const CurveSpec curve = build_curve(j.at("curve"), obj);
    return check_chain_rule(*obj, curve, j.value("tolerance", 1e-5),
                            j.value("fail_budget", 0.05));
  }
  if (name == "loop_integral") {
    ObjectivePtr obj = build_check_objective(j.at("objective"));
    const CurveSpec loop = build_curve(j.at("loop"), obj);
    return check_loop_integral(*obj, loop, j.value("rel_tol", 1e-6));
  }
  if (name == "grad_ae") {
    ObjectivePtr obj = build_check_objective(j.at("objective"));
    return check_grad_ae(*obj, j.value("n_points", 100), rng,
                         j.value("rel_tol", 1e-4),
                         j.value("min_pass_fraction", 0.95));
  }
  if (name == "lipschitz_gradient") {
    ObjectivePtr obj = build_check_objective(j.at("objective"));
    return check_lipschitz_gradient(*obj, j.value("radius", 0.1),
                                    j.value("n_pairs", 100), rng);
  }
  throw ConfigError("unknown check name: " + name);
}

Json default_check_suite() {
  return Json::array({
      {{"name", "retraction_axioms"},
       {"descriptor", {{"kind", "sphere"}, {"dims", {10}}}},
       {"n_points", 5},
       {"n_dirs", 3},
       {"seed", 11}},
      {{"name", "retraction_axioms"},
       {"descriptor", {{"kind", "stiefel"}, {"dims", {10, 3}}}},
       {"n_points", 5},
       {"n_dirs", 3},
       {"seed", 12}},
      {{"name", "retraction_axioms"},
       {"descriptor", {{"kind", "fixed_rank"}, {"dims", {20, 20, 3}}}},
       {"n_points", 5},
       {"n_dirs", 3},
       {"seed", 13}},
      {{"name", "chain_rule"},
       {"objective",
        {{"type", "sparse_pca"}, {"n", 8}, {"p_cols", 2}, {"rho", 0.0},
         {"seed", 21}, {"normalize", true}}},
       {"curve", {{"type", "random_geodesic"}, {"t_steps", 64}, {"seed", 22}}}},
      {{"name", "chain_rule"},
       {"objective", {{"type", "l1_sphere"}, {"n", 3}}},
       {"curve",
        {{"type", "random_geodesic"}, {"t_steps", 64}, {"norm", 0.4}, {"seed", 23}}}},
      {{"name", "loop_integral"},
       {"objective",
        {{"type", "sparse_pca"}, {"n", 5}, {"p_cols", 2}, {"rho", 0.0},
         {"seed", 31}, {"normalize", true}}},
       {"loop",
        {{"type", "random_loop"}, {"vertices", 3}, {"radius", 0.4},
         {"t_steps", 64}, {"seed", 32}}}},
      {{"name", "loop_integral"},
       {"objective", {{"type", "l1_sphere"}, {"n", 3}}},
       {"loop",
        {{"type", "positive_orthant_loop"}, {"vertices", 3}, {"radius", 0.15},
         {"t_steps", 64}, {"seed", 33}}}},
      {{"name", "grad_ae"},
       {"objective",
        {{"type", "matrix_completion"}, {"m", 15}, {"n", 15}, {"rank", 3},
         {"sigma", 0.0}, {"seed", 41}}},
       {"n_points", 60},
       {"seed", 42}},
      {{"name", "lipschitz_gradient"},
       {"objective",
        {{"type", "sparse_pca"}, {"n", 8}, {"p_cols", 2}, {"rho", 0.0},
         {"seed", 51}, {"normalize", true}}},
       {"radius", 0.1},
       {"n_pairs", 100},
       {"seed", 52}},
  });
}

}  // namespace

int cmd_run(const CliOptions& opts) { return run_or_sweep(opts, false); }

int cmd_sweep(const CliOptions& opts) { return run_or_sweep(opts, true); }

int cmd_check(const CliOptions& opts) {
  const Json config = read_json_file(opts.config_path);
  const std::string name = config.value("name", std::string("checks"));
  Json checks = config.value("checks", Json("default"));
  if (checks.is_string() && checks.get<std::string>() == "default")
    checks = default_check_suite();
  if (!checks.is_array() || checks.empty())
    throw ConfigError("check config needs a nonempty checks array or \"default\"");

  const fs::path root =
      fs::path(output_root(opts, config.value("output_dir", std::string("out")))) /
      name;
  fs::create_directories(root);

  bool all_pass = true;
  int idx = 0;
  for (const auto& entry : checks) {
    const CheckReport report = run_one_check(entry);
    char fname[64];
    std::snprintf(fname, sizeof fname, "%02d_%s.json", idx,
                  report.name.c_str());
    write_text_file((root / fname).string(),
                    check_report_to_json(report).dump(2) + "\n");
    std::cout << (report.pass ? "[PASS] " : "[FAIL] ") << report.name
              << " (defect " << format_double(report.max_defect) << ", tol "
              << format_double(report.tolerance) << ")\n";
    all_pass = all_pass && report.pass;
    ++idx;
  }
  return all_pass ? kExitOk : kExitCheckFailure;
}

int cmd_gen(const CliOptions& opts) {
  const Json config = read_json_file(opts.config_path);
  const std::string type = config.at("type").get<std::string>();
  const std::uint64_t seed =
      opts.seed ? *opts.seed : config.value("seed", std::uint64_t{0});

  const fs::path root =
      output_root(opts, config.value("out_dir", std::string("instances")));
  fs::create_directories(root);
  const std::string name = config.value("name", type + "_" + std::to_string(seed));

  const fs::path meta_path = root / (name + ".json");
  Json inst;
  inst["type"] = type;
  inst["seed"] = seed;
  inst["rng"] = CounterRng::kName;

  std::string payload_name;
  if (type == "sparse_pca") {
    const Index n = config.at("n").get<Index>();
    if (n < 1) throw ConfigError("gen sparse_pca: n must be >= 1");
    Matrix a = gaussian_matrix(n, n, seed);
    if (config.value("normalize", false)) {
      a = normalize_spectral(a);
      inst["normalized_spectral"] = true;
    }
    payload_name = name + ".csv";
    inst["n"] = n;
    const fs::path payload_path = root / payload_name;
    if (!opts.force && (fs::exists(meta_path) || fs::exists(payload_path)))
      throw ConfigError("gen: output exists, pass --force to overwrite");
    write_matrix_csv(payload_path.string(), a);
  } else if (type == "matrix_completion") {
    const Index m = config.at("m").get<Index>();
    const Index n = config.at("n").get<Index>();
    const Index rank = config.at("rank").get<Index>();
    if (m < 1 || n < 1) throw ConfigError("gen matrix_completion: m, n must be >= 1");
    const Matrix a = normalized_rank_projected(gaussian_matrix(m, n, seed), rank);
    payload_name = name + ".csv";
    inst["m"] = m;
    inst["n"] = n;
    inst["rank"] = rank;
    inst["normalized_frobenius"] = true;
    inst["rank_projected"] = true;
    const fs::path payload_path = root / payload_name;
    if (!opts.force && (fs::exists(meta_path) || fs::exists(payload_path)))
      throw ConfigError("gen: output exists, pass --force to overwrite");
    write_matrix_csv(payload_path.string(), a);
  } else if (type == "libsvm_synthetic") {
    const Index n_rows = config.at("n_rows").get<Index>();
    const Index dim = config.at("dim").get<Index>();
    const Dataset ds = make_synthetic_regression(n_rows, dim, seed);
    payload_name = name + ".libsvm";
    inst["n_rows"] = n_rows;
    inst["dim"] = dim;
    const fs::path payload_path = root / payload_name;
    if (!opts.force && (fs::exists(meta_path) || fs::exists(payload_path)))
      throw ConfigError("gen: output exists, pass --force to overwrite");
    write_libsvm(payload_path.string(), ds);
  } else {
    throw ConfigError("unknown gen type: " + type);
  }

  inst["payload"] = payload_name;
  inst["payload_format"] = type == "libsvm_synthetic" ? "libsvm" : "csv";
  write_text_file(meta_path.string(), inst.dump(2) + "\n");
  std::cout << "wrote " << meta_path.string() << "\n";
  return kExitOk;
}

}  // namespace rsgd
