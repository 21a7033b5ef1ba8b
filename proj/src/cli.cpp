#include "gpsq/cli.hpp"

#include "gpsq/io.hpp"
#include "gpsq/model_io.hpp"
#include "gpsq/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

namespace gpsq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "schema_version", "system",           "overrides",          "families",         "n_train",
    "runs",           "restarts",         "max_iters",          "seed",             "sigma_y",
    "grid_points",    "out",              "trajectory_states",  "trajectory_t_end", "trajectory_points",
    "transfer_target", "transfer_family", "transfer_n_train",   "abar_n_train",     "abar_grid_points"};

std::string run_tag(int run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03d", run);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string with_header(const ExperimentConfig& cfg, const std::string& body) {
  return provenance_line(config_hash(cfg)) + "\n" + body;
}

BenchmarkSystem system_of(const ExperimentConfig& cfg) { return make_system(cfg.system, cfg.overrides); }

// Dataset for `run`, generated on demand. Generation is deterministic, so an
// existing file is reused as is.
Dataset ensure_dataset(const ExperimentConfig& cfg, const BenchmarkSystem& sys, int run, std::ostream& log) {
  const fs::path path = output_paths(cfg).dataset(run);
  if (fs::exists(path) && fs::exists(sidecar_path(path))) return load_dataset(path);
  const Dataset d = make_dataset(sys, cfg.n_train, cfg.sigma_y, data_seed(cfg, run));
  save_dataset(d, path, config_hash(cfg));
  log << "wrote " << path.string() << "\n";
  return d;
}

// Matrix columns as CSV, each block prefixed by its name.
struct Columns {
  std::vector<std::string> names;
  std::vector<const Matrix*> blocks;
  std::vector<std::vector<std::string>> labels;

  void add(const Matrix& m, std::vector<std::string> l) {
    blocks.push_back(&m);
    labels.push_back(std::move(l));
  }
  std::string csv() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& l : labels)
      for (const auto& name : l) {
        out << (first ? "" : ",") << name;
        first = false;
      }
    out << '\n';
    const Eigen::Index rows = blocks.empty() ? 0 : blocks.front()->rows();
    for (Eigen::Index k = 0; k < rows; ++k) {
      first = true;
      for (const Matrix* m : blocks)
        for (Eigen::Index c = 0; c < m->cols(); ++c) {
          out << (first ? "" : ",") << format_double((*m)(k, c));
          first = false;
        }
      out << '\n';
    }
    return out.str();
  }
};

std::vector<std::string> numbered(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

std::vector<std::string> input_columns(const InputLayout& layout) {
  auto cols = dataset_columns(layout);
  cols.resize(static_cast<std::size_t>(layout.dim()));
  return cols;
}

}  // namespace

// ------------------------------------------------------------ config

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  ExperimentConfig c;
  try {
    if (j.at("schema_version").get<int>() != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version " + j.at("schema_version").dump());
    }
    c.system = j.value("system", c.system);
    c.overrides = j.value("overrides", c.overrides);
    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : j.at("families")) c.families.push_back(parse_family(f.get<std::string>()));
    }
    c.n_train = j.value("n_train", c.n_train);
    c.runs = j.value("runs", c.runs);
    c.restarts = j.value("restarts", c.restarts);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.seed = j.value("seed", c.seed);
    c.sigma_y = j.value("sigma_y", c.sigma_y);
    c.grid_points = j.value("grid_points", c.grid_points);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    c.trajectory_states = j.value("trajectory_states", c.trajectory_states);
    c.trajectory_t_end = j.value("trajectory_t_end", c.trajectory_t_end);
    c.trajectory_points = j.value("trajectory_points", c.trajectory_points);
    c.transfer_target = j.value("transfer_target", c.transfer_target);
    if (j.contains("transfer_family")) c.transfer_family = parse_family(j.at("transfer_family").get<std::string>());
    c.transfer_n_train = j.value("transfer_n_train", c.transfer_n_train);
    c.abar_n_train = j.value("abar_n_train", c.abar_n_train);
    c.abar_grid_points = j.value("abar_grid_points", c.abar_grid_points);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  try {
    make_system(c.system, c.overrides);
    make_system(c.transfer_target, c.overrides);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (c.families.empty()) throw ConfigError("no model families selected");
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (c.n_train < 1 || c.transfer_n_train < 1 || c.abar_n_train < 1) throw ConfigError("training sizes must be >= 1");
  if (c.restarts < 0 || c.max_iters < 1) throw ConfigError("restarts must be >= 0 and max_iters >= 1");
  if (!(c.sigma_y >= 0.0) || !std::isfinite(c.sigma_y)) throw ConfigError("sigma_y must be finite and >= 0");
  if (c.grid_points < 0 || c.grid_points == 1 || c.abar_grid_points < 2) {
    throw ConfigError("grid resolutions must be >= 2 points per dimension");
  }
  if (c.trajectory_states < 1 || c.trajectory_points < 1 || !(c.trajectory_t_end > 0.0)) {
    throw ConfigError("trajectory settings must be positive");
  }
  if (!is_gp2(c.transfer_family)) throw ConfigError("transfer_family must be a GP2 family");
}

std::string canonical_config(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["system"] = c.system;
  j["overrides"] = c.overrides;
  json fams = json::array();
  for (Family f : c.families) fams.push_back(family_name(f));
  j["families"] = fams;
  j["n_train"] = c.n_train;
  j["runs"] = c.runs;
  j["restarts"] = c.restarts;
  j["max_iters"] = c.max_iters;
  j["seed"] = c.seed;
  j["sigma_y"] = c.sigma_y;
  j["grid_points"] = c.grid_points;
  j["trajectory_states"] = c.trajectory_states;
  j["trajectory_t_end"] = c.trajectory_t_end;
  j["trajectory_points"] = c.trajectory_points;
  j["transfer_target"] = c.transfer_target;
  j["transfer_family"] = family_name(c.transfer_family);
  j["transfer_n_train"] = c.transfer_n_train;
  j["abar_n_train"] = c.abar_n_train;
  j["abar_grid_points"] = c.abar_grid_points;
  return j.dump();
}

std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(canonical_config(c)); }

int effective_grid_points(const ExperimentConfig& c) {
  if (c.grid_points > 0) return c.grid_points;
  return c.system == "duffing" ? 10 : 3;
}

fs::path OutputPaths::dataset(int run) const { return root / "data" / (run_tag(run) + ".csv"); }
fs::path OutputPaths::model(Family f, int run) const { return root / "models" / family_name(f) / (run_tag(run) + ".json"); }
fs::path OutputPaths::trace(Family f, int run) const {
  return root / "models" / family_name(f) / (run_tag(run) + ".trace.csv");
}

OutputPaths output_paths(const ExperimentConfig& c) { return {c.out / c.system}; }

std::uint64_t data_seed(const ExperimentConfig& c, int run) { return derive_seed(c.seed, static_cast<std::uint64_t>(run)); }

std::uint64_t fit_seed(const ExperimentConfig& c, Family f, int run) {
  return derive_seed(data_seed(c, run), 1000 + static_cast<std::uint64_t>(f));
}

// ------------------------------------------------------------ commands

int cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
  const BenchmarkSystem sys = system_of(cfg);
  const OutputPaths paths = output_paths(cfg);
  for (int r = 0; r < cfg.runs; ++r) {
    const Dataset d = make_dataset(sys, cfg.n_train, cfg.sigma_y, data_seed(cfg, r));
    save_dataset(d, paths.dataset(r), config_hash(cfg));
    log << "wrote " << paths.dataset(r).string() << "\n";
  }
  return kExitOk;
}

int cmd_fit(const ExperimentConfig& cfg, std::ostream& log) {
  const BenchmarkSystem sys = system_of(cfg);
  const OutputPaths paths = output_paths(cfg);
  std::ostringstream status;
  status << "family,run,seed,status,lml,best_restart,runtime_s\n";
  int failures = 0, total = 0;
  for (int r = 0; r < cfg.runs; ++r) {
    const Dataset d = ensure_dataset(cfg, sys, r, log);
    for (Family f : cfg.families) {
      ++total;
      TrainConfig tc;
      tc.restarts = cfg.restarts;
      tc.max_iters = cfg.max_iters;
      tc.seed = fit_seed(cfg, f, r);
      const auto t0 = std::chrono::steady_clock::now();
      status << family_name(f) << ',' << r << ',' << tc.seed << ',';
      try {
        const FitResult res = fit(f, sys, d, tc);
        save_model(res.best, paths.model(f, r), paths.dataset(r), cfg.overrides, config_hash(cfg), res.best_restart);
        write_file_atomic(paths.trace(f, r), with_header(cfg, traces_csv(res.traces)));
        status << "ok," << format_double(res.best.lml()) << ',' << res.best_restart;
        log << family_name(f) << " run " << r << ": lml " << res.best.lml() << "\n";
      } catch (const TrainingError& e) {
        ++failures;
        write_file_atomic(paths.trace(f, r), with_header(cfg, traces_csv(e.traces())));
        status << "failed,nan,-1";
        log << family_name(f) << " run " << r << ": " << e.what() << "\n";
      } catch (const NumericalError& e) {
        ++failures;
        status << "failed,nan,-1";
        log << family_name(f) << " run " << r << ": " << e.what() << "\n";
      }
      status << ',' << format_double(seconds_since(t0)) << '\n';
    }
  }
  write_file_atomic(paths.root / "models" / "fit_status.csv", with_header(cfg, status.str()));
  if (failures == total) return kExitNumerical;
  return failures > 0 ? kExitPartial : kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  const BenchmarkSystem sys = system_of(cfg);
  const OutputPaths paths = output_paths(cfg);
  const Matrix grid = prediction_grid(sys, effective_grid_points(cfg));
  const Matrix truth = analytic_targets(sys, grid);
  const NormStats grid_norm = NormStats::compute(grid, truth);

  // Fit runtimes, when available, are carried into the report.
  std::map<std::pair<std::string, int>, double> runtime;
  const fs::path status_path = paths.root / "models" / "fit_status.csv";
  if (fs::exists(status_path)) {
    std::istringstream in(read_file(status_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("family,", 0) == 0) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
      if (f.size() == 7) runtime[{f[0], std::stoi(f[1])}] = std::stod(f[6]);
    }
  }

  std::vector<RunRecord> records;
  int gaps = 0;
  for (int r = 0; r < cfg.runs; ++r) {
    const bool have_data = fs::exists(paths.dataset(r));
    const NormStats norm = have_data ? load_dataset(paths.dataset(r)).norm : grid_norm;
    records.push_back({sys.name, "analytic", r, data_seed(cfg, r), rmse_normalized(truth, truth, norm),
                       max_constraint_error(truth, grid, sys.layout, sys.constraint), 0.0, "ok"});
  }
  for (Family f : cfg.families) {
    for (int r = 0; r < cfg.runs; ++r) {
      RunRecord rec{sys.name, family_name(f), r, fit_seed(cfg, f, r), 0.0, 0.0, 0.0, "ok"};
      const auto rt = runtime.find({rec.family, r});
      if (rt != runtime.end()) rec.runtime_s = rt->second;
      const fs::path mp = paths.model(f, r);
      if (!fs::exists(mp)) {
        rec.status = "missing";
        ++gaps;
      } else {
        try {
          const FittedModel m = load_model(mp);
          const Matrix mean = m.predict(grid, Covariance::none).mean;
          rec.rmse = rmse_normalized(mean, truth, m.data().norm);
          rec.max_constraint_error = max_constraint_error(mean, grid, sys.layout, sys.constraint);
        } catch (const std::exception& e) {
          rec.status = "failed";
          ++gaps;
          log << mp.string() << ": " << e.what() << "\n";
        }
      }
      records.push_back(rec);
    }
  }
  const auto cells = summarize(records);
  write_file_atomic(paths.report_dir() / "runs.csv", with_header(cfg, runs_csv(records)));
  write_file_atomic(paths.report_dir() / "summary.csv", with_header(cfg, summary_csv(cells)));
  const std::string table = summary_table(cells);
  write_file_atomic(paths.report_dir() / "table.txt", with_header(cfg, table));
  log << table;
  return gaps > 0 ? kExitPartial : kExitOk;
}

int cmd_trajectory(const ExperimentConfig& cfg, std::ostream& log) {
  const BenchmarkSystem sys = system_of(cfg);
  const OutputPaths paths = output_paths(cfg);
  const Matrix X0 = sample_constrained_inputs(sys, cfg.trajectory_states, derive_seed(cfg.seed, 7001));
  RolloutOptions opt;
  opt.t_end = cfg.trajectory_t_end;
  opt.report_points = cfg.trajectory_points;

  std::vector<std::pair<std::string, std::shared_ptr<const FittedModel>>> sources = {{"analytic", nullptr}};
  int gaps = 0;
  for (Family f : cfg.families) {
    const fs::path mp = paths.model(f, 0);
    if (!fs::exists(mp)) {
      ++gaps;
      log << "no model " << mp.string() << ", skipping\n";
      continue;
    }
    sources.emplace_back(family_name(f), std::make_shared<const FittedModel>(load_model(mp)));
  }

  const bool surf = sys.name == "surface";
  std::ostringstream summary;
  summary << "source,state,complete,final_drift,max_drift" << (surf ? ",final_surface_distance" : "") << '\n';
  for (const auto& [name, model] : sources) {
    const AccelerationFn accel = model ? model_acceleration(*model) : analytic_acceleration(sys);
    for (Eigen::Index i = 0; i < X0.rows(); ++i) {
      State x0 = sys.layout.state(X0.row(i));
      x0.t = 0.0;
      x0.u.setZero();
      sys.project(x0, sys.theta_star());
      const Trajectory tr = rollout(sys, accel, x0, opt);
      if (!tr.complete) ++gaps;
      write_file_atomic(paths.trajectory_dir() / name / ("state_" + std::to_string(i) + ".csv"),
                        with_header(cfg, trajectory_csv(sys, tr)));
      const Vector drift = constraint_drift(sys, tr);
      summary << name << ',' << i << ',' << (tr.complete ? 1 : 0) << ',' << format_double(drift(drift.size() - 1))
              << ',' << format_double(drift.maxCoeff());
      if (surf) summary << ',' << format_double(surface_distance(sys, tr).tail(1)(0));
      summary << '\n';
    }
    log << "rolled out " << name << "\n";
  }
  write_file_atomic(paths.trajectory_dir() / "summary.csv", with_header(cfg, summary.str()));
  return gaps > 0 ? kExitPartial : kExitOk;
}

int cmd_transfer(const ExperimentConfig& cfg, std::ostream& log) {
  const BenchmarkSystem sys = system_of(cfg);
  const BenchmarkSystem target = make_system(cfg.transfer_target, cfg.overrides);
  if (target.layout.n != sys.layout.n || target.layout.n_u != sys.layout.n_u) {
    throw ConfigError("transfer target '" + target.name + "' does not share the source's coordinates");
  }
  const OutputPaths paths = output_paths(cfg);
  const Dataset d = make_dataset(sys, cfg.transfer_n_train, cfg.sigma_y, derive_seed(cfg.seed, 7002));
  const fs::path data_path = paths.transfer_dir() / "source.csv";
  save_dataset(d, data_path, config_hash(cfg));
  TrainConfig tc;
  tc.restarts = cfg.restarts;
  tc.max_iters = cfg.max_iters;
  tc.seed = derive_seed(cfg.seed, 7003);
  const FitResult res = fit(cfg.transfer_family, sys, d, tc);
  save_model(res.best, paths.transfer_dir() / "model.json", data_path, cfg.overrides, config_hash(cfg),
             res.best_restart);

  const Matrix grid = prediction_grid(target, effective_grid_points(cfg));
  const Matrix truth = analytic_targets(target, grid);
  const Prediction p = res.best.gp2().transfer(target.constraint, grid, Covariance::marginal);
  // Zero-data reference: the same model's prior pushed through the target constraint.
  const Gp2Posterior prior(res.best.gp2().model(), Matrix(0, sys.layout.dim()), Matrix(0, sys.layout.n));
  const Prediction p0 = prior.transfer(target.constraint, grid, Covariance::none);

  const int n = sys.layout.n;
  const Matrix sd = p.var.cwiseSqrt();
  Columns cols;
  cols.add(grid, input_columns(target.layout));
  cols.add(truth, numbered("truth", n));
  cols.add(p.mean, numbered("mean", n));
  cols.add(sd, numbered("std", n));
  cols.add(p0.mean, numbered("prior_mean", n));
  write_file_atomic(paths.transfer_dir() / "predictions.csv", with_header(cfg, cols.csv()));

  json s;
  s["config_hash"] = config_hash(cfg);
  s["gpsq_version"] = kVersion;
  s["source"] = sys.name;
  s["target"] = target.name;
  s["family"] = family_name(cfg.transfer_family);
  s["grid_points"] = grid.rows();
  s["rmse_transfer"] = rmse_normalized(p.mean, truth, d.norm);
  s["rmse_prior"] = rmse_normalized(p0.mean, truth, d.norm);
  s["max_constraint_error"] = max_constraint_error(p.mean, grid, target.layout, target.constraint);
  write_file_atomic(paths.transfer_dir() / "summary.json", s.dump(2) + "\n");
  log << s.dump(2) << "\n";
  return kExitOk;
}

int cmd_infer_abar(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.system != "surface") throw ConfigError("infer-abar is defined for the surface system");
  SystemOverrides o = cfg.overrides;
  o["velocity_range"] = {0.0};
  o["control_range"] = {0.0};
  const BenchmarkSystem sys = make_system("surface", o);
  const OutputPaths paths = output_paths(cfg);
  const Dataset d = make_dataset(sys, cfg.abar_n_train, cfg.sigma_y, derive_seed(cfg.seed, 7004));
  const fs::path data_path = paths.abar_dir() / "data.csv";
  save_dataset(d, data_path, config_hash(cfg));
  TrainConfig tc;
  tc.restarts = cfg.restarts;
  tc.max_iters = cfg.max_iters;
  tc.seed = derive_seed(cfg.seed, 7005);
  const FitResult res = fit(Family::gp2_fixed_zero, sys, d, tc);
  save_model(res.best, paths.abar_dir() / "model.json", data_path, o, config_hash(cfg), res.best_restart);

  const Matrix grid = prediction_grid(sys, cfg.abar_grid_points);
  const Prediction a = res.best.gp2().infer_abar(grid, Covariance::marginal);
  Matrix truth(grid.rows(), sys.layout.n);
  for (Eigen::Index k = 0; k < grid.rows(); ++k) truth.row(k) = sys.abar(sys.layout.state(grid.row(k))).transpose();
  const auto inside = inside_convex_hull(grid.leftCols(2), d.X.leftCols(2));
  Matrix in_hull(grid.rows(), 1);
  double worst = 0.0;
  int count = 0;
  for (Eigen::Index k = 0; k < grid.rows(); ++k) {
    in_hull(k, 0) = inside[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
    if (!inside[static_cast<std::size_t>(k)]) continue;
    ++count;
    worst = std::max(worst, std::abs(a.mean(k, 2) - truth(k, 2)));
  }
  const int n = sys.layout.n;
  const Matrix sd = a.var.cwiseSqrt();
  Columns cols;
  cols.add(grid, input_columns(sys.layout));
  cols.add(truth, numbered("abar_truth", n));
  cols.add(a.mean, numbered("abar_mean", n));
  cols.add(sd, numbered("abar_std", n));
  cols.add(in_hull, {"in_hull"});
  write_file_atomic(paths.abar_dir() / "abar.csv", with_header(cfg, cols.csv()));

  json s;
  s["config_hash"] = config_hash(cfg);
  s["gpsq_version"] = kVersion;
  s["points_in_hull"] = count;
  s["max_vertical_error_in_hull"] = worst;
  write_file_atomic(paths.abar_dir() / "summary.json", s.dump(2) + "\n");
  log << s.dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------ front-end

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gauss-principle constrained Gaussian processes", "gpsq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, system, families, out_dir;
  int runs = 0, n_train = 0, restarts = -1, max_iters = 0, grid_points = -1;
  std::uint64_t seed = 0;
  double sigma_y = -1.0;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--system", system, "surface | unicycle | duffing");
  app.add_option("--families", families, "comma-separated model families");
  app.add_option("--runs", runs, "independent runs")->check(CLI::PositiveNumber);
  app.add_option("--n-train", n_train, "training points per run")->check(CLI::PositiveNumber);
  app.add_option("--restarts", restarts, "optimizer restarts (0: family default)")->check(CLI::NonNegativeNumber);
  app.add_option("--max-iters", max_iters, "optimizer iterations per restart")->check(CLI::PositiveNumber);
  app.add_option("--grid-points", grid_points, "prediction grid points per free dimension");
  app.add_option("--sigma-y", sigma_y, "relative observation noise");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { seed = s; seed_set = true; },
                                         "master seed");
  app.add_option("--out", out_dir, "output root (default $GPSQ_OUT or ./gpsq-out)");

  using Cmd = int (*)(const ExperimentConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> commands = {
      {"generate", "sample training datasets", cmd_generate},
      {"fit", "fit every family on every run", cmd_fit},
      {"report", "RMSE and constraint-error table", cmd_report},
      {"trajectory", "RK45 rollouts from analytic and fitted models", cmd_trajectory},
      {"transfer", "predict a second constraint from source data", cmd_transfer},
      {"infer-abar", "posterior of the unconstrained acceleration", cmd_infer_abar},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = parse_config(read_file(config_path));
    if (const char* env = std::getenv("GPSQ_OUT"); env && *env && out_dir.empty() && config_path.empty()) {
      cfg.out = env;
    }
    if (!system.empty()) cfg.system = system;
    if (!families.empty()) {
      cfg.families.clear();
      std::stringstream ss(families);
      for (std::string f; std::getline(ss, f, ',');) {
        try {
          cfg.families.push_back(parse_family(f));
        } catch (const DomainError& e) {
          throw ConfigError(e.what());
        }
      }
    }
    if (runs > 0) cfg.runs = runs;
    if (n_train > 0) cfg.n_train = n_train;
    if (restarts >= 0) cfg.restarts = restarts;
    if (max_iters > 0) cfg.max_iters = max_iters;
    if (grid_points >= 0) cfg.grid_points = grid_points;
    if (sigma_y >= 0.0) cfg.sigma_y = sigma_y;
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    validate(cfg);

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, out);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gpsq
