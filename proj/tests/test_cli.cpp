#include "gpsq/cli.hpp"
#include "gpsq/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace gpsq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gpsq_test_cli" / name;
  fs::remove_all(dir);
  return dir;
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gpsq");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small, fast experiment on the Duffing system.
std::vector<std::string> small(const fs::path& out, const std::string& cmd) {
  return {cmd,          "--system",  "duffing",   "--runs", "2",     "--n-train",
          "20",         "--restarts", "1",        "--max-iters", "15", "--families",
          "se,gp2-fixed-zero", "--out", out.string()};
}

// CSV text without the runtime column and the provenance line.
std::string without_runtime(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i != 6) out << cells[i] << ',';
    }
    out << '\n';
  }
  return out.str();
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({"schema_version": 1, "system": "unicycle", "runs": 3,
      "families": ["se", "gp2-est-zero"], "overrides": {"mass": [2.0]}, "out": "x"})");
  CHECK(c.system == "unicycle");
  CHECK(c.runs == 3);
  CHECK(c.families == std::vector<Family>{Family::se, Family::gp2_est_zero});
  CHECK(c.overrides.at("mass") == std::vector<double>{2.0});
  CHECK(c.out == fs::path("x"));
  CHECK(c.n_train == ExperimentConfig{}.n_train);

  CHECK_THROWS_AS(parse_config(R"({"system": "surface"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "sistem": "surface"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "runs": "ten"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "families": ["gp3"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
}

TEST_CASE("validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate(c));
  c.system = "pendulum";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.overrides["mass"] = {-1.0};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.runs = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.sigma_y = std::nan("");
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.families.clear();
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.transfer_family = Family::se;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config hash ignores the output directory only") {
  ExperimentConfig a, b;
  b.out = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(parse_config(canonical_config(a)).families == a.families);
  CHECK(config_hash(parse_config(canonical_config(b))) == config_hash(b));
}

TEST_CASE("seeds differ per run and family") {
  ExperimentConfig c;
  CHECK(data_seed(c, 0) != data_seed(c, 1));
  CHECK(fit_seed(c, Family::se, 0) != fit_seed(c, Family::icm, 0));
  CHECK(fit_seed(c, Family::se, 0) != fit_seed(c, Family::se, 1));
  CHECK(fit_seed(c, Family::se, 0) != data_seed(c, 0));
}

TEST_CASE("front-end exit codes") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"bogus"}).code == kExitConfig);
  CHECK(cli({"generate", "--system", "pendulum"}).code == kExitConfig);
  CHECK(cli({"generate", "--runs", "0"}).code == kExitConfig);
  CHECK(cli({"generate", "--families", "se,nope"}).code == kExitConfig);
  CHECK(cli({"generate", "--config", "/nonexistent/cfg.json"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);

  const fs::path dir = scratch("badcfg");
  write_file_atomic(dir / "cfg.json", R"({"schema_version": 1, "bad_key": 1})");
  const Run r = cli({"generate", "--config", (dir / "cfg.json").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("bad_key") != std::string::npos);
}

TEST_CASE("generate is byte-for-byte reproducible") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  REQUIRE(cli(small(a, "generate")).code == kExitOk);
  REQUIRE(cli(small(b, "generate")).code == kExitOk);
  for (int r = 0; r < 2; ++r) {
    const std::string name = "duffing/data/run_00" + std::to_string(r) + ".csv";
    CHECK(read_file(a / name) == read_file(b / name));
  }
  CHECK(read_file(a / "duffing/data/run_000.csv") != read_file(a / "duffing/data/run_001.csv"));
  CHECK(count_files(a) == 4);  // two datasets with sidecars

  std::vector<std::string> other = small(b, "generate");
  other.insert(other.end(), {"--seed", "5"});
  REQUIRE(cli(other).code == kExitOk);
  CHECK(read_file(a / "duffing/data/run_000.csv") != read_file(b / "duffing/data/run_000.csv"));
}

TEST_CASE("config file and flags combine, flags win") {
  const fs::path dir = scratch("cfg");
  write_file_atomic(dir / "cfg.json", R"({"schema_version": 1, "system": "unicycle", "runs": 1, "n_train": 7})");
  REQUIRE(cli({"generate", "--config", (dir / "cfg.json").string(), "--n-train", "9", "--out", (dir / "o").string()})
              .code == kExitOk);
  CHECK(load_dataset(dir / "o/unicycle/data/run_000.csv").X.rows() == 9);
  CHECK_FALSE(fs::exists(dir / "o/unicycle/data/run_001.csv"));
}

TEST_CASE("output root defaults to the environment") {
  const fs::path dir = scratch("env");
  ::setenv("GPSQ_OUT", dir.c_str(), 1);
  const Run r = cli({"generate", "--system", "duffing", "--runs", "1", "--n-train", "5"});
  ::unsetenv("GPSQ_OUT");
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "duffing/data/run_000.csv"));
}

TEST_CASE("fit and report are reproducible and mark gaps") {
  const fs::path a = scratch("fit_a"), b = scratch("fit_b");
  REQUIRE(cli(small(a, "fit")).code == kExitOk);
  REQUIRE(cli(small(b, "fit")).code == kExitOk);
  // dataset, sidecar, model, trace for 2 families x 2 runs, plus status
  CHECK(count_files(a) == 2 * 2 + 2 * 2 * 2 + 1);
  CHECK(read_file(a / "duffing/models/se/run_001.json") == read_file(b / "duffing/models/se/run_001.json"));
  CHECK(read_file(a / "duffing/models/gp2-fixed-zero/run_000.trace.csv") ==
        read_file(b / "duffing/models/gp2-fixed-zero/run_000.trace.csv"));

  REQUIRE(cli(small(a, "report")).code == kExitOk);
  REQUIRE(cli(small(b, "report")).code == kExitOk);
  const std::string runs_a = read_file(a / "duffing/report/runs.csv");
  CHECK(without_runtime(runs_a) == without_runtime(read_file(b / "duffing/report/runs.csv")));
  const auto records = parse_runs_csv(runs_a);
  CHECK(records.size() == 3 * 2);  // analytic row per run plus two families
  for (const auto& rec : records) {
    CHECK(rec.status == "ok");
    if (rec.family == "analytic") CHECK(rec.rmse == 0.0);
    if (rec.family == "gp2-fixed-zero") CHECK(rec.max_constraint_error <= 1e-8);
  }
  CHECK(read_file(a / "duffing/report/table.txt").find("gp2-fixed-zero") != std::string::npos);

  fs::remove(a / "duffing/models/se/run_001.json");
  write_file_atomic(a / "duffing/models/gp2-fixed-zero/run_000.json", "{");
  const Run r = cli(small(a, "report"));
  CHECK(r.code == kExitPartial);
  int missing = 0, failed = 0;
  for (const auto& rec : parse_runs_csv(read_file(a / "duffing/report/runs.csv"))) {
    missing += rec.status == "missing";
    failed += rec.status == "failed";
  }
  CHECK(missing == 1);
  CHECK(failed == 1);
  CHECK(read_file(a / "duffing/report/summary.csv").find(",1,1,") != std::string::npos);
}

TEST_CASE("trajectory rollouts from analytic and fitted models") {
  const fs::path a = scratch("traj");
  REQUIRE(cli(small(a, "fit")).code == kExitOk);
  std::vector<std::string> args = small(a, "trajectory");
  args[12] = "se,gp2-fixed-zero,lmc";  // lmc was never fitted
  CHECK(cli(args).code == kExitPartial);
  const fs::path dir = a / "duffing/trajectory";
  CHECK(fs::exists(dir / "analytic/state_4.csv"));
  CHECK(fs::exists(dir / "gp2-fixed-zero/state_0.csv"));
  CHECK_FALSE(fs::exists(dir / "lmc"));
  const std::string summary = read_file(dir / "summary.csv");
  CHECK(summary.rfind("# gpsq ", 0) == 0);
  CHECK(summary.find("\nanalytic,0,1,") != std::string::npos);
}
