#pragma once

#include "gpsq/eval.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpsq {

/// Invalid experiment configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitPartial = 4 };

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  std::string system = "surface";
  SystemOverrides overrides;
  std::vector<Family> families = all_families();
  int n_train = 100;
  int runs = 10;
  int restarts = 0;  // 0: family default
  int max_iters = 200;
  std::uint64_t seed = 0;
  double sigma_y = kDefaultSigmaY;
  int grid_points = 0;  // per free dimension; 0: 10 for duffing, 3 otherwise
  std::filesystem::path out = "gpsq-out";

  int trajectory_states = 5;
  double trajectory_t_end = 10.0;
  int trajectory_points = 100;

  std::string transfer_target = "surface_transfer";
  Family transfer_family = Family::gp2_fixed_zero;
  int transfer_n_train = 200;

  int abar_n_train = 100;
  int abar_grid_points = 15;
};

/// Parses JSON config text; unknown keys and a missing or wrong
/// schema_version are errors.
ExperimentConfig parse_config(const std::string& json_text);
/// Throws ConfigError if the system, families or counts are invalid.
void validate(const ExperimentConfig& cfg);
/// Canonical JSON (sorted keys, output directory excluded).
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);
int effective_grid_points(const ExperimentConfig& cfg);

/// Output layout under <out>/<system>/.
struct OutputPaths {
  std::filesystem::path root;
  std::filesystem::path dataset(int run) const;
  std::filesystem::path model(Family f, int run) const;
  std::filesystem::path trace(Family f, int run) const;
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path trajectory_dir() const { return root / "trajectory"; }
  std::filesystem::path transfer_dir() const { return root / "transfer"; }
  std::filesystem::path abar_dir() const { return root / "infer_abar"; }
};
OutputPaths output_paths(const ExperimentConfig& cfg);

std::uint64_t data_seed(const ExperimentConfig& cfg, int run);
std::uint64_t fit_seed(const ExperimentConfig& cfg, Family f, int run);

/// Each command returns an exit code and logs progress to `log`.
int cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_fit(const ExperimentConfig& cfg, std::ostream& log);
int cmd_report(const ExperimentConfig& cfg, std::ostream& log);
int cmd_trajectory(const ExperimentConfig& cfg, std::ostream& log);
int cmd_transfer(const ExperimentConfig& cfg, std::ostream& log);
int cmd_infer_abar(const ExperimentConfig& cfg, std::ostream& log);

/// Full front-end: argv[0] is ignored. Output root defaults to $GPSQ_OUT
/// when set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gpsq
