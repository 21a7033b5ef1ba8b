#pragma once

#include "gpsq/datagen.hpp"
#include "gpsq/gp2.hpp"
#include "gpsq/lbfgsb.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gpsq {

/// Model families compared in the benchmark table.
enum class Family { se, icm, lmc, gp2_fixed_zero, gp2_fixed_param, gp2_est_zero, gp2_est_param };

std::string family_name(Family f);
/// Throws DomainError for unknown names.
Family parse_family(std::string_view name);
std::vector<Family> all_families();
bool is_gp2(Family f);
bool estimates_theta(Family f);

struct TrainConfig {
  int restarts = 0;  // 0: 30 for baselines, 5 for GP2
  int max_iters = 200;
  double tol = 1e-6;  // absolute LML change
  int memory = 10;
  std::uint64_t seed = 0;
};

int default_restarts(Family f);

/// Hyperparameters of a fitted model plus the data it conditions on.
/// Baselines work on normalized data, GP2 on raw data; predictions are
/// always in raw units.
class FittedModel {
 public:
  FittedModel(Family family, BenchmarkSystem sys, Vector params, Dataset data);

  Family family() const { return family_; }
  const BenchmarkSystem& system() const { return sys_; }
  const Vector& params() const { return params_; }
  const Dataset& data() const { return data_; }
  double lml() const { return lml_; }
  /// Constraint parameters used by the model (true values for baselines
  /// and fixed-parameter GP2).
  Vector theta_p() const;
  Vector mean_params() const;

  Prediction predict(const Matrix& Xq, Covariance mode = Covariance::marginal) const;
  /// The underlying GP2 posterior; throws DomainError for baselines.
  const Gp2Posterior& gp2() const;

 private:
  Family family_;
  BenchmarkSystem sys_;
  Vector params_;
  Dataset data_;
  double lml_ = 0.0;
  std::shared_ptr<const PosteriorGP> baseline_;
  std::shared_ptr<const Gp2Posterior> gp2_;
};

/// Parameter vector layout, bounds and objective for one family on one
/// dataset. Positive hyperparameters are in log space; constraint and mean
/// parameters are raw.
class ModelTemplate {
 public:
  ModelTemplate(Family family, BenchmarkSystem sys, Dataset data);

  Family family() const { return family_; }
  Eigen::Index size() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const std::vector<std::string>& names() const { return names_; }

  /// Randomized start point, deterministic in (seed).
  Vector init(std::uint64_t seed) const;
  /// Log marginal likelihood and its gradient with respect to the packed
  /// parameters; analytic for kernel and noise blocks, central differences
  /// for constraint and mean parameters.
  double lml(const Vector& p, Vector* grad) const;
  FittedModel make(const Vector& p) const;

  /// Kernel over the training targets for packed parameters p.
  std::shared_ptr<const Kernel> kernel(const Vector& p) const;
  Vector noise(const Vector& p) const;
  Gp2Model gp2_model(const Vector& p) const;

 private:
  friend class FittedModel;
  void add(const std::string& name, double lo, double hi);

  Family family_;
  BenchmarkSystem sys_;
  Dataset data_;
  Matrix X_, Y_;   // what the GP sees (normalized for baselines)
  Vector x_scale_;  // per input column
  Vector y_scale_;  // per output, variance scale
  std::unique_ptr<Kernel> kernel_proto_;
  Eigen::Index n_kernel_ = 0, n_noise_ = 0, n_theta_ = 0, n_mean_ = 0;
  std::vector<int> theta_idx_;
  std::vector<std::string> names_;
  Vector lower_, upper_;
};

Vector init_hyperparameters(Family family, const BenchmarkSystem& sys, const Dataset& data,
                            std::uint64_t seed);

struct RestartTrace {
  int restart = 0;
  double initial_lml = 0.0;
  double final_lml = 0.0;
  int iterations = 0;
  std::vector<double> lml_history;
  std::string status;
  bool ok = false;
};

struct FitResult {
  FittedModel best;
  int best_restart = 0;
  std::vector<RestartTrace> traces;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::vector<RestartTrace> traces)
      : std::runtime_error(what), traces_(std::move(traces)) {}
  const std::vector<RestartTrace>& traces() const { return traces_; }

 private:
  std::vector<RestartTrace> traces_;
};

/// Multi-restart maximum likelihood. Restart r starts from
/// init(derive_seed(config.seed, r)); the best final LML wins, ties going
/// to the lowest restart index.
FitResult fit(Family family, const BenchmarkSystem& sys, const Dataset& data, const TrainConfig& config);

/// "restart,iter,lml" rows.
std::string traces_csv(const std::vector<RestartTrace>& traces);

}  // namespace gpsq
