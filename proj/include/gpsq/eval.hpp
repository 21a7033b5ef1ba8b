#pragma once

#include "gpsq/rk45.hpp"
#include "gpsq/train.hpp"

#include <string>
#include <vector>

namespace gpsq {

/// RMSE of (pred - truth) / y_std pooled over all outputs and rows.
double rmse_normalized(const Matrix& pred, const Matrix& truth, const NormStats& norm);

/// max_k ||A(x_k) pred_k - b(x_k)||_inf with the constraint's own theta_p.
double max_constraint_error(const Matrix& pred, const Matrix& X, const InputLayout& layout,
                            const ConstraintModel& constraint);

// ------------------------------------------------------------ rollouts

using AccelerationFn = std::function<Vector(const State&)>;

AccelerationFn analytic_acceleration(const BenchmarkSystem& sys);
/// Posterior mean of a fitted model at a single state.
AccelerationFn model_acceleration(const FittedModel& model);

struct RolloutOptions {
  double t_end = 10.0;
  int report_points = 100;  // excluding the initial state
  OdeOptions ode;
};

/// Report times and states; rows of X use the system's input layout.
/// Controls stay at their initial value.
struct Trajectory {
  std::vector<double> t;
  Matrix X;
  bool complete = true;
  std::string status = "ok";
};

/// Integrates (q, qdot) with qddot from `accel`. An integration failure
/// returns the states reached so far with complete = false.
Trajectory rollout(const BenchmarkSystem& sys, const AccelerationFn& accel, const State& x0,
                   const RolloutOptions& opt = {});

/// |residual| of the system's constraint along the trajectory at the true
/// parameters (surface height error, unicycle rolling condition, Duffing
/// tracking offset).
Vector constraint_drift(const BenchmarkSystem& sys, const Trajectory& traj);

/// Euclidean distance from q to the surface q3 = h(q1, q2; theta).
double surface_distance(const Vector& q, const Vector& theta);

/// Surface distance along a trajectory of the "surface" system.
Vector surface_distance(const BenchmarkSystem& sys, const Trajectory& traj);

std::string trajectory_csv(const BenchmarkSystem& sys, const Trajectory& traj);

/// For each row of `points` (k x 2), whether it lies in the convex hull of
/// the rows of `cloud` (m x 2), boundary included.
std::vector<bool> inside_convex_hull(const Matrix& points, const Matrix& cloud);

// ------------------------------------------------------------ reports

/// One (system, family, run) cell. status is "ok", "missing" or "failed".
struct RunRecord {
  std::string system;
  std::string family;
  int run = 0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double max_constraint_error = 0.0;
  double runtime_s = 0.0;
  std::string status = "ok";
};

struct Stat {
  double mean = 0.0, min = 0.0, max = 0.0;
};

struct CellSummary {
  std::string system;
  std::string family;
  int runs = 0;  // records with status ok
  int gaps = 0;  // missing or failed
  Stat rmse;
  Stat constraint_error;
  double runtime_s = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// Groups by (system, family) in order of first appearance.
std::vector<CellSummary> summarize(const std::vector<RunRecord>& records);

std::string runs_csv(const std::vector<RunRecord>& records);
/// Inverse of runs_csv; throws ParseError.
std::vector<RunRecord> parse_runs_csv(const std::string& text);

std::string summary_csv(const std::vector<CellSummary>& cells);
/// Fixed-width table; cells without successful runs show "--".
std::string summary_table(const std::vector<CellSummary>& cells);

}  // namespace gpsq
