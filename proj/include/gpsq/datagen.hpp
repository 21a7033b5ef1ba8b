#pragma once

#include "gpsq/systems.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace gpsq {

/// Per-column mean and standard deviation of inputs and targets.
/// Standard deviations below 1e-12 are replaced by 1 so constant columns
/// (time in autonomous systems) pass through unscaled.
struct NormStats {
  Vector x_mean, x_std;
  Vector y_mean, y_std;

  static NormStats compute(const Matrix& X, const Matrix& Y);
  static NormStats identity(int dx, int dy);

  Matrix normalize_x(const Matrix& X) const;
  Matrix denormalize_x(const Matrix& Xn) const;
  Matrix normalize_y(const Matrix& Y) const;
  Matrix denormalize_y(const Matrix& Yn) const;
};

struct Dataset {
  Matrix X;  // N x D rows (q, qdot, t, u)
  Matrix Y;  // N x n noisy accelerations
  double sigma_y = 0.0;
  NormStats norm;
  std::string system_name;
  Vector theta_p_used;
  InputLayout layout;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return X.rows(); }
};

inline constexpr double kDefaultSigmaY = 1e-2;

/// Uniform draws over the system's domain, projected onto the constraint
/// manifold. Deterministic in `seed`.
Matrix sample_constrained_inputs(const BenchmarkSystem& sys, int count, std::uint64_t seed);

/// Targets are analytic UKE accelerations plus Gaussian noise whose standard
/// deviation is sigma_y times the per-output spread of the noiseless targets.
Dataset make_dataset(const BenchmarkSystem& sys, int count, double sigma_y, std::uint64_t seed);

/// Noise-free accelerations for each input row.
Matrix analytic_targets(const BenchmarkSystem& sys, const Matrix& X);

/// Equidistant Cartesian grid over the free columns, projected onto the
/// manifold. Rows = points_per_dim ^ free_cols().size().
Matrix prediction_grid(const BenchmarkSystem& sys, int points_per_dim);

/// Writes `path` (CSV) and its sidecar `sidecar_path(path)` (JSON).
void save_dataset(const Dataset& data, const std::filesystem::path& path,
                  const std::string& config_hash = "none");
Dataset load_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Column names q1..qn, qd1..qdn, t, u1.., y1..yn.
std::vector<std::string> dataset_columns(const InputLayout& layout);

}  // namespace gpsq
