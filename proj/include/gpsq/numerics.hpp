#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gpsq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a computation cannot produce a finite, well-defined result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the Cholesky jitter ladder when every rung failed.
class NotPositiveDefiniteError : public NumericalError {
 public:
  NotPositiveDefiniteError(const std::string& what, double last_jitter)
      : NumericalError(what), last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// Invalid argument: shape mismatch, non-finite entries, invalid hyperparameters.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Diagonal regularization retried after a failed Cholesky factorization.
/// Jitter is relative to the mean of the diagonal and grows by `factor`
/// from `initial` until it exceeds `maximum`.
struct JitterPolicy {
  double initial = 1e-10;
  double maximum = 1e-4;
  double factor = 10.0;
};

/// Relative cutoff below which singular values are treated as zero.
inline constexpr double kPinvRtol = 1e-10;

bool all_finite(const Matrix& m);

/// Throws DomainError if any entry of `m` is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// rtol * sigma_max are truncated.
Matrix pseudo_inverse(const Matrix& m, double rtol = kPinvRtol);

/// Cholesky factor of a symmetric positive definite matrix together with
/// the absolute jitter that had to be added to the diagonal (0 if none).
class Cholesky {
 public:
  Cholesky() = default;
  Cholesky(const Matrix& spd, const JitterPolicy& policy);

  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;
  double log_det() const;
  /// Lower triangular factor L with L L^T = spd + jitter * I.
  Matrix lower() const { return llt_.matrixL(); }
  Matrix inverse() const;
  Eigen::Index size() const { return llt_.rows(); }
  double jitter() const { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

Matrix chol_solve(const Matrix& spd, const Matrix& rhs, const JitterPolicy& policy = {});
double log_det_chol(const Matrix& spd, const JitterPolicy& policy = {});

/// Smallest over largest singular value; 0 for an all-zero matrix.
double inverse_condition(const Matrix& m);

}  // namespace gpsq
