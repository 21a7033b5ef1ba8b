#pragma once

#include "gpsq/kernels.hpp"

#include <cstdint>
#include <functional>
#include <memory>

namespace gpsq {

/// Prior mean evaluated row-wise: X (N x D) -> N x n.
using MeanFunction = std::function<Matrix(const Matrix& X)>;

MeanFunction zero_mean(int outputs);

struct GPModel {
  MeanFunction mean;
  std::shared_ptr<const Kernel> kernel;
  Vector noise_var;  // one entry per output

  int outputs() const { return kernel->outputs(); }
};

/// Output-major flattening: y[i * N + k] = Y(k, i).
Vector flatten(const Matrix& Y);
Matrix unflatten(const Vector& y, int outputs);

enum class Covariance { none, marginal, full };

struct Prediction {
  Matrix mean;  // G x n
  Matrix var;   // G x n, filled for marginal and full
  Matrix cov;   // nG x nG, filled for full
};

/// Gaussian quantity jointly distributed with the observations of a
/// posterior: prior mean, cross-covariance with the training outputs
/// (rows target, columns observations) and its own prior covariance.
struct TargetPrior {
  Matrix mean;   // G x n
  Matrix cross;  // nG x nN
  Matrix var;    // G x n marginal prior variances
  Matrix cov;    // nG x nG, only needed for Covariance::full
};

class PosteriorGP {
 public:
  PosteriorGP(GPModel prior, Matrix X, Matrix Y, const JitterPolicy& policy = {});

  const GPModel& prior() const { return prior_; }
  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  Eigen::Index size() const { return X_.rows(); }
  /// (K + noise)^-1 (y - mu), output-major.
  const Vector& alpha() const { return alpha_; }
  double jitter() const { return chol_.jitter(); }

  Prediction predict(const Matrix& Xq, Covariance mode = Covariance::marginal) const;
  /// Conditions any target that is jointly Gaussian with the observations.
  Prediction condition_target(const TargetPrior& target, Covariance mode) const;

 private:
  GPModel prior_;
  Matrix X_, Y_;
  Cholesky chol_;
  Vector alpha_;
};

PosteriorGP condition(const GPModel& prior, const Matrix& X, const Matrix& Y,
                      const JitterPolicy& policy = {});

/// K(X, X) plus per-output noise on the diagonal.
Matrix noisy_gram(const GPModel& model, const Matrix& X);

double log_marginal_likelihood(const GPModel& model, const Matrix& X, const Matrix& Y,
                               const JitterPolicy& policy = {});

struct LmlGradient {
  double value = 0.0;
  Vector kernel;  // d/d kernel.params()
  Vector noise;   // d/d log noise_var
};

/// Analytic gradient 0.5 tr((alpha alpha^T - K^-1) dK). Block-diagonal
/// kernels are handled output by output.
LmlGradient lml_with_gradient(const GPModel& model, const Matrix& X, const Matrix& Y,
                              const JitterPolicy& policy = {});

/// Rows are independent draws from N(mean, cov). A zero covariance returns
/// copies of the mean.
Matrix sample_mvn(const Vector& mean, const Matrix& cov, int count, std::uint64_t seed,
                  const JitterPolicy& policy = {});

/// Draws of the flattened (output-major) function values at X.
Matrix sample_prior(const GPModel& model, const Matrix& X, int count, std::uint64_t seed);
Matrix sample_posterior(const PosteriorGP& post, const Matrix& Xq, int count, std::uint64_t seed);

}  // namespace gpsq
