#pragma once

#include "gpsq/numerics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gpsq {

/// Single-output covariance function k(x, x'). Positive hyperparameters are
/// exposed in log space through params()/set_params().
class ScalarKernel {
 public:
  virtual ~ScalarKernel() = default;
  virtual std::unique_ptr<ScalarKernel> clone() const = 0;
  virtual std::string kind() const = 0;

  virtual Vector params() const = 0;
  virtual void set_params(const Vector& p) = 0;
  virtual std::vector<std::string> param_names() const = 0;
  Eigen::Index num_params() const { return params().size(); }

  virtual Matrix gram(const Matrix& X1, const Matrix& X2) const = 0;
  /// Derivatives of gram(X, X) with respect to each entry of params().
  virtual std::vector<Matrix> gram_gradients(const Matrix& X) const = 0;
  virtual Vector diag(const Matrix& X) const = 0;
};

/// sigma_f^2 exp(-0.5 sum_d (x_d - x'_d)^2 / l_d^2) with ARD length-scales.
class SquaredExponential final : public ScalarKernel {
 public:
  SquaredExponential(double variance, Vector lengthscales);
  std::unique_ptr<ScalarKernel> clone() const override;
  std::string kind() const override { return "SE"; }
  Vector params() const override;
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override;
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Vector diag(const Matrix& X) const override;

  double variance() const { return variance_; }
  const Vector& lengthscales() const { return lengthscales_; }

 private:
  double variance_;
  Vector lengthscales_;
};

/// sum_d v_d x_d x'_d.
class LinearKernel final : public ScalarKernel {
 public:
  explicit LinearKernel(Vector variances);
  std::unique_ptr<ScalarKernel> clone() const override;
  std::string kind() const override { return "linear"; }
  Vector params() const override;
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override;
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Vector diag(const Matrix& X) const override;

 private:
  Vector variances_;
};

/// Constant covariance v.
class BiasKernel final : public ScalarKernel {
 public:
  explicit BiasKernel(double variance);
  std::unique_ptr<ScalarKernel> clone() const override;
  std::string kind() const override { return "bias"; }
  Vector params() const override;
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override;
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Vector diag(const Matrix& X) const override;

 private:
  double variance_;
};

/// Multi-output covariance K(x, x') in R^{n x n}. Gram matrices use
/// output-major blocks: row index i * N + k is output i at input k.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual std::unique_ptr<Kernel> clone() const = 0;
  virtual std::string kind() const = 0;
  virtual int outputs() const = 0;

  virtual Vector params() const = 0;
  virtual void set_params(const Vector& p) = 0;
  virtual std::vector<std::string> param_names() const = 0;
  Eigen::Index num_params() const { return params().size(); }

  virtual Matrix gram(const Matrix& X1, const Matrix& X2) const = 0;
  virtual std::vector<Matrix> gram_gradients(const Matrix& X) const = 0;
  /// Marginal variances, one row per input.
  virtual Matrix diag(const Matrix& X) const;
  /// 0.5 sum(W .* dK_j) for each parameter j, W being nN x nN output-major.
  /// This is the log-likelihood gradient when W = alpha alpha^T - K^-1.
  virtual Vector weighted_gradient(const Matrix& X, const Matrix& W) const;
  /// True when cross-output blocks vanish identically.
  virtual bool block_diagonal() const { return false; }
};

/// Outputs modelled by independent scalar kernels (one per output).
class IndependentKernel final : public Kernel {
 public:
  explicit IndependentKernel(std::vector<std::unique_ptr<ScalarKernel>> parts);
  IndependentKernel(const IndependentKernel& other);
  IndependentKernel& operator=(const IndependentKernel&) = delete;

  std::unique_ptr<Kernel> clone() const override;
  std::string kind() const override { return "independent"; }
  int outputs() const override { return static_cast<int>(parts_.size()); }
  Vector params() const override;
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override;
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Matrix diag(const Matrix& X) const override;
  Vector weighted_gradient(const Matrix& X, const Matrix& W) const override;
  bool block_diagonal() const override { return true; }

  const ScalarKernel& component(int i) const { return *parts_[i]; }
  /// Offset of output i's parameters inside params().
  Eigen::Index param_offset(int i) const;

 private:
  std::vector<std::unique_ptr<ScalarKernel>> parts_;
};

/// Linear model of coregionalization: sum_i B_i k_i(x, x') with
/// B_i = W_i W_i^T + kappa_i I. A single term is the intrinsic model (ICM).
class CoregionalizedKernel final : public Kernel {
 public:
  struct Term {
    Matrix W;      // n x r, unconstrained
    double kappa;  // > 0
    std::unique_ptr<ScalarKernel> kernel;
  };

  explicit CoregionalizedKernel(std::vector<Term> terms);
  CoregionalizedKernel(const CoregionalizedKernel& other);
  CoregionalizedKernel& operator=(const CoregionalizedKernel&) = delete;

  std::unique_ptr<Kernel> clone() const override;
  std::string kind() const override { return "coregionalized"; }
  int outputs() const override { return static_cast<int>(terms_.front().W.rows()); }
  Vector params() const override;
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override;
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Matrix diag(const Matrix& X) const override;

  Matrix coregionalization(std::size_t term) const;
  std::size_t num_terms() const { return terms_.size(); }

 private:
  std::vector<Term> terms_;
};

/// Kronecker-style product B (x) k laid out in output-major blocks.
Matrix kron_blocks(const Matrix& B, const Matrix& k);

}  // namespace gpsq
