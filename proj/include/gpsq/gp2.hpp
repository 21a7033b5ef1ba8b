#pragma once

#include "gpsq/gp.hpp"
#include "gpsq/systems.hpp"

#include <memory>
#include <vector>

namespace gpsq {

/// Prior mean of abar as a function of the inputs and the constraint
/// parameters: X (N x D), theta_p -> N x n.
using AbarMean = std::function<Matrix(const Matrix& X, const Vector& theta_p)>;

/// L(x) b(x) and T(x) evaluated at every input row.
struct ProjectionField {
  std::vector<Matrix> T;  // one n x n per row
  Matrix Lb;              // N x n

  Eigen::Index size() const { return Lb.rows(); }
};

ProjectionField projection_field(const InputLayout& layout, const ConstraintModel& constraint,
                                 const MassFn& mass, const Matrix& X);

/// Blocks T1(x) K(x, x') T2(x')^T in output-major layout. A null field
/// stands for the identity.
Matrix transformed_gram(const Kernel& base, const Matrix& X1, const ProjectionField* P1,
                        const Matrix& X2, const ProjectionField* P2);

/// Covariance T(x) K_abar(x, x') T(x')^T of the constrained accelerations.
class TransformedKernel final : public Kernel {
 public:
  TransformedKernel(std::shared_ptr<const Kernel> base, InputLayout layout, ConstraintModel constraint,
                    MassFn mass);

  std::unique_ptr<Kernel> clone() const override;
  std::string kind() const override { return "transformed"; }
  int outputs() const override { return base_->outputs(); }
  Vector params() const override { return base_->params(); }
  void set_params(const Vector& p) override;
  std::vector<std::string> param_names() const override { return base_->param_names(); }
  Matrix gram(const Matrix& X1, const Matrix& X2) const override;
  std::vector<Matrix> gram_gradients(const Matrix& X) const override;
  Matrix diag(const Matrix& X) const override;
  /// Pulls W back through the field (T^T W T) and defers to the base kernel.
  Vector weighted_gradient(const Matrix& X, const Matrix& W) const override;

  const Kernel& base() const { return *base_; }
  ProjectionField field(const Matrix& X) const;

 private:
  std::shared_ptr<Kernel> base_;
  InputLayout layout_;
  ConstraintModel constraint_;
  MassFn mass_;
};

struct Gp2Model {
  InputLayout layout;
  ConstraintModel constraint;  // theta_p lives here
  MassFn mass;
  AbarMean abar_mean;
  std::shared_ptr<const Kernel> abar_kernel;
  Vector noise_var;

  int outputs() const { return layout.n; }
  /// The GP over abar itself.
  GPModel abar_prior() const;
  ProjectionField field(const Matrix& X) const;
};

/// The constrained prior: mean L b + T mu_abar, covariance T K_abar T^T.
GPModel gp2_prior(const Gp2Model& model);

enum class MeanMode { zero, parametric };

/// Zero mean, or the system's parametric mean (a(x, theta_p) or its linear
/// spring/damper part) with the given extra mean parameters.
AbarMean gp2_mu_abar(MeanMode mode, const BenchmarkSystem& sys, const Vector& mean_params);
AbarMean gp2_mu_abar(MeanMode mode, const BenchmarkSystem& sys);

/// Model over `sys`'s constraint (at its true theta_p) and mass matrix.
Gp2Model make_gp2_model(const BenchmarkSystem& sys, AbarMean mean,
                        std::shared_ptr<const Kernel> abar_kernel, Vector noise_var);

/// Conditioned GP2 model. All predictions share one factorization of the
/// training Gram matrix.
class Gp2Posterior {
 public:
  Gp2Posterior(Gp2Model model, const Matrix& X, const Matrix& Y, const JitterPolicy& policy = {});

  const Gp2Model& model() const { return model_; }
  const PosteriorGP& gp() const { return post_; }

  /// Constrained accelerations h(x) = q'' | y.
  Prediction predict(const Matrix& Xq, Covariance mode = Covariance::marginal) const;
  /// Unconstrained abar | y.
  Prediction infer_abar(const Matrix& Xq, Covariance mode = Covariance::marginal) const;
  /// h'(x) | y for another constraint sharing abar and M.
  Prediction transfer(const ConstraintModel& target, const Matrix& Xq,
                      Covariance mode = Covariance::marginal) const;
  /// Posterior draws of h at Xq (count x nG, output-major). Draws of abar
  /// are mapped through L b + T abar, so each satisfies A h = b.
  Matrix sample(const Matrix& Xq, int count, std::uint64_t seed) const;

 private:
  Gp2Model model_;
  ProjectionField train_field_;
  PosteriorGP post_;
};

Prediction joint_infer_abar(const Gp2Model& model, const Matrix& X, const Matrix& Y,
                            const Matrix& Xq, Covariance mode = Covariance::marginal);
Prediction transfer_predict(const Gp2Model& model, const Matrix& X, const Matrix& Y,
                            const ConstraintModel& target, const Matrix& Xq,
                            Covariance mode = Covariance::marginal);

struct Gp2LmlGradient {
  double value = 0.0;
  Vector kernel;  // analytic, d/d abar_kernel params
  Vector noise;   // analytic, d/d log noise_var
  Vector theta;   // central differences, d/d theta_p[trainable[i]]
};

double gp2_lml(const Gp2Model& model, const Matrix& X, const Matrix& Y);

/// Theta derivatives use central differences with step rel_step * (1 + |theta_i|).
Gp2LmlGradient gp2_lml_with_gradient(const Gp2Model& model, const Matrix& X, const Matrix& Y,
                                     const std::vector<int>& trainable_theta, double rel_step = 1e-6);

}  // namespace gpsq
