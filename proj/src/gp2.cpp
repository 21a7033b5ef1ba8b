#include "gpsq/gp2.hpp"

namespace gpsq {

namespace {

// Column i * n + a holds T(x_k)(i, a) over the rows k.
Matrix field_columns(const ProjectionField& P, int n) {
  Matrix t(P.size(), n * n);
  for (Eigen::Index k = 0; k < P.size(); ++k)
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a) t(k, i * n + a) = P.T[k](i, a);
  return t;
}

Matrix apply_field(const ProjectionField& P, const Matrix& mu) {
  Matrix out = P.Lb;
  for (Eigen::Index k = 0; k < P.size(); ++k) out.row(k) += (P.T[k] * mu.row(k).transpose()).transpose();
  return out;
}

Matrix transformed_diag(const Kernel& base, const Matrix& X, const ProjectionField& P) {
  Matrix out(X.rows(), base.outputs());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const Matrix Kk = base.gram(X.row(k), X.row(k));
    out.row(k) = (P.T[k] * Kk * P.T[k].transpose()).diagonal().transpose();
  }
  return out;
}

}  // namespace

ProjectionField projection_field(const InputLayout& layout, const ConstraintModel& constraint,
                                 const MassFn& mass, const Matrix& X) {
  ProjectionField P;
  P.T.reserve(static_cast<std::size_t>(X.rows()));
  P.Lb.resize(X.rows(), layout.n);
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const State x = layout.state(X.row(k));
    const ConstraintEval c = constraint(x);
    const Projection pr = projection_ops(mass(x, constraint.theta_p), c.A);
    P.Lb.row(k) = (pr.L * c.b).transpose();
    P.T.push_back(pr.T);
  }
  return P;
}

Matrix transformed_gram(const Kernel& base, const Matrix& X1, const ProjectionField* P1,
                        const Matrix& X2, const ProjectionField* P2) {
  const int n = base.outputs();
  const Eigen::Index N1 = X1.rows(), N2 = X2.rows();
  Matrix K = base.gram(X1, X2);
  if (P1) {
    const Matrix t = field_columns(*P1, n);
    Matrix left = Matrix::Zero(n * N1, n * N2);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a)
        left.middleRows(i * N1, N1).array() +=
            K.middleRows(a * N1, N1).array().colwise() * t.col(i * n + a).array();
    K = std::move(left);
  }
  if (P2) {
    const Matrix t = field_columns(*P2, n);
    Matrix right = Matrix::Zero(n * N1, n * N2);
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < n; ++b)
        right.middleCols(j * N2, N2).array() +=
            K.middleCols(b * N2, N2).array().rowwise() * t.col(j * n + b).transpose().array();
    K = std::move(right);
  }
  return K;
}

// ------------------------------------------------------------ kernel

TransformedKernel::TransformedKernel(std::shared_ptr<const Kernel> base, InputLayout layout,
                                     ConstraintModel constraint, MassFn mass)
    : base_(base->clone()), layout_(layout), constraint_(std::move(constraint)), mass_(std::move(mass)) {
  if (base_->outputs() != layout_.n) throw DomainError("TransformedKernel: output count mismatch");
}

std::unique_ptr<Kernel> TransformedKernel::clone() const {
  return std::make_unique<TransformedKernel>(base_, layout_, constraint_, mass_);
}

void TransformedKernel::set_params(const Vector& p) { base_->set_params(p); }

ProjectionField TransformedKernel::field(const Matrix& X) const {
  return projection_field(layout_, constraint_, mass_, X);
}

Matrix TransformedKernel::gram(const Matrix& X1, const Matrix& X2) const {
  const ProjectionField P1 = field(X1), P2 = field(X2);
  return transformed_gram(*base_, X1, &P1, X2, &P2);
}

std::vector<Matrix> TransformedKernel::gram_gradients(const Matrix& X) const {
  const ProjectionField P = field(X);
  const int n = outputs();
  const Eigen::Index N = X.rows();
  const Matrix t = field_columns(P, n);
  std::vector<Matrix> out;
  for (const Matrix& dK : base_->gram_gradients(X)) {
    Matrix left = Matrix::Zero(n * N, n * N);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a)
        left.middleRows(i * N, N).array() += dK.middleRows(a * N, N).array().colwise() * t.col(i * n + a).array();
    Matrix both = Matrix::Zero(n * N, n * N);
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < n; ++b)
        both.middleCols(j * N, N).array() +=
            left.middleCols(b * N, N).array().rowwise() * t.col(j * n + b).transpose().array();
    out.push_back(std::move(both));
  }
  return out;
}

Vector TransformedKernel::weighted_gradient(const Matrix& X, const Matrix& W) const {
  const ProjectionField P = field(X);
  const int n = outputs();
  const Eigen::Index N = X.rows();
  if (W.rows() != n * N || W.cols() != n * N) throw DomainError("weighted_gradient: weight matrix has wrong shape");
  const Matrix t = field_columns(P, n);
  Matrix left = Matrix::Zero(n * N, n * N);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i)
      left.middleRows(a * N, N).array() += W.middleRows(i * N, N).array().colwise() * t.col(i * n + a).array();
  Matrix pulled = Matrix::Zero(n * N, n * N);
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < n; ++j)
      pulled.middleCols(b * N, N).array() +=
          left.middleCols(j * N, N).array().rowwise() * t.col(j * n + b).transpose().array();
  return base_->weighted_gradient(X, pulled);
}

Matrix TransformedKernel::diag(const Matrix& X) const { return transformed_diag(*base_, X, field(X)); }

// ------------------------------------------------------------ model

GPModel Gp2Model::abar_prior() const {
  const AbarMean mu = abar_mean;
  const Vector theta = constraint.theta_p;
  return {[mu, theta](const Matrix& X) { return mu(X, theta); }, abar_kernel, noise_var};
}

ProjectionField Gp2Model::field(const Matrix& X) const {
  return projection_field(layout, constraint, mass, X);
}

GPModel gp2_prior(const Gp2Model& model) {
  if (!model.abar_kernel || !model.abar_mean || !model.mass || !model.constraint.eval) {
    throw DomainError("gp2_prior: model is incomplete");
  }
  GPModel g;
  g.mean = [model](const Matrix& X) {
    return apply_field(model.field(X), model.abar_mean(X, model.constraint.theta_p));
  };
  g.kernel = std::make_shared<TransformedKernel>(model.abar_kernel, model.layout, model.constraint, model.mass);
  g.noise_var = model.noise_var;
  return g;
}

AbarMean gp2_mu_abar(MeanMode mode, const BenchmarkSystem& sys, const Vector& mean_params) {
  const InputLayout layout = sys.layout;
  if (mode == MeanMode::zero) {
    return [n = layout.n](const Matrix& X, const Vector&) { return Matrix::Zero(X.rows(), n); };
  }
  if (!sys.parametric_mean) throw DomainError("gp2_mu_abar: system has no parametric mean");
  const ParametricMeanFn fn = sys.parametric_mean;
  return [layout, fn, mean_params](const Matrix& X, const Vector& theta) {
    Matrix out(X.rows(), layout.n);
    for (Eigen::Index k = 0; k < X.rows(); ++k) out.row(k) = fn(layout.state(X.row(k)), theta, mean_params).transpose();
    return out;
  };
}

AbarMean gp2_mu_abar(MeanMode mode, const BenchmarkSystem& sys) {
  return gp2_mu_abar(mode, sys, sys.mean_params_star);
}

Gp2Model make_gp2_model(const BenchmarkSystem& sys, AbarMean mean, std::shared_ptr<const Kernel> abar_kernel,
                        Vector noise_var) {
  return {sys.layout, sys.constraint, sys.dynamics.eval_M, std::move(mean), std::move(abar_kernel),
          std::move(noise_var)};
}

// ------------------------------------------------------------ posterior

Gp2Posterior::Gp2Posterior(Gp2Model model, const Matrix& X, const Matrix& Y, const JitterPolicy& policy)
    : model_(std::move(model)), train_field_(model_.field(X)), post_(gp2_prior(model_), X, Y, policy) {}

Prediction Gp2Posterior::predict(const Matrix& Xq, Covariance mode) const { return post_.predict(Xq, mode); }

Prediction Gp2Posterior::infer_abar(const Matrix& Xq, Covariance mode) const {
  const Kernel& K = *model_.abar_kernel;
  TargetPrior t;
  t.mean = model_.abar_mean(Xq, model_.constraint.theta_p);
  if (post_.size() > 0) t.cross = transformed_gram(K, Xq, nullptr, post_.X(), &train_field_);
  if (mode == Covariance::marginal) t.var = K.diag(Xq);
  if (mode == Covariance::full) t.cov = K.gram(Xq, Xq);
  return post_.condition_target(t, mode);
}

Prediction Gp2Posterior::transfer(const ConstraintModel& target, const Matrix& Xq, Covariance mode) const {
  const Kernel& K = *model_.abar_kernel;
  const ProjectionField P = projection_field(model_.layout, target, model_.mass, Xq);
  TargetPrior t;
  t.mean = apply_field(P, model_.abar_mean(Xq, model_.constraint.theta_p));
  if (post_.size() > 0) t.cross = transformed_gram(K, Xq, &P, post_.X(), &train_field_);
  if (mode == Covariance::marginal) t.var = transformed_diag(K, Xq, P);
  if (mode == Covariance::full) t.cov = transformed_gram(K, Xq, &P, Xq, &P);
  return post_.condition_target(t, mode);
}

Matrix Gp2Posterior::sample(const Matrix& Xq, int count, std::uint64_t seed) const {
  const Prediction a = infer_abar(Xq, Covariance::full);
  const Matrix draws = sample_mvn(flatten(a.mean), a.cov, count, seed);
  const ProjectionField P = model_.field(Xq);
  const int n = model_.outputs();
  Matrix out(count, draws.cols());
  for (int s = 0; s < count; ++s) {
    out.row(s) = flatten(apply_field(P, unflatten(draws.row(s).transpose(), n))).transpose();
  }
  return out;
}

Prediction joint_infer_abar(const Gp2Model& model, const Matrix& X, const Matrix& Y, const Matrix& Xq,
                            Covariance mode) {
  return Gp2Posterior(model, X, Y).infer_abar(Xq, mode);
}

Prediction transfer_predict(const Gp2Model& model, const Matrix& X, const Matrix& Y,
                            const ConstraintModel& target, const Matrix& Xq, Covariance mode) {
  return Gp2Posterior(model, X, Y).transfer(target, Xq, mode);
}

// ------------------------------------------------------------ likelihood

double gp2_lml(const Gp2Model& model, const Matrix& X, const Matrix& Y) {
  return log_marginal_likelihood(gp2_prior(model), X, Y);
}

Gp2LmlGradient gp2_lml_with_gradient(const Gp2Model& model, const Matrix& X, const Matrix& Y,
                                     const std::vector<int>& trainable, double rel_step) {
  const LmlGradient g = lml_with_gradient(gp2_prior(model), X, Y);
  Gp2LmlGradient out{g.value, g.kernel, g.noise, Vector::Zero(static_cast<Eigen::Index>(trainable.size()))};
  for (std::size_t j = 0; j < trainable.size(); ++j) {
    const int i = trainable[j];
    const double th = model.constraint.theta_p(i);
    const double h = rel_step * (1.0 + std::abs(th));
    Gp2Model plus = model, minus = model;
    plus.constraint.theta_p(i) = th + h;
    minus.constraint.theta_p(i) = th - h;
    out.theta(static_cast<Eigen::Index>(j)) = (gp2_lml(plus, X, Y) - gp2_lml(minus, X, Y)) / (2.0 * h);
  }
  return out;
}

}  // namespace gpsq
