#include "gpsq/gp.hpp"

#include "gpsq/random.hpp"

#include <cmath>

namespace gpsq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

void check_data(const GPModel& model, const Matrix& X, const Matrix& Y) {
  if (!model.kernel) throw DomainError("GPModel: kernel is not set");
  if (!model.mean) throw DomainError("GPModel: mean is not set");
  if (X.rows() != Y.rows()) throw DomainError("GP: X and Y row counts differ");
  if (Y.cols() != model.outputs()) throw DomainError("GP: Y has wrong number of outputs");
  if (model.noise_var.size() != model.outputs()) throw DomainError("GP: noise_var size mismatch");
  for (Eigen::Index i = 0; i < model.noise_var.size(); ++i) {
    if (!(model.noise_var(i) >= 0.0) || !std::isfinite(model.noise_var(i))) {
      throw DomainError("GP: noise variance must be finite and non-negative");
    }
  }
  require_finite(X, "GP inputs");
  require_finite(Y, "GP targets");
}

struct LmlParts {
  double value = 0.0;
  Vector kernel_grad;
  Vector noise_grad;
};

LmlParts lml_impl(const GPModel& model, const Matrix& X, const Matrix& Y, const JitterPolicy& policy,
                  bool want_grad) {
  check_data(model, X, Y);
  const Eigen::Index N = X.rows();
  const int n = model.outputs();
  LmlParts out;
  if (want_grad) {
    out.kernel_grad = Vector::Zero(model.kernel->num_params());
    out.noise_grad = Vector::Zero(n);
  }
  if (N == 0) return out;
  const Matrix R = Y - model.mean(X);

  if (const auto* ind = dynamic_cast<const IndependentKernel*>(model.kernel.get())) {
    for (int i = 0; i < n; ++i) {
      const ScalarKernel& k = ind->component(i);
      Matrix K = k.gram(X, X);
      K.diagonal().array() += model.noise_var(i);
      const Cholesky chol(K, policy);
      const Vector r = R.col(i);
      const Vector alpha = chol.solve(r);
      out.value += -0.5 * r.dot(alpha) - 0.5 * chol.log_det() - 0.5 * N * kLog2Pi;
      if (!want_grad) continue;
      const Matrix W = alpha * alpha.transpose() - chol.inverse();
      const auto dK = k.gram_gradients(X);
      const Eigen::Index off = ind->param_offset(i);
      for (std::size_t j = 0; j < dK.size(); ++j) {
        out.kernel_grad(off + static_cast<Eigen::Index>(j)) = 0.5 * W.cwiseProduct(dK[j]).sum();
      }
      out.noise_grad(i) = 0.5 * model.noise_var(i) * W.trace();
    }
    return out;
  }

  const Matrix K = noisy_gram(model, X);
  const Cholesky chol(K, policy);
  const Vector r = flatten(R);
  const Vector alpha = chol.solve(r);
  out.value = -0.5 * r.dot(alpha) - 0.5 * chol.log_det() - 0.5 * static_cast<double>(r.size()) * kLog2Pi;
  if (!want_grad) return out;
  const Matrix W = alpha * alpha.transpose() - chol.inverse();
  out.kernel_grad = model.kernel->weighted_gradient(X, W);
  for (int i = 0; i < n; ++i) {
    out.noise_grad(i) = 0.5 * model.noise_var(i) * W.diagonal().segment(i * N, N).sum();
  }
  return out;
}

}  // namespace

MeanFunction zero_mean(int outputs) {
  return [outputs](const Matrix& X) { return Matrix::Zero(X.rows(), outputs); };
}

Vector flatten(const Matrix& Y) {
  Vector y(Y.size());
  const Eigen::Index N = Y.rows();
  for (Eigen::Index i = 0; i < Y.cols(); ++i) y.segment(i * N, N) = Y.col(i);
  return y;
}

Matrix unflatten(const Vector& y, int outputs) {
  if (outputs <= 0 || y.size() % outputs != 0) throw DomainError("unflatten: size mismatch");
  const Eigen::Index N = y.size() / outputs;
  Matrix Y(N, outputs);
  for (int i = 0; i < outputs; ++i) Y.col(i) = y.segment(i * N, N);
  return Y;
}

Matrix noisy_gram(const GPModel& model, const Matrix& X) {
  Matrix K = model.kernel->gram(X, X);
  const Eigen::Index N = X.rows();
  for (int i = 0; i < model.outputs(); ++i) {
    K.diagonal().segment(i * N, N).array() += model.noise_var(i);
  }
  return K;
}

PosteriorGP::PosteriorGP(GPModel prior, Matrix X, Matrix Y, const JitterPolicy& policy)
    : prior_(std::move(prior)), X_(std::move(X)), Y_(std::move(Y)) {
  check_data(prior_, X_, Y_);
  if (X_.rows() == 0) return;
  chol_ = Cholesky(noisy_gram(prior_, X_), policy);
  alpha_ = chol_.solve(Vector(flatten(Y_ - prior_.mean(X_))));
}

PosteriorGP condition(const GPModel& prior, const Matrix& X, const Matrix& Y,
                      const JitterPolicy& policy) {
  return PosteriorGP(prior, X, Y, policy);
}

Prediction PosteriorGP::predict(const Matrix& Xq, Covariance mode) const {
  TargetPrior t;
  t.mean = prior_.mean(Xq);
  if (size() > 0) t.cross = prior_.kernel->gram(Xq, X_);
  if (mode == Covariance::marginal) t.var = prior_.kernel->diag(Xq);
  if (mode == Covariance::full) {
    t.cov = prior_.kernel->gram(Xq, Xq);
    t.var = unflatten(t.cov.diagonal(), prior_.outputs());
  }
  return condition_target(t, mode);
}

Prediction PosteriorGP::condition_target(const TargetPrior& target, Covariance mode) const {
  const int n = static_cast<int>(target.mean.cols());
  Prediction p;
  p.mean = target.mean;
  if (mode == Covariance::marginal) p.var = target.var;
  if (mode == Covariance::full) {
    p.cov = target.cov;
    p.var = unflatten(target.cov.diagonal(), n);
  }
  if (size() == 0) return p;
  if (target.cross.cols() != alpha_.size() || target.cross.rows() != target.mean.size()) {
    throw DomainError("condition_target: cross-covariance has wrong shape");
  }
  p.mean += unflatten(target.cross * alpha_, n);
  if (mode == Covariance::none) return p;

  const Matrix V = chol_.lower().triangularView<Eigen::Lower>().solve(target.cross.transpose());
  if (mode == Covariance::marginal) {
    p.var -= unflatten(V.colwise().squaredNorm().transpose(), n);
  } else {
    p.cov.noalias() -= V.transpose() * V;
    p.cov = 0.5 * (p.cov + p.cov.transpose()).eval();
    p.var = unflatten(p.cov.diagonal(), n);
  }
  p.var = p.var.cwiseMax(0.0);
  return p;
}

double log_marginal_likelihood(const GPModel& model, const Matrix& X, const Matrix& Y,
                               const JitterPolicy& policy) {
  return lml_impl(model, X, Y, policy, false).value;
}

LmlGradient lml_with_gradient(const GPModel& model, const Matrix& X, const Matrix& Y,
                              const JitterPolicy& policy) {
  LmlParts parts = lml_impl(model, X, Y, policy, true);
  return {parts.value, std::move(parts.kernel_grad), std::move(parts.noise_grad)};
}

Matrix sample_mvn(const Vector& mean, const Matrix& cov, int count, std::uint64_t seed,
                  const JitterPolicy& policy) {
  if (count < 0) throw DomainError("sample_mvn: count must be >= 0");
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw DomainError("sample_mvn: covariance shape mismatch");
  }
  require_finite(cov, "sample_mvn covariance");
  Matrix out = mean.transpose().replicate(count, 1);
  if (mean.size() == 0 || cov.cwiseAbs().maxCoeff() == 0.0) return out;

  const Matrix sym = 0.5 * (cov + cov.transpose());
  const Matrix L = Cholesky(sym, policy).lower();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix Z(mean.size(), count);
  for (Eigen::Index c = 0; c < Z.cols(); ++c)
    for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = normal(rng);
  out += (L * Z).transpose();
  return out;
}

Matrix sample_prior(const GPModel& model, const Matrix& X, int count, std::uint64_t seed) {
  return sample_mvn(flatten(model.mean(X)), model.kernel->gram(X, X), count, seed);
}

Matrix sample_posterior(const PosteriorGP& post, const Matrix& Xq, int count, std::uint64_t seed) {
  const Prediction p = post.predict(Xq, Covariance::full);
  return sample_mvn(flatten(p.mean), p.cov, count, seed);
}

}  // namespace gpsq
