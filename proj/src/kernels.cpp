#include "gpsq/kernels.hpp"

#include <cmath>

namespace gpsq {

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

Vector exp_clamped(const Vector& p) { return p.array().exp(); }

}  // namespace

// ------------------------------------------------------------ SE

SquaredExponential::SquaredExponential(double variance, Vector lengthscales)
    : variance_(variance), lengthscales_(std::move(lengthscales)) {
  check_positive(variance_, "SE variance");
  for (Eigen::Index d = 0; d < lengthscales_.size(); ++d) check_positive(lengthscales_(d), "SE length-scale");
}

std::unique_ptr<ScalarKernel> SquaredExponential::clone() const {
  return std::make_unique<SquaredExponential>(*this);
}

Vector SquaredExponential::params() const {
  Vector p(1 + lengthscales_.size());
  p(0) = std::log(variance_);
  p.tail(lengthscales_.size()) = lengthscales_.array().log();
  return p;
}

void SquaredExponential::set_params(const Vector& p) {
  if (p.size() != 1 + lengthscales_.size()) throw DomainError("SE: wrong parameter count");
  const Vector e = exp_clamped(p);
  check_positive(e(0), "SE variance");
  for (Eigen::Index d = 1; d < e.size(); ++d) check_positive(e(d), "SE length-scale");
  variance_ = e(0);
  lengthscales_ = e.tail(lengthscales_.size());
}

std::vector<std::string> SquaredExponential::param_names() const {
  std::vector<std::string> n{"log_variance"};
  for (Eigen::Index d = 0; d < lengthscales_.size(); ++d) n.push_back("log_lengthscale_" + std::to_string(d));
  return n;
}

Matrix SquaredExponential::gram(const Matrix& X1, const Matrix& X2) const {
  if (X1.cols() != lengthscales_.size() || X2.cols() != lengthscales_.size()) {
    throw DomainError("SE: input dimension mismatch");
  }
  const Eigen::ArrayXd inv = lengthscales_.array().inverse();
  const Matrix A = (X1.array().rowwise() * inv.transpose()).matrix();
  const Matrix B = (X2.array().rowwise() * inv.transpose()).matrix();
  Matrix d2 = (-2.0 * A * B.transpose()).colwise() + A.rowwise().squaredNorm();
  d2.rowwise() += B.rowwise().squaredNorm().transpose();
  return (variance_ * (-0.5 * d2.array().max(0.0)).exp()).matrix();
}

std::vector<Matrix> SquaredExponential::gram_gradients(const Matrix& X) const {
  const Matrix K = gram(X, X);
  std::vector<Matrix> g;
  g.reserve(1 + lengthscales_.size());
  g.push_back(K);
  const Eigen::Index N = X.rows();
  for (Eigen::Index d = 0; d < lengthscales_.size(); ++d) {
    const Eigen::ArrayXd xd = X.col(d).array() / lengthscales_(d);
    Matrix D(N, N);
    for (Eigen::Index j = 0; j < N; ++j) D.col(j) = (xd - xd(j)).square();
    g.push_back((K.array() * D.array()).matrix());
  }
  return g;
}

Vector SquaredExponential::diag(const Matrix& X) const { return Vector::Constant(X.rows(), variance_); }

// ------------------------------------------------------------ linear

LinearKernel::LinearKernel(Vector variances) : variances_(std::move(variances)) {
  for (Eigen::Index d = 0; d < variances_.size(); ++d) check_positive(variances_(d), "linear variance");
}

std::unique_ptr<ScalarKernel> LinearKernel::clone() const { return std::make_unique<LinearKernel>(*this); }

Vector LinearKernel::params() const { return variances_.array().log(); }

void LinearKernel::set_params(const Vector& p) {
  if (p.size() != variances_.size()) throw DomainError("linear: wrong parameter count");
  const Vector e = exp_clamped(p);
  for (Eigen::Index d = 0; d < e.size(); ++d) check_positive(e(d), "linear variance");
  variances_ = e;
}

std::vector<std::string> LinearKernel::param_names() const {
  std::vector<std::string> n;
  for (Eigen::Index d = 0; d < variances_.size(); ++d) n.push_back("log_linear_variance_" + std::to_string(d));
  return n;
}

Matrix LinearKernel::gram(const Matrix& X1, const Matrix& X2) const {
  if (X1.cols() != variances_.size() || X2.cols() != variances_.size()) {
    throw DomainError("linear: input dimension mismatch");
  }
  return X1 * variances_.asDiagonal() * X2.transpose();
}

std::vector<Matrix> LinearKernel::gram_gradients(const Matrix& X) const {
  std::vector<Matrix> g;
  for (Eigen::Index d = 0; d < variances_.size(); ++d) {
    g.push_back(variances_(d) * X.col(d) * X.col(d).transpose());
  }
  return g;
}

Vector LinearKernel::diag(const Matrix& X) const {
  return (X.array().square().rowwise() * variances_.transpose().array()).rowwise().sum();
}

// ------------------------------------------------------------ bias

BiasKernel::BiasKernel(double variance) : variance_(variance) { check_positive(variance_, "bias variance"); }

std::unique_ptr<ScalarKernel> BiasKernel::clone() const { return std::make_unique<BiasKernel>(*this); }

Vector BiasKernel::params() const { return Vector::Constant(1, std::log(variance_)); }

void BiasKernel::set_params(const Vector& p) {
  if (p.size() != 1) throw DomainError("bias: wrong parameter count");
  const double v = std::exp(p(0));
  check_positive(v, "bias variance");
  variance_ = v;
}

std::vector<std::string> BiasKernel::param_names() const { return {"log_bias_variance"}; }

Matrix BiasKernel::gram(const Matrix& X1, const Matrix& X2) const {
  return Matrix::Constant(X1.rows(), X2.rows(), variance_);
}

std::vector<Matrix> BiasKernel::gram_gradients(const Matrix& X) const {
  return {Matrix::Constant(X.rows(), X.rows(), variance_)};
}

Vector BiasKernel::diag(const Matrix& X) const { return Vector::Constant(X.rows(), variance_); }

// ------------------------------------------------------------ multi-output

Matrix Kernel::diag(const Matrix& X) const {
  Matrix out(X.rows(), outputs());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const Matrix b = gram(X.row(k), X.row(k));
    out.row(k) = b.diagonal().transpose();
  }
  return out;
}

Vector Kernel::weighted_gradient(const Matrix& X, const Matrix& W) const {
  const auto dK = gram_gradients(X);
  Vector g(static_cast<Eigen::Index>(dK.size()));
  for (std::size_t j = 0; j < dK.size(); ++j) {
    if (dK[j].rows() != W.rows() || dK[j].cols() != W.cols()) {
      throw DomainError("weighted_gradient: weight matrix has wrong shape");
    }
    g(static_cast<Eigen::Index>(j)) = 0.5 * W.cwiseProduct(dK[j]).sum();
  }
  return g;
}

Matrix kron_blocks(const Matrix& B, const Matrix& k) {
  const Eigen::Index n1 = k.rows(), n2 = k.cols();
  Matrix out(B.rows() * n1, B.cols() * n2);
  for (Eigen::Index a = 0; a < B.rows(); ++a) {
    for (Eigen::Index b = 0; b < B.cols(); ++b) out.block(a * n1, b * n2, n1, n2) = B(a, b) * k;
  }
  return out;
}

IndependentKernel::IndependentKernel(std::vector<std::unique_ptr<ScalarKernel>> parts)
    : parts_(std::move(parts)) {
  if (parts_.empty()) throw DomainError("IndependentKernel: needs at least one output");
}

IndependentKernel::IndependentKernel(const IndependentKernel& other) {
  for (const auto& p : other.parts_) parts_.push_back(p->clone());
}

std::unique_ptr<Kernel> IndependentKernel::clone() const {
  return std::make_unique<IndependentKernel>(*this);
}

Vector IndependentKernel::params() const {
  Vector p(0);
  for (const auto& k : parts_) {
    const Vector q = k->params();
    Vector merged(p.size() + q.size());
    merged << p, q;
    p = std::move(merged);
  }
  return p;
}

void IndependentKernel::set_params(const Vector& p) {
  Eigen::Index off = 0;
  for (auto& k : parts_) {
    const Eigen::Index m = k->num_params();
    if (off + m > p.size()) throw DomainError("IndependentKernel: too few parameters");
    k->set_params(p.segment(off, m));
    off += m;
  }
  if (off != p.size()) throw DomainError("IndependentKernel: too many parameters");
}

std::vector<std::string> IndependentKernel::param_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    for (const auto& n : parts_[i]->param_names()) names.push_back("out" + std::to_string(i) + "." + n);
  }
  return names;
}

Eigen::Index IndependentKernel::param_offset(int i) const {
  Eigen::Index off = 0;
  for (int j = 0; j < i; ++j) off += parts_[j]->num_params();
  return off;
}

Matrix IndependentKernel::gram(const Matrix& X1, const Matrix& X2) const {
  const Eigen::Index n = outputs(), N1 = X1.rows(), N2 = X2.rows();
  Matrix K = Matrix::Zero(n * N1, n * N2);
  for (Eigen::Index i = 0; i < n; ++i) K.block(i * N1, i * N2, N1, N2) = parts_[i]->gram(X1, X2);
  return K;
}

Vector IndependentKernel::weighted_gradient(const Matrix& X, const Matrix& W) const {
  const Eigen::Index n = outputs(), N = X.rows();
  if (W.rows() != n * N || W.cols() != n * N) throw DomainError("weighted_gradient: weight matrix has wrong shape");
  Vector g(num_params());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dK = parts_[i]->gram_gradients(X);
    const auto Wi = W.block(i * N, i * N, N, N);
    for (std::size_t j = 0; j < dK.size(); ++j) {
      g(param_offset(static_cast<int>(i)) + static_cast<Eigen::Index>(j)) = 0.5 * Wi.cwiseProduct(dK[j]).sum();
    }
  }
  return g;
}

std::vector<Matrix> IndependentKernel::gram_gradients(const Matrix& X) const {
  const Eigen::Index n = outputs(), N = X.rows();
  std::vector<Matrix> g;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Matrix& gi : parts_[i]->gram_gradients(X)) {
      Matrix full = Matrix::Zero(n * N, n * N);
      full.block(i * N, i * N, N, N) = gi;
      g.push_back(std::move(full));
    }
  }
  return g;
}

Matrix IndependentKernel::diag(const Matrix& X) const {
  Matrix out(X.rows(), outputs());
  for (int i = 0; i < outputs(); ++i) out.col(i) = parts_[i]->diag(X);
  return out;
}

CoregionalizedKernel::CoregionalizedKernel(std::vector<Term> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw DomainError("CoregionalizedKernel: needs at least one term");
  for (const auto& t : terms_) {
    check_positive(t.kappa, "coregionalization kappa");
    if (t.W.rows() != terms_.front().W.rows()) throw DomainError("CoregionalizedKernel: output mismatch");
  }
}

CoregionalizedKernel::CoregionalizedKernel(const CoregionalizedKernel& other) {
  for (const auto& t : other.terms_) terms_.push_back({t.W, t.kappa, t.kernel->clone()});
}

std::unique_ptr<Kernel> CoregionalizedKernel::clone() const {
  return std::make_unique<CoregionalizedKernel>(*this);
}

Vector CoregionalizedKernel::params() const {
  std::vector<double> v;
  for (const auto& t : terms_) {
    for (Eigen::Index c = 0; c < t.W.cols(); ++c)
      for (Eigen::Index r = 0; r < t.W.rows(); ++r) v.push_back(t.W(r, c));
    v.push_back(std::log(t.kappa));
    const Vector kp = t.kernel->params();
    v.insert(v.end(), kp.data(), kp.data() + kp.size());
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void CoregionalizedKernel::set_params(const Vector& p) {
  Eigen::Index off = 0;
  for (auto& t : terms_) {
    const Eigen::Index nw = t.W.size(), nk = t.kernel->num_params();
    if (off + nw + 1 + nk > p.size()) throw DomainError("CoregionalizedKernel: too few parameters");
    t.W = Eigen::Map<const Matrix>(p.data() + off, t.W.rows(), t.W.cols());
    off += nw;
    const double kappa = std::exp(p(off++));
    check_positive(kappa, "coregionalization kappa");
    t.kappa = kappa;
    t.kernel->set_params(p.segment(off, nk));
    off += nk;
  }
  if (off != p.size()) throw DomainError("CoregionalizedKernel: too many parameters");
}

std::vector<std::string> CoregionalizedKernel::param_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const std::string pre = "B" + std::to_string(i + 1) + ".";
    const auto& t = terms_[i];
    for (Eigen::Index c = 0; c < t.W.cols(); ++c)
      for (Eigen::Index r = 0; r < t.W.rows(); ++r)
        names.push_back(pre + "W_" + std::to_string(r) + "_" + std::to_string(c));
    names.push_back(pre + "log_kappa");
    for (const auto& n : t.kernel->param_names()) names.push_back(pre + t.kernel->kind() + "." + n);
  }
  return names;
}

Matrix CoregionalizedKernel::coregionalization(std::size_t i) const {
  const auto& t = terms_.at(i);
  return t.W * t.W.transpose() + t.kappa * Matrix::Identity(t.W.rows(), t.W.rows());
}

Matrix CoregionalizedKernel::gram(const Matrix& X1, const Matrix& X2) const {
  const Eigen::Index n = outputs();
  Matrix K = Matrix::Zero(n * X1.rows(), n * X2.rows());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    K += kron_blocks(coregionalization(i), terms_[i].kernel->gram(X1, X2));
  }
  return K;
}

std::vector<Matrix> CoregionalizedKernel::gram_gradients(const Matrix& X) const {
  const Eigen::Index n = outputs();
  std::vector<Matrix> g;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& t = terms_[i];
    const Matrix k = t.kernel->gram(X, X);
    for (Eigen::Index c = 0; c < t.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        // d(W W^T)/dW_rc = e_r w_c^T + w_c e_r^T
        Matrix dB = Matrix::Zero(n, n);
        dB.row(r) += t.W.col(c).transpose();
        dB.col(r) += t.W.col(c);
        g.push_back(kron_blocks(dB, k));
      }
    }
    g.push_back(kron_blocks(t.kappa * Matrix::Identity(n, n), k));
    const Matrix B = coregionalization(i);
    for (const Matrix& dk : t.kernel->gram_gradients(X)) g.push_back(kron_blocks(B, dk));
  }
  return g;
}

Matrix CoregionalizedKernel::diag(const Matrix& X) const {
  Matrix out = Matrix::Zero(X.rows(), outputs());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    out += terms_[i].kernel->diag(X) * coregionalization(i).diagonal().transpose();
  }
  return out;
}

}  // namespace gpsq
