#include "gpsq/numerics.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace gpsq {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entry");
  }
}

Matrix pseudo_inverse(const Matrix& m, double rtol) {
  require_finite(m, "pseudo_inverse");
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    std::ostringstream os;
    os << "pseudo_inverse: SVD failed on " << m.rows() << "x" << m.cols()
       << " matrix with norm " << m.norm();
    throw NumericalError(os.str());
  }
  const Vector& s = svd.singularValues();
  const double cutoff = rtol * (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Cholesky::Cholesky(const Matrix& spd, const JitterPolicy& policy) {
  if (spd.rows() != spd.cols()) throw DomainError("cholesky: matrix is not square");
  require_finite(spd, "cholesky");
  const double scale = std::max(spd.cwiseAbs().maxCoeff(), 1e-300);
  if ((spd - spd.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw DomainError("cholesky: matrix is not symmetric");
  }
  llt_.compute(spd);
  if (llt_.info() == Eigen::Success) return;

  const double mean_diag = spd.diagonal().mean();
  double rel = policy.initial;
  double tried = 0.0;
  Matrix work = spd;
  while (rel <= policy.maximum * (1.0 + 1e-12)) {
    tried = rel * std::abs(mean_diag);
    work.diagonal() = spd.diagonal().array() + tried;
    llt_.compute(work);
    if (llt_.info() == Eigen::Success) {
      jitter_ = tried;
      return;
    }
    rel *= policy.factor;
  }
  std::ostringstream os;
  os << "cholesky: matrix of size " << spd.rows()
     << " not positive definite after jitter " << tried;
  throw NotPositiveDefiniteError(os.str(), tried);
}

Matrix Cholesky::solve(const Matrix& rhs) const { return llt_.solve(rhs); }
Vector Cholesky::solve(const Vector& rhs) const { return llt_.solve(rhs); }

double Cholesky::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix Cholesky::inverse() const {
  return llt_.solve(Matrix::Identity(llt_.rows(), llt_.cols()));
}

Matrix chol_solve(const Matrix& spd, const Matrix& rhs, const JitterPolicy& policy) {
  if (rhs.rows() != spd.rows()) throw DomainError("chol_solve: shape mismatch");
  require_finite(rhs, "chol_solve");
  return Cholesky(spd, policy).solve(rhs);
}

double log_det_chol(const Matrix& spd, const JitterPolicy& policy) {
  return Cholesky(spd, policy).log_det();
}

double inverse_condition(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s(0) <= 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace gpsq
