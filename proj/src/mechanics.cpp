#include "gpsq/mechanics.hpp"

#include <cmath>

namespace gpsq {

State InputLayout::state(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (row.size() != dim()) throw DomainError("InputLayout::state: row has wrong length");
  State x;
  x.q = row.segment(0, n).transpose();
  x.qdot = row.segment(n, n).transpose();
  x.t = row(2 * n);
  x.u = row.segment(2 * n + 1, n_u).transpose();
  return x;
}

Eigen::RowVectorXd InputLayout::row(const State& x) const {
  if (x.q.size() != n || x.qdot.size() != n || x.u.size() != n_u) {
    throw DomainError("InputLayout::row: state dimensions do not match layout");
  }
  Eigen::RowVectorXd r(dim());
  r.segment(0, n) = x.q.transpose();
  r.segment(n, n) = x.qdot.transpose();
  r(2 * n) = x.t;
  r.segment(2 * n + 1, n_u) = x.u.transpose();
  return r;
}

Projection projection_ops(const Matrix& M, const Matrix& A) {
  const auto n = M.rows();
  if (M.cols() != n || A.cols() != n) throw DomainError("projection_ops: shape mismatch");
  require_finite(M, "projection_ops(M)");
  require_finite(A, "projection_ops(A)");

  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw DomainError("projection_ops: mass matrix is not positive definite");
  }
  // Whitened form: with M = R R^T and At = A R^-T, A M^-1 A^T = At At^T, so
  // L = R^-T At^+ and T = R^-T (I - At^+ At) R^T. Singular values of At are
  // the square roots of those of A M^-1 A^T, hence the square-rooted cutoff.
  const auto R = llt.matrixL();
  const Matrix At = R.solve(A.transpose()).transpose();  // m x n
  Projection p;
  p.L = Matrix::Zero(n, A.rows());
  p.T = Matrix::Identity(n, n);
  if (At.size() == 0) return p;
  const Eigen::JacobiSVD<Matrix> svd(At, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return p;
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > std::sqrt(kPinvRtol) * s(0)) ++rank;
  const Matrix V = svd.matrixV().leftCols(rank);
  const Matrix U = svd.matrixU().leftCols(rank);
  const Matrix RtInv_V = R.transpose().solve(V);  // R^-T V
  p.L = RtInv_V * s.head(rank).cwiseInverse().asDiagonal() * U.transpose();
  p.T -= RtInv_V * (V.transpose() * R.transpose());
  return p;
}

Vector uke_acceleration(const UnconstrainedModel& sys, const ConstraintModel& con,
                        const State& x) {
  const Matrix M = sys.eval_M(x, con.theta_p);
  const ConstraintEval c = con(x);
  const Projection p = projection_ops(M, c.A);
  return p.L * c.b + p.T * (sys.eval_a(x) + sys.eval_z(x));
}

double gauss_functional(const Matrix& M, const Vector& qddot, const Vector& abar) {
  if (M.rows() != qddot.size() || abar.size() != qddot.size()) {
    throw DomainError("gauss_functional: shape mismatch");
  }
  const Vector tau = qddot - abar;
  return tau.dot(M * tau);
}

bool constraint_regular(const Matrix& M, const Matrix& A) {
  const Matrix g = A * M.llt().solve(A.transpose());
  return inverse_condition(g) > 1e-8;
}

}  // namespace gpsq
