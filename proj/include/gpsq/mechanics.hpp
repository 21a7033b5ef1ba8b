#pragma once

#include "gpsq/numerics.hpp"

#include <functional>

namespace gpsq {

/// A point x = (q, qdot, t, u) of a mechanical system's input space.
struct State {
  Vector q;
  Vector qdot;
  double t = 0.0;
  Vector u;  // empty when the system has no control inputs
};

/// Column layout of an input row: q1..qn, qd1..qdn, t, u1..u_nu.
struct InputLayout {
  int n = 0;
  int n_u = 0;

  int dim() const { return 2 * n + 1 + n_u; }
  int q_col(int i) const { return i; }
  int qd_col(int i) const { return n + i; }
  int t_col() const { return 2 * n; }
  int u_col(int i) const { return 2 * n + 1 + i; }

  State state(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::RowVectorXd row(const State& x) const;
};

/// Affine constraining equation A(x) qddot = b(x).
struct ConstraintEval {
  Matrix A;
  Vector b;
};

using ConstraintFn = std::function<ConstraintEval(const State&, const Vector& theta)>;
using MassFn = std::function<Matrix(const State&, const Vector& theta)>;
using AccelFn = std::function<Vector(const State&)>;

/// Parametric constraining equation together with its parameter vector.
struct ConstraintModel {
  int n = 0;
  int m = 0;
  ConstraintFn eval;
  Vector theta_p;

  ConstraintEval operator()(const State& x) const { return eval(x, theta_p); }
  ConstraintModel with_theta(Vector theta) const {
    ConstraintModel c = *this;
    c.theta_p = std::move(theta);
    return c;
  }
};

/// Mass matrix, unconstrained acceleration a = M^-1 F_a and non-ideal
/// constraining acceleration z.
struct UnconstrainedModel {
  MassFn eval_M;
  AccelFn eval_a;
  AccelFn eval_z;
};

/// L = M^-1 A^T (A M^-1 A^T)^+ and T = I - L A.
struct Projection {
  Matrix L;
  Matrix T;
};

/// Throws DomainError if M is not symmetric positive definite.
Projection projection_ops(const Matrix& M, const Matrix& A);

/// Udwadia-Kalaba acceleration qddot = L b + T (a + z).
Vector uke_acceleration(const UnconstrainedModel& sys, const ConstraintModel& con,
                        const State& x);

/// (qddot - abar)^T M (qddot - abar).
double gauss_functional(const Matrix& M, const Vector& qddot, const Vector& abar);

/// True when A M^-1 A^T has smallest singular value above 1e-8 of its largest.
bool constraint_regular(const Matrix& M, const Matrix& A);

}  // namespace gpsq
