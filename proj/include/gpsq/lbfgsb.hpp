#pragma once

#include "gpsq/numerics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gpsq {

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsbOptions {
  int memory = 10;
  int max_iters = 200;
  double pgtol = 1e-5;     // sup-norm of the projected gradient
  double ftol_abs = 1e-6;  // |f_k - f_{k+1}|
  int max_linesearch = 30;
};

struct LbfgsbResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  std::string stop_reason;
  std::vector<double> history;  // f at the start and after each iteration
};

/// Minimizes f over the box lower <= x <= upper with limited-memory BFGS
/// (compact representation, generalized Cauchy point, primal subspace
/// minimization, backtracking Armijo search). Each accepted step decreases
/// f, so history is monotone non-increasing. x0 is projected into the box.
LbfgsbResult minimize_lbfgsb(const Objective& f, Vector x0, const Vector& lower,
                             const Vector& upper, const LbfgsbOptions& options = {});

/// Sup-norm of P(x - g) - x.
double projected_gradient_norm(const Vector& x, const Vector& g, const Vector& lower,
                               const Vector& upper);

}  // namespace gpsq
