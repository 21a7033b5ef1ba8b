#pragma once

#include "gpsq/numerics.hpp"

#include <functional>
#include <vector>

namespace gpsq {

using OdeRhs = std::function<Vector(double t, const Vector& y)>;

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double first_step = 0.0;  // 0: chosen from the initial derivative
  double max_step = 0.0;    // 0: unbounded
  long max_steps = 1000000;
};

/// Solution sampled at the requested report times.
struct OdeSolution {
  std::vector<double> t;
  std::vector<Vector> y;
  long steps = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// Raised when the step size underflows, the step budget runs out or the
/// right-hand side stops being finite. Carries everything computed so far.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double t, Vector y, OdeSolution partial)
      : NumericalError(what), t_(t), y_(std::move(y)), partial_(std::move(partial)) {}
  double last_t() const { return t_; }
  const Vector& last_y() const { return y_; }
  const OdeSolution& partial() const { return partial_; }

 private:
  double t_;
  Vector y_;
  OdeSolution partial_;
};

/// Adaptive Dormand-Prince 5(4) with dense output. `report` must be sorted
/// ascending and start at or after t0.
OdeSolution integrate_rk45(const OdeRhs& f, double t0, const Vector& y0, const std::vector<double>& report,
                           const OdeOptions& opt = {});

}  // namespace gpsq
