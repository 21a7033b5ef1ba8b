#pragma once

#include "gpsq/mechanics.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gpsq {

inline constexpr double kGravity = 9.81;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

using ParametricMeanFn =
    std::function<Vector(const State&, const Vector& theta_p, const Vector& mean_params)>;

/// A benchmark system with its true dynamics, constraint, sampling domain and
/// the structural knowledge handed to constrained models.
struct BenchmarkSystem {
  std::string name;
  InputLayout layout;
  int m = 1;

  UnconstrainedModel dynamics;
  ConstraintModel constraint;  // theta_p holds the true parameters

  std::vector<std::string> theta_names;
  std::vector<Interval> theta_bounds;
  std::vector<int> trainable_theta;

  // Parametric prior mean for abar = a + z; parameters beyond theta_p live
  // in mean_params (e.g. spring and damper constants).
  ParametricMeanFn parametric_mean;
  std::vector<std::string> mean_param_names;
  Vector mean_params_star;
  std::vector<Interval> mean_param_bounds;

  // Per input column; dependent columns are overwritten by `project`.
  std::vector<Interval> domain;
  std::vector<int> dependent_cols;
  std::function<void(State&, const Vector& theta)> project;
  // Position- or velocity-level constraint residual c(q, qdot, t).
  std::function<double(const State&, const Vector& theta)> residual;

  const Vector& theta_star() const { return constraint.theta_p; }
  /// Columns sampled or gridded: not dependent and of nonzero width.
  std::vector<int> free_cols() const;
  Vector acceleration(const State& x) const;
  Vector abar(const State& x) const { return dynamics.eval_a(x) + dynamics.eval_z(x); }
};

struct SurfaceParams {
  double mass = 1.0;
  double damping = 0.1;  // a0
  Vector theta = (Vector(5) << 0.2, 0.1, 0.1, 0.3, 2.0).finished();
  double position_range = 1.0;
  double velocity_range = 1.0;
  double control_range = 1.0;
};

/// Transfer surface q3 = c1 q1 + c2 q2 + c3 cos(c4 q1).
struct TransferSurfaceParams {
  Vector theta = (Vector(4) << 0.1, -0.15, -0.1, 3.0).finished();
};

struct UnicycleParams {
  double mass = 1.0;
  double inertia = 0.1;
  double damping = 0.1;
  double position_range = 1.0;
  double heading_range = 80.0 * 3.14159265358979323846 / 180.0;
  double velocity_range = 1.0;
  double control_range = 1.0;
};

struct DuffingParams {
  double mass1 = 1.0;
  double mass2 = 1.0;
  double stiffness = 1.0;        // k, N/m
  double cubic_stiffness = 1.0;  // k3, N/m^3
  double damping = 0.1;          // c, N s/m
  Vector theta = (Vector(3) << 0.5, 0.2, 2.0).finished();
  double position_range = 1.0;
  double velocity_range = 1.0;
  double time_horizon = 10.0;
};

/// Constraining equation of the particle on the surface
/// q3 = p1 q1^2 + p2 q2^2 + p3 q1 + p4 cos(p5 q1).
ConstraintEval surface_constraint(const State& x, const Vector& theta);
double surface_height(double q1, double q2, const Vector& theta);

struct AccelPair {
  Vector a;
  Vector z;
};

/// Gravity plus control forces, and velocity-quadratic damping.
AccelPair surface_dynamics(const State& x, double mass, double damping);

ConstraintEval transfer_surface_constraint(const State& x, const Vector& theta);
double transfer_surface_height(double q1, double q2, const Vector& theta);

struct SystemTerms {
  Matrix M;
  Vector a;
  Vector z;
  ConstraintEval constraint;
};

/// theta = (m_u, I_c). Constraint in the tan form; undefined at q3 = +-90 deg.
SystemTerms unicycle_model(const State& x, const Vector& theta, double damping);
/// Equivalent bounded form (-sin q3) qdd1 + (cos q3) qdd2 = qd3 (qd1 cos q3 + qd2 sin q3).
ConstraintEval unicycle_constraint_trig(const State& x);

/// theta = (p1, p2, p3) of the tracking constraint q2 = q1 + p1 exp(-p2 t) sin(p3 t).
SystemTerms duffing_model(const State& x, const Vector& theta, const DuffingParams& params);
double duffing_offset(double t, const Vector& theta);

BenchmarkSystem make_surface(const SurfaceParams& params = {});
BenchmarkSystem make_surface_transfer(const SurfaceParams& params = {},
                                      const TransferSurfaceParams& transfer = {});
BenchmarkSystem make_unicycle(const UnicycleParams& params = {});
BenchmarkSystem make_duffing(const DuffingParams& params = {});

/// Scalar or vector parameter overrides by name, e.g. {"mass": {2.0}}.
using SystemOverrides = std::map<std::string, std::vector<double>>;

/// Looks up "surface", "surface_transfer", "unicycle" or "duffing".
/// Throws DomainError for unknown names or override keys.
BenchmarkSystem make_system(std::string_view name, const SystemOverrides& overrides = {});
std::vector<std::string> system_names();

}  // namespace gpsq
