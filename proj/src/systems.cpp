#include "gpsq/systems.hpp"

#include <algorithm>
#include <cmath>

namespace gpsq {

namespace {

// Velocity-quadratic damping z_i = -a0 (v^2/|v|) qdot_i over the listed
// coordinates; v^2/|v| is taken as |v|, which removes the singularity at v = 0.
Vector quadratic_damping(const Vector& qdot, int translational, double a0) {
  Vector z = Vector::Zero(qdot.size());
  const double v = qdot.head(translational).norm();
  if (v == 0.0) return z;
  z.head(translational) = -a0 * v * qdot.head(translational);
  return z;
}

std::vector<Interval> bounds_around(const Vector& theta, double rel) {
  std::vector<Interval> b;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double w = rel * std::max(std::abs(theta(i)), 1e-3);
    b.push_back({theta(i) - w, theta(i) + w});
  }
  return b;
}

double scalar_override(const SystemOverrides& o, const std::string& key, double fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  if (it->second.size() != 1) throw DomainError("override '" + key + "' expects one value");
  return it->second.front();
}

Vector vector_override(const SystemOverrides& o, const std::string& key, const Vector& fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  if (static_cast<Eigen::Index>(it->second.size()) != fallback.size()) {
    throw DomainError("override '" + key + "' expects " + std::to_string(fallback.size()) +
                      " values");
  }
  return Eigen::Map<const Vector>(it->second.data(), fallback.size());
}

void reject_unknown(const SystemOverrides& o, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : o) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw DomainError("unknown system override '" + key + "'");
    }
  }
}

}  // namespace

std::vector<int> BenchmarkSystem::free_cols() const {
  std::vector<int> cols;
  for (int c = 0; c < layout.dim(); ++c) {
    const bool dependent =
        std::find(dependent_cols.begin(), dependent_cols.end(), c) != dependent_cols.end();
    if (!dependent && domain[c].width() > 0.0) cols.push_back(c);
  }
  return cols;
}

Vector BenchmarkSystem::acceleration(const State& x) const {
  return uke_acceleration(dynamics, constraint, x);
}

// ---------------------------------------------------------------- surface

double surface_height(double q1, double q2, const Vector& p) {
  return p(0) * q1 * q1 + p(1) * q2 * q2 + p(2) * q1 + p(3) * std::cos(p(4) * q1);
}

ConstraintEval surface_constraint(const State& x, const Vector& p) {
  const double q1 = x.q(0), q2 = x.q(1);
  const double qd1 = x.qdot(0), qd2 = x.qdot(1);
  ConstraintEval c{Matrix(1, 3), Vector(1)};
  c.A << 2.0 * p(0) * q1 + p(2) - p(3) * p(4) * std::sin(p(4) * q1), 2.0 * p(1) * q2, -1.0;
  c.b << -2.0 * p(0) * qd1 * qd1 - 2.0 * p(1) * qd2 * qd2 +
             p(3) * p(4) * p(4) * qd1 * qd1 * std::cos(p(4) * q1);
  return c;
}

AccelPair surface_dynamics(const State& x, double mass, double damping) {
  AccelPair r;
  r.a = Vector(3);
  r.a << x.u(0) / mass, x.u(1) / mass, (x.u(2) - mass * kGravity) / mass;
  r.z = quadratic_damping(x.qdot, 3, damping);
  return r;
}

double transfer_surface_height(double q1, double q2, const Vector& c) {
  return c(0) * q1 + c(1) * q2 + c(2) * std::cos(c(3) * q1);
}

ConstraintEval transfer_surface_constraint(const State& x, const Vector& c) {
  const double q1 = x.q(0), qd1 = x.qdot(0);
  ConstraintEval e{Matrix(1, 3), Vector(1)};
  e.A << c(0) - c(2) * c(3) * std::sin(c(3) * q1), c(1), -1.0;
  e.b << c(2) * c(3) * c(3) * qd1 * qd1 * std::cos(c(3) * q1);
  return e;
}

namespace {

BenchmarkSystem surface_common(const SurfaceParams& params) {
  BenchmarkSystem s;
  s.layout = {3, 3};
  s.m = 1;
  const double mass = params.mass, a0 = params.damping;
  s.dynamics.eval_M = [mass](const State&, const Vector&) {
    return Matrix(mass * Matrix::Identity(3, 3));
  };
  s.dynamics.eval_a = [mass, a0](const State& x) { return surface_dynamics(x, mass, a0).a; };
  s.dynamics.eval_z = [a0](const State& x) { return quadratic_damping(x.qdot, 3, a0); };
  // The particle mass is known, so the parametric mean has no extra parameters.
  s.parametric_mean = [mass, a0](const State& x, const Vector&, const Vector&) {
    return surface_dynamics(x, mass, a0).a;
  };
  s.mean_params_star = Vector(0);

  const double pr = params.position_range, vr = params.velocity_range,
               ur = params.control_range;
  s.domain = {{-pr, pr}, {-pr, pr}, {0, 0},     {-vr, vr}, {-vr, vr},
              {0, 0},    {0, 0},    {-ur, ur}, {-ur, ur}, {-ur, ur}};
  s.dependent_cols = {2, 5};
  return s;
}

}  // namespace

BenchmarkSystem make_surface(const SurfaceParams& params) {
  if (params.mass <= 0.0) throw DomainError("surface: mass must be positive");
  if (params.theta.size() != 5) throw DomainError("surface: theta must have 5 entries");
  BenchmarkSystem s = surface_common(params);
  s.name = "surface";
  s.constraint = {3, 1, surface_constraint, params.theta};
  s.theta_names = {"p1", "p2", "p3", "p4", "p5"};
  s.theta_bounds = bounds_around(params.theta, 0.5);
  s.trainable_theta = {0, 1, 2, 3, 4};
  s.project = [](State& x, const Vector& p) {
    x.q(2) = surface_height(x.q(0), x.q(1), p);
    const ConstraintEval c = surface_constraint(x, p);
    x.qdot(2) = c.A(0, 0) * x.qdot(0) + c.A(0, 1) * x.qdot(1);
  };
  s.residual = [](const State& x, const Vector& p) {
    return x.q(2) - surface_height(x.q(0), x.q(1), p);
  };
  return s;
}

BenchmarkSystem make_surface_transfer(const SurfaceParams& params,
                                      const TransferSurfaceParams& transfer) {
  if (transfer.theta.size() != 4) throw DomainError("surface_transfer: theta must have 4 entries");
  BenchmarkSystem s = surface_common(params);
  s.name = "surface_transfer";
  s.constraint = {3, 1, transfer_surface_constraint, transfer.theta};
  s.theta_names = {"c1", "c2", "c3", "c4"};
  s.theta_bounds = bounds_around(transfer.theta, 0.5);
  s.trainable_theta = {0, 1, 2, 3};
  s.project = [](State& x, const Vector& c) {
    x.q(2) = transfer_surface_height(x.q(0), x.q(1), c);
    const ConstraintEval e = transfer_surface_constraint(x, c);
    x.qdot(2) = e.A(0, 0) * x.qdot(0) + e.A(0, 1) * x.qdot(1);
  };
  s.residual = [](const State& x, const Vector& c) {
    return x.q(2) - transfer_surface_height(x.q(0), x.q(1), c);
  };
  return s;
}

// --------------------------------------------------------------- unicycle

SystemTerms unicycle_model(const State& x, const Vector& theta, double damping) {
  const double mu = theta(0), ic = theta(1);
  const double q3 = x.q(2), c3 = std::cos(q3);
  SystemTerms r;
  r.M = Vector((Vector(3) << mu, mu, ic).finished()).asDiagonal();
  const double u1 = x.u.size() > 0 ? x.u(0) : 0.0;
  const double u2 = x.u.size() > 1 ? x.u(1) : 0.0;
  r.a = Vector(3);
  r.a << u1 * c3 / mu, u1 * std::sin(q3) / mu, u2 / ic;
  r.z = quadratic_damping(x.qdot, 2, damping);
  r.constraint.A = Matrix(1, 3);
  r.constraint.A << -std::tan(q3), 1.0, 0.0;
  r.constraint.b = Vector(1);
  r.constraint.b << x.qdot(0) * x.qdot(2) / (c3 * c3);
  return r;
}

ConstraintEval unicycle_constraint_trig(const State& x) {
  const double s3 = std::sin(x.q(2)), c3 = std::cos(x.q(2));
  ConstraintEval e{Matrix(1, 3), Vector(1)};
  e.A << -s3, c3, 0.0;
  e.b << x.qdot(2) * (x.qdot(0) * c3 + x.qdot(1) * s3);
  return e;
}

BenchmarkSystem make_unicycle(const UnicycleParams& params) {
  if (params.mass <= 0.0 || params.inertia <= 0.0) {
    throw DomainError("unicycle: mass and inertia must be positive");
  }
  BenchmarkSystem s;
  s.name = "unicycle";
  s.layout = {3, 2};
  s.m = 1;
  const double a0 = params.damping;
  const Vector theta = (Vector(2) << params.mass, params.inertia).finished();
  s.dynamics.eval_M = [](const State&, const Vector& th) {
    return Matrix(Vector((Vector(3) << th(0), th(0), th(1)).finished()).asDiagonal());
  };
  s.dynamics.eval_a = [theta, a0](const State& x) { return unicycle_model(x, theta, a0).a; };
  s.dynamics.eval_z = [a0](const State& x) { return quadratic_damping(x.qdot, 2, a0); };
  s.constraint = {3, 1,
                  [](const State& x, const Vector&) {
                    ConstraintEval e{Matrix(1, 3), Vector(1)};
                    const double c3 = std::cos(x.q(2));
                    e.A << -std::tan(x.q(2)), 1.0, 0.0;
                    e.b << x.qdot(0) * x.qdot(2) / (c3 * c3);
                    return e;
                  },
                  theta};
  s.theta_names = {"m_u", "I_c"};
  s.theta_bounds = bounds_around(theta, 0.5);
  // Only the ratio I_c / m_u is identifiable; the mass is held fixed.
  s.trainable_theta = {1};
  s.parametric_mean = [a0](const State& x, const Vector& th, const Vector&) {
    return unicycle_model(x, th, a0).a;
  };
  s.mean_params_star = Vector(0);

  const double pr = params.position_range, hr = params.heading_range,
               vr = params.velocity_range, ur = params.control_range;
  s.domain = {{-pr, pr}, {-pr, pr}, {-hr, hr}, {-vr, vr}, {0, 0},
              {-vr, vr}, {0, 0},    {-ur, ur}, {-ur, ur}};
  s.dependent_cols = {4};
  s.project = [](State& x, const Vector&) { x.qdot(1) = x.qdot(0) * std::tan(x.q(2)); };
  // cos q3 times the tan-form residual: same zero set, but bounded when the
  // heading passes +-90 deg.
  s.residual = [](const State& x, const Vector&) {
    return x.qdot(1) * std::cos(x.q(2)) - x.qdot(0) * std::sin(x.q(2));
  };
  return s;
}

// ---------------------------------------------------------------- duffing

double duffing_offset(double t, const Vector& p) {
  return p(0) * std::exp(-p(1) * t) * std::sin(p(2) * t);
}

namespace {

double duffing_offset_rate(double t, const Vector& p) {
  return p(0) * std::exp(-p(1) * t) * (-p(1) * std::sin(p(2) * t) + p(2) * std::cos(p(2) * t));
}

ConstraintEval duffing_constraint(const State& x, const Vector& p) {
  const double t = x.t;
  ConstraintEval e{Matrix(1, 2), Vector(1)};
  e.A << -1.0, 1.0;
  e.b << p(0) * std::exp(-p(1) * t) *
             ((p(1) * p(1) - p(2) * p(2)) * std::sin(p(2) * t) -
              2.0 * p(1) * p(2) * std::cos(p(2) * t));
  return e;
}

// Linear spring and damper accelerations; mean_params = (k, c).
Vector duffing_linear_accel(const State& x, double k, double c, double m1, double m2) {
  const double q1 = x.q(0), q2 = x.q(1);
  Vector a(2);
  a << (-k * q1 - c * x.qdot(0) + k * (q2 - q1)) / m1,
      (-k * q2 - c * x.qdot(1) - k * (q2 - q1)) / m2;
  return a;
}

}  // namespace

SystemTerms duffing_model(const State& x, const Vector& theta, const DuffingParams& d) {
  SystemTerms r;
  r.M = Vector((Vector(2) << d.mass1, d.mass2).finished()).asDiagonal();
  const double q1 = x.q(0), q2 = x.q(1), rel = q2 - q1;
  r.a = duffing_linear_accel(x, d.stiffness, d.damping, d.mass1, d.mass2);
  r.a(0) += (-d.cubic_stiffness * q1 * q1 * q1 + d.cubic_stiffness * rel * rel * rel) / d.mass1;
  r.a(1) += (-d.cubic_stiffness * q2 * q2 * q2 - d.cubic_stiffness * rel * rel * rel) / d.mass2;
  r.z = Vector::Zero(2);
  r.constraint = duffing_constraint(x, theta);
  return r;
}

BenchmarkSystem make_duffing(const DuffingParams& params) {
  if (params.mass1 <= 0.0 || params.mass2 <= 0.0) throw DomainError("duffing: masses must be positive");
  if (params.theta.size() != 3) throw DomainError("duffing: theta must have 3 entries");
  BenchmarkSystem s;
  s.name = "duffing";
  s.layout = {2, 0};
  s.m = 1;
  const DuffingParams d = params;
  s.dynamics.eval_M = [d](const State&, const Vector&) {
    return Matrix(Vector((Vector(2) << d.mass1, d.mass2).finished()).asDiagonal());
  };
  s.dynamics.eval_a = [d](const State& x) { return duffing_model(x, d.theta, d).a; };
  s.dynamics.eval_z = [](const State&) { return Vector(Vector::Zero(2)); };
  s.constraint = {2, 1, duffing_constraint, params.theta};
  s.theta_names = {"p1", "p2", "p3"};
  s.theta_bounds = bounds_around(params.theta, 0.5);
  s.trainable_theta = {0, 1, 2};
  s.parametric_mean = [d](const State& x, const Vector&, const Vector& mp) {
    return duffing_linear_accel(x, mp(0), mp(1), d.mass1, d.mass2);
  };
  s.mean_param_names = {"k", "c"};
  s.mean_params_star = (Vector(2) << params.stiffness, params.damping).finished();
  s.mean_param_bounds = bounds_around(s.mean_params_star, 0.5);

  const double pr = params.position_range, vr = params.velocity_range;
  s.domain = {{-pr, pr}, {0, 0}, {-vr, vr}, {0, 0}, {0.0, params.time_horizon}};
  s.dependent_cols = {1, 3};
  s.project = [](State& x, const Vector& p) {
    x.q(1) = x.q(0) + duffing_offset(x.t, p);
    x.qdot(1) = x.qdot(0) + duffing_offset_rate(x.t, p);
  };
  s.residual = [](const State& x, const Vector& p) {
    return x.q(1) - x.q(0) - duffing_offset(x.t, p);
  };
  return s;
}

// ---------------------------------------------------------------- registry

std::vector<std::string> system_names() { return {"surface", "unicycle", "duffing"}; }

BenchmarkSystem make_system(std::string_view name, const SystemOverrides& o) {
  if (name == "surface" || name == "surface_transfer") {
    reject_unknown(o, {"mass", "damping", "theta_p", "transfer_theta_p", "position_range",
                       "velocity_range", "control_range"});
    SurfaceParams p;
    p.mass = scalar_override(o, "mass", p.mass);
    p.damping = scalar_override(o, "damping", p.damping);
    p.theta = vector_override(o, "theta_p", p.theta);
    p.position_range = scalar_override(o, "position_range", p.position_range);
    p.velocity_range = scalar_override(o, "velocity_range", p.velocity_range);
    p.control_range = scalar_override(o, "control_range", p.control_range);
    if (name == "surface") return make_surface(p);
    TransferSurfaceParams t;
    t.theta = vector_override(o, "transfer_theta_p", t.theta);
    return make_surface_transfer(p, t);
  }
  if (name == "unicycle") {
    reject_unknown(o, {"mass", "inertia", "damping", "position_range", "heading_range",
                       "velocity_range", "control_range"});
    UnicycleParams p;
    p.mass = scalar_override(o, "mass", p.mass);
    p.inertia = scalar_override(o, "inertia", p.inertia);
    p.damping = scalar_override(o, "damping", p.damping);
    p.position_range = scalar_override(o, "position_range", p.position_range);
    p.heading_range = scalar_override(o, "heading_range", p.heading_range);
    p.velocity_range = scalar_override(o, "velocity_range", p.velocity_range);
    p.control_range = scalar_override(o, "control_range", p.control_range);
    return make_unicycle(p);
  }
  if (name == "duffing") {
    reject_unknown(o, {"mass1", "mass2", "stiffness", "cubic_stiffness", "damping", "theta_p",
                       "position_range", "velocity_range", "time_horizon"});
    DuffingParams p;
    p.mass1 = scalar_override(o, "mass1", p.mass1);
    p.mass2 = scalar_override(o, "mass2", p.mass2);
    p.stiffness = scalar_override(o, "stiffness", p.stiffness);
    p.cubic_stiffness = scalar_override(o, "cubic_stiffness", p.cubic_stiffness);
    p.damping = scalar_override(o, "damping", p.damping);
    p.theta = vector_override(o, "theta_p", p.theta);
    p.position_range = scalar_override(o, "position_range", p.position_range);
    p.velocity_range = scalar_override(o, "velocity_range", p.velocity_range);
    p.time_horizon = scalar_override(o, "time_horizon", p.time_horizon);
    return make_duffing(p);
  }
  throw DomainError("unknown system '" + std::string(name) + "'");
}

}  // namespace gpsq
