#include "gpsq/rk45.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpsq {

namespace {

// Dormand-Prince tableau.
constexpr double C[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double A[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// Fifth-order minus embedded fourth-order weights.
constexpr double E[7] = {71.0 / 57600, 0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
// Continuous extension: y(t + s h) = y + h sum_i k_i sum_j P[i][j] s^(j+1).
constexpr double P[7][4] = {
    {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

double error_norm(const Vector& err, const Vector& y0, const Vector& y1, const OdeOptions& opt) {
  const Vector scale = (opt.atol + opt.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  return std::sqrt((err.array() / scale.array()).square().mean());
}

double initial_step(const OdeRhs& f, double t0, const Vector& y0, const Vector& f0, const OdeOptions& opt) {
  const Vector scale = (opt.atol + opt.rtol * y0.cwiseAbs().array()).matrix();
  const double d0 = std::sqrt((y0.array() / scale.array()).square().mean());
  const double d1 = std::sqrt((f0.array() / scale.array()).square().mean());
  const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  const Vector f1 = f(t0 + h0, y0 + h0 * f0);
  const double d2 = std::sqrt(((f1 - f0).array() / scale.array()).square().mean()) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min(100.0 * h0, h1);
}

}  // namespace

OdeSolution integrate_rk45(const OdeRhs& f, double t0, const Vector& y0, const std::vector<double>& report,
                           const OdeOptions& opt) {
  if (!(opt.rtol > 0.0) || !(opt.atol >= 0.0)) throw DomainError("rk45: tolerances must be positive");
  if (!std::is_sorted(report.begin(), report.end()) || (!report.empty() && report.front() < t0)) {
    throw DomainError("rk45: report times must be sorted and not before t0");
  }
  require_finite(y0, "rk45 initial state");

  OdeSolution sol;
  std::size_t next = 0;
  while (next < report.size() && report[next] == t0) {
    sol.t.push_back(t0);
    sol.y.push_back(y0);
    ++next;
  }
  if (next == report.size()) return sol;
  const double t_end = report.back();

  auto rhs = [&](double t, const Vector& y) {
    ++sol.evaluations;
    Vector d = f(t, y);
    if (d.size() != y.size() || !d.allFinite()) throw std::runtime_error("non-finite derivative");
    return d;
  };
  auto fail = [&](const std::string& why, double t, const Vector& y) {
    throw IntegrationError("rk45: " + why + " at t = " + std::to_string(t), t, y, sol);
  };

  double t = t0;
  Vector y = y0;
  Vector k[7];
  double h = opt.first_step;
  try {
    k[0] = rhs(t, y);
    if (h <= 0.0) h = initial_step(rhs, t, y, k[0], opt);
  } catch (const std::runtime_error&) {
    fail("non-finite derivative", t, y);
  }
  if (opt.max_step > 0.0) h = std::min(h, opt.max_step);

  while (next < report.size()) {
    if (sol.steps + sol.rejected >= opt.max_steps) fail("step budget exhausted", t, y);
    const double h_min = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    h = std::min(h, t_end - t);
    if (h < h_min && t_end - t > h_min) fail("step size underflow", t, y);

    Vector y_new;
    double err = 0.0;
    bool finite = true;
    try {
      for (int s = 1; s < 7; ++s) {
        Vector ys = y;
        for (int j = 0; j < s; ++j)
          if (A[s][j] != 0.0) ys += h * A[s][j] * k[j];
        if (s == 6) y_new = ys;
        k[s] = rhs(t + C[s] * h, ys);
      }
      Vector e = Vector::Zero(y.size());
      for (int s = 0; s < 7; ++s) e += E[s] * k[s];
      err = error_norm(h * e, y, y_new, opt);
      finite = std::isfinite(err);
    } catch (const std::runtime_error&) {
      finite = false;
    }

    if (!finite || err > 1.0) {
      ++sol.rejected;
      h *= finite ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
      continue;
    }

    const double t_new = h == t_end - t ? t_end : t + h;
    while (next < report.size() && report[next] <= t_new) {
      const double s = (report[next] - t) / h;
      Vector acc = Vector::Zero(y.size());
      for (int i = 0; i < 7; ++i) {
        const double w = s * (P[i][0] + s * (P[i][1] + s * (P[i][2] + s * P[i][3])));
        if (w != 0.0) acc += w * k[i];
      }
      sol.t.push_back(report[next]);
      sol.y.push_back(report[next] == t_new ? y_new : Vector(y + h * acc));
      ++next;
    }
    ++sol.steps;
    t = t_new;
    y = std::move(y_new);
    k[0] = k[6];
    const double grow = err == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    h *= grow;
    if (opt.max_step > 0.0) h = std::min(h, opt.max_step);
  }
  return sol;
}

}  // namespace gpsq
