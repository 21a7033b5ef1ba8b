#include "gpsq/rk45.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace gpsq;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  t.back() = b;
  return t;
}

}  // namespace

TEST_CASE("harmonic oscillator keeps its energy over 100 periods") {
  const OdeRhs f = [](double, const Vector& y) { return Vector((Vector(2) << y(1), -y(0)).finished()); };
  const double T = 200.0 * std::numbers::pi;
  const auto times = linspace(0.0, T, 401);
  const OdeSolution s = integrate_rk45(f, 0.0, (Vector(2) << 1.0, 0.0).finished(), times);
  REQUIRE(s.t.size() == times.size());
  double drift = 0.0, err = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    drift = std::max(drift, std::abs(0.5 * s.y[i].squaredNorm() - 0.5));
    err = std::max(err, std::abs(s.y[i](0) - std::cos(s.t[i])));
  }
  CHECK(drift <= 1e-6);
  CHECK(err <= 1e-5);
}

TEST_CASE("dense output between steps matches the closed form") {
  const OdeRhs f = [](double, const Vector& y) { return Vector(-y); };
  const auto times = linspace(0.0, 5.0, 1001);
  const OdeSolution s = integrate_rk45(f, 0.0, Vector::Ones(1), times);
  CHECK(s.steps < 1000);  // most report times fall inside steps
  for (std::size_t i = 0; i < s.t.size(); ++i) CHECK(std::abs(s.y[i](0) - std::exp(-s.t[i])) <= 1e-8);
}

TEST_CASE("quartic solutions are reproduced exactly, dense output included") {
  const OdeRhs f = [](double t, const Vector&) { return Vector::Constant(1, 4.0 * t * t * t); };
  OdeOptions opt;
  opt.first_step = 0.5;
  const OdeSolution s = integrate_rk45(f, 0.0, Vector::Zero(1), {1.0, 2.0}, opt);
  CHECK(s.y[0](0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.y[1](0) == doctest::Approx(16.0).epsilon(1e-14));
}

TEST_CASE("report times at the start and empty reports") {
  const OdeRhs f = [](double, const Vector& y) { return Vector(y); };
  const Vector y0 = Vector::Constant(1, 2.0);
  CHECK(integrate_rk45(f, 0.0, y0, {}).t.empty());
  const OdeSolution s = integrate_rk45(f, 1.0, y0, {1.0, 1.0, 2.0});
  CHECK(s.y[0](0) == 2.0);
  CHECK(s.y[1](0) == 2.0);
  CHECK(s.y[2](0) == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-7));
  CHECK_THROWS_AS(integrate_rk45(f, 0.0, y0, {2.0, 1.0}), DomainError);
  CHECK_THROWS_AS(integrate_rk45(f, 1.0, y0, {0.5}), DomainError);
  OdeOptions bad;
  bad.rtol = 0.0;
  CHECK_THROWS_AS(integrate_rk45(f, 0.0, y0, {1.0}, bad), DomainError);
}

TEST_CASE("finite-time blow-up raises with the last valid state") {
  // y' = y^2, y(0) = 1 has y = 1 / (1 - t).
  const OdeRhs f = [](double, const Vector& y) { return Vector(y.array().square()); };
  try {
    integrate_rk45(f, 0.0, Vector::Ones(1), linspace(0.0, 2.0, 21));
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(std::abs(e.last_t() - 1.0) < 1e-2);
    CHECK(std::isfinite(e.last_y()(0)));
    REQUIRE(e.partial().t.size() >= 10);  // 0.0 .. 0.9 at least
    CHECK(e.partial().t.size() <= 11);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(e.partial().y[i](0) == doctest::Approx(1.0 / (1.0 - e.partial().t[i])).epsilon(1e-6));
    }
  }
}

TEST_CASE("a non-finite derivative at the start is an integration error") {
  const OdeRhs f = [](double, const Vector& y) { return Vector(y / 0.0); };
  CHECK_THROWS_AS(integrate_rk45(f, 0.0, Vector::Ones(1), {1.0}), IntegrationError);
}

TEST_CASE("step budget") {
  const OdeRhs f = [](double t, const Vector&) { return Vector::Constant(1, std::cos(100.0 * t)); };
  OdeOptions opt;
  opt.max_steps = 5;
  CHECK_THROWS_AS(integrate_rk45(f, 0.0, Vector::Zero(1), {10.0}, opt), IntegrationError);
}
