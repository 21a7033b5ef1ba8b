#include "gpsq/datagen.hpp"
#include "gpsq/io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace gpsq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gpsq_test_datagen";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("sampled inputs lie on the manifold and are deterministic") {
  const BenchmarkSystem surface = make_surface();
  const Matrix X = sample_constrained_inputs(surface, 1, 9);
  const State x = surface.layout.state(X.row(0));
  const Vector& th = surface.theta_star();
  CHECK(std::abs(x.q(2) - surface_height(x.q(0), x.q(1), th)) <= 1e-10);
  CHECK(sample_constrained_inputs(surface, 30, 5) == sample_constrained_inputs(surface, 30, 5));
  CHECK(sample_constrained_inputs(surface, 30, 5) != sample_constrained_inputs(surface, 30, 6));
  CHECK_THROWS_AS(sample_constrained_inputs(surface, 0, 1), DomainError);

  const BenchmarkSystem uni = make_unicycle();
  const Matrix U = sample_constrained_inputs(uni, 200, 3);
  for (Eigen::Index k = 0; k < U.rows(); ++k) {
    CHECK(std::abs(U(k, 4) - U(k, 3) * std::tan(U(k, 2))) <= 1e-10);
  }
}

TEST_CASE("samples spread over the free dimensions") {
  for (const std::string& name : system_names()) {
    CAPTURE(name);
    const BenchmarkSystem sys = make_system(name);
    const Matrix X = sample_constrained_inputs(sys, 100, 17);
    for (int c : sys.free_cols()) {
      const double cover = X.col(c).maxCoeff() - X.col(c).minCoeff();
      CHECK(cover >= 0.8 * sys.domain[c].width());
    }
  }
}

TEST_CASE("noiseless datasets satisfy the constraining equation") {
  for (const std::string& name : system_names()) {
    CAPTURE(name);
    const BenchmarkSystem sys = make_system(name);
    const Dataset d = make_dataset(sys, 100, 0.0, 2);
    CHECK(d.size() == 100);
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      const ConstraintEval c = sys.constraint(sys.layout.state(d.X.row(k)));
      CHECK(oracle::inf_norm(c.A * d.Y.row(k).transpose() - c.b) <= 1e-10 * (1.0 + c.b.norm()));
    }
  }
  CHECK_THROWS_AS(make_dataset(make_surface(), 10, -1.0, 1), DomainError);
}

TEST_CASE("noise is added with the requested relative scale") {
  const BenchmarkSystem sys = make_surface();
  const Dataset clean = make_dataset(sys, 500, 0.0, 8);
  const Dataset noisy = make_dataset(sys, 500, 0.05, 8);
  CHECK(clean.X == noisy.X);
  const NormStats s = NormStats::compute(clean.X, clean.Y);
  const Matrix E = noisy.Y - clean.Y;
  for (int i = 0; i < 3; ++i) {
    const double sd = std::sqrt(E.col(i).squaredNorm() / E.rows());
    CHECK(sd == doctest::Approx(0.05 * s.y_std(i)).epsilon(0.15));
  }
}

TEST_CASE("normalization round trip") {
  const Dataset d = make_dataset(make_unicycle(), 50, kDefaultSigmaY, 1);
  const NormStats& n = d.norm;
  CHECK(oracle::inf_norm(n.denormalize_x(n.normalize_x(d.X)) - d.X) <= 1e-12);
  CHECK(oracle::inf_norm(n.denormalize_y(n.normalize_y(d.Y)) - d.Y) <= 1e-12);
  // The constant time column passes through with unit scale.
  CHECK(n.x_std(d.layout.t_col()) == 1.0);
  const Matrix Xn = n.normalize_x(d.X);
  CHECK(std::abs(Xn.col(0).mean()) < 1e-12);
  CHECK(std::sqrt(Xn.col(0).squaredNorm() / Xn.rows()) == doctest::Approx(1.0));
}

TEST_CASE("prediction grid") {
  const BenchmarkSystem sys = make_duffing();
  const Matrix G = prediction_grid(sys, 2);
  CHECK(G.rows() == (1 << sys.free_cols().size()));
  const Matrix G4 = prediction_grid(sys, 4);
  for (int c : sys.free_cols()) {
    CHECK(G4.col(c).minCoeff() == sys.domain[c].lo);
    CHECK(G4.col(c).maxCoeff() == sys.domain[c].hi);
  }
  for (Eigen::Index k = 0; k < G4.rows(); ++k) {
    const State x = sys.layout.state(G4.row(k));
    CHECK(std::abs(sys.residual(x, sys.theta_star())) <= 1e-10);
    auto pos = [&](double t) {
      State y = x;
      y.t = t;
      y.q = x.q + (t - x.t) * x.qdot;
      return sys.residual(y, sys.theta_star());
    };
    CHECK(std::abs(oracle::fd1(pos, x.t, 1e-4)) <= 1e-8);
  }
  CHECK_THROWS_AS(prediction_grid(sys, 1), DomainError);
}

TEST_CASE("dataset save/load round trip") {
  const Dataset d = make_dataset(make_surface(), 25, kDefaultSigmaY, 12);
  const fs::path p = scratch("round.csv");
  save_dataset(d, p, "abc");
  const Dataset r = load_dataset(p);
  CHECK(r.X == d.X);
  CHECK(r.Y == d.Y);
  CHECK(r.system_name == "surface");
  CHECK(r.seed == 12);
  CHECK(r.norm.y_std == d.norm.y_std);
  CHECK(r.theta_p_used == d.theta_p_used);
  CHECK(read_file(p).rfind("# gpsq", 0) == 0);
}

TEST_CASE("dataset parse errors") {
  const Dataset d = make_dataset(make_duffing(), 5, 0.0, 1);
  const fs::path p = scratch("bad.csv");
  save_dataset(d, p);

  {
    std::ofstream out(p);
    out << "q1,q2,qd1,qd2,t,y1\n1,2,3,4,5,6\n";
  }
  try {
    load_dataset(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("y2") != std::string::npos);
  }

  {
    std::ofstream out(p, std::ios::trunc);
  }
  CHECK_THROWS_AS(load_dataset(p), ParseError);

  {
    std::ofstream out(p);
    out << "q1,q2,qd1,qd2,t,y1,y2\n1,2,3,4,5,6,7\n1,2,x,4,5,6,7\n";
  }
  try {
    load_dataset(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  {
    std::ofstream out(p);
    out << "q1,q2,qd1,qd2,t,y1,y2\n";
  }
  CHECK_THROWS_AS(load_dataset(p), ParseError);
}
