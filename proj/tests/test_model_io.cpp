#include "gpsq/datagen.hpp"
#include "gpsq/io.hpp"
#include "gpsq/model_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace gpsq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gpsq_test_model_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig quick(std::uint64_t seed) {
  TrainConfig c;
  c.restarts = 1;
  c.max_iters = 25;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("saved models reload with identical predictions") {
  const BenchmarkSystem sys = make_duffing();
  const Dataset d = make_dataset(sys, 25, 1e-2, 3);
  const Matrix grid = prediction_grid(sys, 4);
  for (Family f : {Family::se, Family::lmc, Family::gp2_fixed_param, Family::gp2_est_param}) {
    CAPTURE(family_name(f));
    const fs::path dir = scratch(family_name(f));
    save_dataset(d, dir / "data.csv", "none");
    const FittedModel m = fit(f, sys, d, quick(11)).best;
    save_model(m, dir / "m" / "model.json", dir / "data.csv");
    const FittedModel back = load_model(dir / "m" / "model.json");
    CHECK(back.family() == f);
    CHECK(back.params() == m.params());
    const Prediction a = m.predict(grid), b = back.predict(grid);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.var - b.var).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.theta_p() == m.theta_p());
  }
}

TEST_CASE("model files survive moving the output directory") {
  const BenchmarkSystem sys = make_duffing();
  const Dataset d = make_dataset(sys, 20, 1e-2, 4);
  const fs::path dir = scratch("move");
  save_dataset(d, dir / "a" / "data" / "run.csv", "none");
  save_model(fit(Family::se, sys, d, quick(2)).best, dir / "a" / "models" / "m.json", dir / "a" / "data" / "run.csv");
  fs::rename(dir / "a", dir / "b");
  CHECK_NOTHROW(load_model(dir / "b" / "models" / "m.json"));
}

TEST_CASE("corrupted model files are parse errors") {
  const BenchmarkSystem sys = make_duffing();
  const Dataset d = make_dataset(sys, 20, 1e-2, 5);
  const fs::path dir = scratch("corrupt");
  save_dataset(d, dir / "data.csv", "none");
  save_model(fit(Family::gp2_fixed_zero, sys, d, quick(3)).best, dir / "m.json", dir / "data.csv");
  const auto original = nlohmann::json::parse(read_file(dir / "m.json"));

  auto write_variant = [&](auto&& edit) {
    nlohmann::json j = original;
    edit(j);
    write_file_atomic(dir / "v.json", j.dump());
    return dir / "v.json";
  };
  CHECK_NOTHROW(load_model(write_variant([](nlohmann::json&) {})));
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j["params"][0]["name"] = "x"; })), ParseError);
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j["params"].erase(0); })), ParseError);
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j["schema_version"] = 9; })), ParseError);
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j["family"] = "gp3"; })), ParseError);
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j["lml"] = j["lml"].get<double>() + 1.0; })),
                  ParseError);
  CHECK_THROWS_AS(load_model(write_variant([](nlohmann::json& j) { j.erase("dataset"); })), ParseError);
  write_file_atomic(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_model(dir / "bad.json"), ParseError);
  CHECK_THROWS_AS(load_model(dir / "absent.json"), ParseError);

  // A different dataset behind the same path no longer reproduces the LML.
  save_dataset(make_dataset(sys, 20, 1e-2, 6), dir / "data.csv", "none");
  CHECK_THROWS_AS(load_model(dir / "m.json"), ParseError);
}
