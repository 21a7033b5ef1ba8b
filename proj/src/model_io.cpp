#include "gpsq/model_io.hpp"

#include "gpsq/io.hpp"

#include <json.hpp>

#include <cmath>

namespace gpsq {

namespace {

constexpr int kSchemaVersion = 1;

}  // namespace

void save_model(const FittedModel& model, const std::filesystem::path& path,
                const std::filesystem::path& dataset_path, const SystemOverrides& overrides,
                const std::string& config_hash, int best_restart) {
  const ModelTemplate t(model.family(), model.system(), model.data());
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["gpsq_version"] = kVersion;
  j["config_hash"] = config_hash;
  j["family"] = family_name(model.family());
  j["system"] = model.system().name;
  j["overrides"] = overrides;
  j["best_restart"] = best_restart;
  j["lml"] = model.lml();
  nlohmann::json params = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    params.push_back({{"name", t.names()[static_cast<std::size_t>(i)]}, {"value", model.params()(i)}});
  }
  j["params"] = params;
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  j["dataset"] = std::filesystem::relative(std::filesystem::absolute(dataset_path), std::filesystem::absolute(base))
                     .generic_string();
  write_file_atomic(path, j.dump(2) + "\n");
}

FittedModel load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model " + path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ParseError(e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ParseError("model " + path.string() + ": unsupported schema_version");
    }
    const Family family = parse_family(j.at("family").get<std::string>());
    const auto overrides = j.value("overrides", SystemOverrides{});
    const BenchmarkSystem sys = make_system(j.at("system").get<std::string>(), overrides);
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    const Dataset data = load_dataset(base / j.at("dataset").get<std::string>());

    const ModelTemplate t(family, sys, data);
    const auto& items = j.at("params");
    if (static_cast<Eigen::Index>(items.size()) != t.size()) {
      throw ParseError("model " + path.string() + ": expected " + std::to_string(t.size()) + " parameters");
    }
    Vector p(t.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].at("name").get<std::string>() != t.names()[i]) {
        throw ParseError("model " + path.string() + ": parameter " + std::to_string(i) + " should be '" +
                         t.names()[i] + "'");
      }
      p(static_cast<Eigen::Index>(i)) = items[i].at("value").get<double>();
    }
    FittedModel m = t.make(p);
    const double stored = j.at("lml").get<double>();
    if (!(std::abs(m.lml() - stored) <= 1e-6 * (1.0 + std::abs(stored)))) {
      throw ParseError("model " + path.string() + ": stored LML is not reproduced (dataset changed?)");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model " + path.string() + ": " + e.what());
  } catch (const DomainError& e) {
    throw ParseError("model " + path.string() + ": " + e.what());
  }
}

}  // namespace gpsq
