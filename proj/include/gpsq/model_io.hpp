#pragma once

#include "gpsq/train.hpp"

#include <filesystem>

namespace gpsq {

/// Writes a fitted model as JSON. The dataset is referenced by path (stored
/// relative to the model file) rather than copied.
void save_model(const FittedModel& model, const std::filesystem::path& path,
                const std::filesystem::path& dataset_path, const SystemOverrides& overrides = {},
                const std::string& config_hash = "none", int best_restart = 0);

/// Rebuilds the model and its posterior. Throws ParseError for malformed
/// files or when the stored LML is not reproduced.
FittedModel load_model(const std::filesystem::path& path);

}  // namespace gpsq
