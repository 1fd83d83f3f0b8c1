#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ecgdx/boosting.hpp"

namespace ecgdx {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const BoostedModel& model);
BoostedModel model_from_json(const nlohmann::json& j);

std::string serialize_model(const BoostedModel& model);
BoostedModel load_model(const std::filesystem::path& path);

nlohmann::json train_config_to_json(const TrainConfig& config);
// Unknown keys are rejected so typos in config files do not pass silently.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace ecgdx
