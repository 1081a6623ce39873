#pragma once

#include "cipipe/types.hpp"

#include <json.hpp>

#include <filesystem>

namespace cipipe {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PartitionModel& model);
nlohmann::json to_json(const CiRegressor& model);
nlohmann::json to_json(const GroupAssignment& groups);
nlohmann::json to_json(const AttributeTable& table);

/// Both check schema_version and kind, then the type's invariants.
PartitionModel partition_model_from_json(const nlohmann::json& j);
CiRegressor regressor_from_json(const nlohmann::json& j);

void save_model(const PartitionModel& model, const std::filesystem::path& path);
void save_model(const CiRegressor& model, const std::filesystem::path& path);
PartitionModel load_partition_model(const std::filesystem::path& path);
CiRegressor load_regressor(const std::filesystem::path& path);

/// Pretty-printed JSON followed by a newline; the byte layout is deterministic.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace cipipe
