#pragma once

// Checkpoints: a JSON manifest (config, vocabulary, tensor table) next to a
// little-endian binary blob holding the tensors back to back.

#include <filesystem>
#include <string_view>

#include "iekm/model.hpp"
#include "json.hpp"

namespace iekm {

inline constexpr int kCheckpointVersion = 1;

// float32 is the interchange format; float64 reloads bit-identically.
enum class StorageType { float64, float32 };

std::string_view to_string(StorageType type);
StorageType parse_storage_type(std::string_view text);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// Writes `manifest` and `<manifest stem>.bin` in the same directory.
void save_checkpoint(const std::filesystem::path& manifest, const Model& model,
                     StorageType storage = StorageType::float32);

// Throws ParseError or ValidationError when the manifest, the tensor table or
// the blob size disagree with the stored config.
Model load_checkpoint(const std::filesystem::path& manifest);

}  // namespace iekm
