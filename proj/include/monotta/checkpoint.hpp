#pragma once

#include "monotta/detector.hpp"
#include "monotta/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace monotta {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Pre-trained weights together with everything needed to interpret them.
struct DetectorCheckpoint {
  ToyDetector<float> model;
  TrainConfig train_config;
  double clean_map = 0;
};

/// Binary layout: "MONOTTA\0" magic, u32 version, u64 header length, JSON header
/// (architecture, training config, tensor table, payload digest), then the
/// float32 little-endian tensors in table order.
void save_checkpoint(const DetectorCheckpoint& checkpoint, const std::filesystem::path& path);

/// Throws std::runtime_error on truncation, bad magic, version mismatch, digest
/// mismatch, or an architecture other than `expected` (when given).
DetectorCheckpoint load_checkpoint(const std::filesystem::path& path, const Architecture* expected = nullptr);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace monotta
