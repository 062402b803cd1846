#pragma once

// JSON form of the training and model configuration. Keys mirror the struct
// field names; nested structs are nested objects. Unknown keys are rejected
// and missing keys keep their defaults.

#include "mimic/backbone.hpp"
#include "mimic/data.hpp"
#include "mimic/trainer.hpp"

#include <json.hpp>

#include <string>

namespace mimic {

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

/// Fields absent from `j` keep the values already in `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Where the command-line tool gets its images. Manifests take precedence;
/// without a train manifest the labeled task is synthesized from `synthetic`,
/// and without a corpus manifest `corpus_size` procedural images are made.
struct DataConfig {
  std::string train_manifest;
  std::string test_manifest;
  std::string corpus_manifest;  // labels are read but ignored
  SyntheticSpec synthetic;      // image_size and channels follow the encoder
  int corpus_size = 5000;
  std::uint64_t seed = 0;       // data generation only; training uses TrainConfig::seed
  std::string init;             // checkpoint to fine-tune from
  std::string checkpoint;       // checkpoint to evaluate or export

  void validate() const;
};

/// A full run description: the TrainConfig keys at top level plus "data".
struct RunConfig {
  TrainConfig train;
  DataConfig data;
};

nlohmann::json to_json(const DataConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
DataConfig data_config_from_json(const nlohmann::json& j, DataConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Parses a JSON file. Throws ConfigError on unreadable or malformed input.
nlohmann::json read_json_file(const std::string& path);

}  // namespace mimic
