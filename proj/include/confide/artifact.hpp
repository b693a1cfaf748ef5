#pragma once

// On-disk calibration artifact and the run manifest that accompanies every
// CLI output. The artifact stores calibration scores and content hashes, not
// pool embeddings; pools are rebuilt from the dataset.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confide/pipeline.hpp"

namespace confide {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kArtifactVersion = 1;

struct RunManifest {
  std::string command;
  std::string dataset;
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::map<std::string, std::string> input_hashes;
};

nlohmann::json to_json(const RunManifest& run);
RunManifest run_manifest_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct CalibrationArtifact {
  PipelineConfig config;
  std::string dataset_hash;  // calibration_inputs_hash of the dataset
  std::string index_fingerprint;
  std::vector<double> scores;  // +inf stored as null
  std::vector<std::uint32_t> labels;
  RunManifest run;
};

nlohmann::json to_json(const CalibrationArtifact& artifact);
CalibrationArtifact artifact_from_json(const nlohmann::json& j, const std::string& file = {});

void write_artifact(const CalibrationArtifact& artifact, const std::filesystem::path& file);
CalibrationArtifact read_artifact(const std::filesystem::path& file);

/// Writes `<output>.run.json`: the manifest plus wall-clock timestamps. Kept
/// apart from the output itself so reruns stay byte-identical.
void write_run_sidecar(const RunManifest& run, const std::filesystem::path& output,
                       const std::string& started_at, const std::string& finished_at);

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

/// Writes `text` to `file`, raising an io error on failure.
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace confide
