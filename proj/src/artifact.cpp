#include "confide/artifact.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {
namespace {

using nlohmann::json;

Error artifact_error(const std::string& message, const std::string& file) {
  return Error(ErrorKind::kInputValidation, "artifact-schema", message,
               file.empty() ? std::nullopt : std::optional<std::string>(file));
}

}  // namespace

json to_json(const RunManifest& run) {
  json j;
  j["command"] = run.command;
  j["dataset"] = run.dataset;
  j["hyperparameters"] = run.hyperparameters;
  j["seed"] = run.seed;
  j["tool_version"] = run.tool_version;
  j["input_hashes"] = run.input_hashes;
  return j;
}

RunManifest run_manifest_from_json(const json& j) {
  RunManifest run;
  run.command = j.at("command").get<std::string>();
  run.dataset = j.at("dataset").get<std::string>();
  run.hyperparameters = j.at("hyperparameters");
  run.seed = j.at("seed").get<std::uint64_t>();
  run.tool_version = j.at("tool_version").get<std::string>();
  run.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
  return run;
}

json to_json(const PipelineConfig& config) {
  json j;
  j["k"] = config.index.k;
  j["metric"] = to_string(config.index.metric);
  j["pca"] = config.index.use_pca;
  j["variance_threshold"] = config.index.variance_threshold;
  j["filter_correct"] = config.index.filter_correct;
  j["mode"] = to_string(config.mode);
  j["temperature"] = config.temperature ? json(*config.temperature) : json(nullptr);
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig config;
  config.index.k = j.at("k").get<std::size_t>();
  config.index.metric = parse_metric_kind(j.at("metric").get<std::string>());
  config.index.use_pca = j.at("pca").get<bool>();
  config.index.variance_threshold = j.at("variance_threshold").get<double>();
  config.index.filter_correct = j.value("filter_correct", true);
  config.mode = parse_calibration_mode(j.at("mode").get<std::string>());
  if (auto it = j.find("temperature"); it != j.end() && !it->is_null()) {
    config.temperature = it->get<double>();
  }
  return config;
}

json to_json(const CalibrationArtifact& artifact) {
  json scores = json::array();
  for (double s : artifact.scores) scores.push_back(std::isinf(s) ? json(nullptr) : json(s));
  json j;
  j["format"] = "confide-calibration";
  j["version"] = kArtifactVersion;
  j["config"] = to_json(artifact.config);
  j["dataset_hash"] = artifact.dataset_hash;
  j["index_fingerprint"] = artifact.index_fingerprint;
  j["calibration"] = {{"labels", artifact.labels}, {"scores", scores}};
  j["run"] = to_json(artifact.run);
  return j;
}

CalibrationArtifact artifact_from_json(const json& j, const std::string& file) {
  try {
    if (j.at("format").get<std::string>() != "confide-calibration") {
      throw artifact_error("not a calibration artifact", file);
    }
    if (j.at("version").get<int>() != kArtifactVersion) {
      throw artifact_error(fmt::format("unsupported artifact version {}", j.at("version").dump()),
                           file);
    }
    CalibrationArtifact a;
    a.config = pipeline_config_from_json(j.at("config"));
    a.dataset_hash = j.at("dataset_hash").get<std::string>();
    a.index_fingerprint = j.at("index_fingerprint").get<std::string>();
    const auto& cal = j.at("calibration");
    a.labels = cal.at("labels").get<std::vector<std::uint32_t>>();
    for (const auto& s : cal.at("scores")) {
      a.scores.push_back(s.is_null() ? std::numeric_limits<double>::infinity() : s.get<double>());
    }
    if (a.scores.size() != a.labels.size()) {
      throw artifact_error("calibration scores and labels differ in length", file);
    }
    a.run = run_manifest_from_json(j.at("run"));
    return a;
  } catch (const json::exception& e) {
    throw artifact_error(e.what(), file);
  }
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "io-error", "cannot open file for writing", file.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "io-error", "write failed", file.string());
}

void write_artifact(const CalibrationArtifact& artifact, const std::filesystem::path& file) {
  write_text_file(file, to_json(artifact).dump(2) + "\n");
}

CalibrationArtifact read_artifact(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIo, "missing-file", "cannot open calibration artifact", file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInputValidation, "artifact-parse", e.what(), file.string(), e.byte);
  }
  return artifact_from_json(j, file.string());
}

void write_run_sidecar(const RunManifest& run, const std::filesystem::path& output,
                       const std::string& started_at, const std::string& finished_at) {
  json j = to_json(run);
  j["output"] = output.filename().string();
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  auto sidecar = output;
  sidecar += ".run.json";
  write_text_file(sidecar, j.dump(2) + "\n");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace confide
