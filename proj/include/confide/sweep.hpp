#pragma once

// Grid search over (dataset/layer, k, metric, PCA, temperature). Every grid
// point is cached on disk under a content hash, so an interrupted sweep
// resumes without recomputing finished rows.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confide/conformal.hpp"
#include "confide/linalg.hpp"

namespace confide {

struct SweepConfig {
  std::vector<std::filesystem::path> dataset_paths;
  std::vector<std::size_t> k_grid = {1, 5, 10, 20, 40, 50, 60};
  std::vector<MetricKind> metrics = {MetricKind::kCosine, MetricKind::kMahalanobis};
  std::vector<bool> pca_options = {false, true};
  std::vector<double> temperature_grid = {0.01, 0.1, 1.0, 10.0, 20.0, 40.0};
  CalibrationMode calibration_mode = CalibrationMode::kPooled;
  double variance_threshold = kDefaultVarianceThreshold;
  std::vector<double> epsilons;  // empty = 0.01..0.99
  std::uint64_t seed = 0;
};

/// Parses the declarative JSON config. Relative dataset paths resolve against
/// `base_dir`.
SweepConfig parse_sweep_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SweepConfig load_sweep_config(const std::filesystem::path& file);
nlohmann::json to_json(const SweepConfig& config);

struct SweepPoint {
  std::size_t dataset = 0;
  std::string dataset_path;
  std::string layer;  // layer index as text, "softmax" for the logit layer
  std::string mode;   // attention | flattened
  std::size_t k = 1;
  MetricKind metric = MetricKind::kCosine;
  bool pca = false;
  std::optional<double> temperature;
  std::string config_id;  // human readable, unique within a sweep
  std::string hash;       // row-cache key
};

struct SweepRow {
  SweepPoint point;
  bool ok = false;
  std::string message;  // skip reason when !ok
  double test_accuracy = 0.0;
  std::optional<double> top_correct_efficiency;
  std::optional<double> top_correct_efficiency_epsilon;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // deterministic config order
  std::optional<std::size_t> confide_a;  // row maximising accuracy
  std::optional<std::size_t> confide_c;  // row maximising top correct efficiency
  bool complete = true;
  std::size_t computed = 0;  // rows evaluated in this run (not from cache)
};

struct SweepOptions {
  int jobs = 0;  // 0 = all cores
  // Stop after evaluating this many uncached points (simulates interruption).
  std::optional<std::size_t> limit;
};

/// Runs (or resumes) the sweep, writing into `out_dir`:
///   rows/<hash>.json        cached row
///   curves/<hash>.csv       coverage curve per grid point
///   results.csv, summary.json, timings.csv, heatmap_*.csv
SweepResult run_sweep(const SweepConfig& config, const std::filesystem::path& out_dir,
                      const SweepOptions& options = {});

struct HeatmapTable {
  std::string row_axis;  // "layer"
  std::string col_axis;  // "k" or "temperature"
  std::vector<std::string> row_keys;
  std::vector<std::string> col_keys;
  std::vector<std::vector<std::optional<double>>> best_accuracy;
  std::vector<std::vector<std::optional<double>>> best_correct_efficiency;
};

/// Best accuracy / best top correct efficiency per (layer, k) cell over every
/// other axis. Cells with no successful run are missing.
HeatmapTable layer_k_heatmap(const SweepResult& result);
/// Same over (k, temperature) for softmax-layer rows.
HeatmapTable softmax_k_temperature_heatmap(const SweepResult& result);

void emit_heatmap_tables(const SweepResult& result, const std::filesystem::path& out_dir);

}  // namespace confide
