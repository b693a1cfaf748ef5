#pragma once

// End-to-end binding of one hyperparameter configuration: representation ->
// reference index -> calibration -> prediction -> evaluation.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confide/conformal.hpp"
#include "confide/dataset.hpp"
#include "confide/evaluation.hpp"
#include "confide/reference_index.hpp"

namespace confide {

struct PipelineConfig {
  IndexOptions index;
  CalibrationMode mode = CalibrationMode::kPooled;
  // Applied as softmax(z / T) to softmax-layer datasets only.
  std::optional<double> temperature;
};

/// Rows of `split` in the space the index consumes.
Matrix representation(const EmbeddingDataset& ds, const std::string& split,
                      std::optional<double> temperature);

struct FittedPipeline {
  ReferenceIndex index;
  CalibrationRecord record;
};

FittedPipeline fit_pipeline(const EmbeddingDataset& ds, const PipelineConfig& config,
                            Execution exec = Execution::kParallel);

/// Rebuilds the index and wraps previously computed calibration scores.
FittedPipeline restore_pipeline(const EmbeddingDataset& ds, const PipelineConfig& config,
                                std::vector<double> calibration_scores);

std::vector<PredictionReport> predict_split(const FittedPipeline& fitted, const EmbeddingDataset& ds,
                                            const std::string& split, const PipelineConfig& config,
                                            Execution exec = Execution::kParallel,
                                            bool keep_evidence = true);

EvalSummary run_and_evaluate(const EmbeddingDataset& ds, const PipelineConfig& config,
                             std::span<const double> epsilons, Execution exec = Execution::kParallel);

/// Hash of everything calibration depends on: shape metadata plus the train
/// and calibration splits. Test rows may change without invalidating it.
std::string calibration_inputs_hash(const EmbeddingDataset& ds);

/// Hash of the full dataset content.
std::string dataset_hash(const EmbeddingDataset& ds);

}  // namespace confide
