#pragma once

// Softmax-derived nonconformity (NM1 inverse probability, NM2 margin) with
// temperature scaling, and the unfiltered 1-nearest-neighbour comparator.
// All of them feed the same calibration / p-value / evaluation path.

#include <cstdint>
#include <span>
#include <vector>

#include "confide/conformal.hpp"
#include "confide/dataset.hpp"
#include "confide/evaluation.hpp"
#include "confide/linalg.hpp"

namespace confide {

/// Temperatures observed in the tuned configurations.
inline const std::vector<double> kDefaultTemperatureGrid = {0.01, 0.1, 1.0, 10.0, 20.0, 40.0};

struct SoftmaxScores {
  Matrix probs;  // n x |Y|, rows on the simplex
  double temperature = 1.0;
};

/// Row-wise softmax(z / T) with max subtraction.
SoftmaxScores softmax_with_temperature(const Matrix& logits, double temperature);

/// 1 − p_y.
double nm1_score(std::span<const double> probs, std::uint32_t y);
/// max_{y' != y} p_y' − p_y.
double nm2_score(std::span<const double> probs, std::uint32_t y);

enum class SoftmaxMeasure { kNm1, kNm2 };

const char* to_string(SoftmaxMeasure measure);

/// Logits of a split as a matrix; unsupported-baseline error when absent.
Matrix logits_matrix(const EmbeddingDataset& ds, const std::string& split);

/// Calibrates on the calibration split's logits and reports every test row.
std::vector<PredictionReport> softmax_baseline_reports(const EmbeddingDataset& ds,
                                                       SoftmaxMeasure measure, double temperature,
                                                       CalibrationMode mode);

EvalSummary softmax_baseline(const EmbeddingDataset& ds, SoftmaxMeasure measure, double temperature,
                             CalibrationMode mode, std::span<const double> epsilons);

/// k = 1 ratio score against every train row (no correctness filtering).
std::vector<PredictionReport> one_nn_reports(const EmbeddingDataset& ds, MetricKind metric,
                                             CalibrationMode mode,
                                             Execution exec = Execution::kParallel);

EvalSummary one_nn_baseline(const EmbeddingDataset& ds, MetricKind metric, CalibrationMode mode,
                            std::span<const double> epsilons);

/// Accuracy of argmax over the test logits ("original NN").
double original_accuracy(const EmbeddingDataset& ds);

}  // namespace confide
