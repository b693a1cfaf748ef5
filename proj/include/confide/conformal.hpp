#pragma once

// Split-conformal calibration and prediction on top of the ratio score.
//
// p(y) = (#{i in C_y : alpha_i >= alpha_test} + 1) / (|C_y| + 1), where C_y is
// every calibration point (pooled) or only those labelled y (classwise /
// Mondrian). The prediction set at significance eps is {y : p(y) > eps}.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "confide/dataset.hpp"
#include "confide/scoring.hpp"

namespace confide {

enum class CalibrationMode { kPooled, kClasswise };

const char* to_string(CalibrationMode mode);
CalibrationMode parse_calibration_mode(const std::string& text);

class CalibrationRecord {
 public:
  /// `scores[i]` is the nonconformity of calibration point i at its true label
  /// `labels[i]`. +inf sentinels are kept. Classwise mode requires every
  /// class to be present.
  CalibrationRecord(std::vector<double> scores, std::vector<std::uint32_t> labels,
                    CalibrationMode mode, std::size_t num_classes);

  const std::vector<double>& scores() const { return scores_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  CalibrationMode mode() const { return mode_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return scores_.size(); }

  /// |C_y|.
  std::size_t partition_size(std::uint32_t y) const;
  /// #{i in C_y : alpha_i >= score}.
  std::size_t count_at_least(double score, std::uint32_t y) const;
  double p_value(double score, std::uint32_t y) const;

 private:
  std::vector<double> scores_;
  std::vector<std::uint32_t> labels_;
  CalibrationMode mode_;
  std::size_t num_classes_;
  std::vector<std::vector<double>> sorted_;  // one partition (pooled) or one per class
};

/// Scores every calibration row at its true label. Never filters by model
/// correctness.
CalibrationRecord calibrate(const ReferenceIndex& idx, const Matrix& calibration,
                            std::span<const std::uint32_t> labels, CalibrationMode mode,
                            Execution exec = Execution::kParallel);
CalibrationRecord calibrate(const ReferenceIndex& idx, const EmbeddingDataset& ds,
                            CalibrationMode mode, Execution exec = Execution::kParallel);

double p_value(const CalibrationRecord& record, const NonconformityScore& score, std::uint32_t y);

struct PredictionReport {
  std::vector<double> p_values;  // one per label, in (0, 1]
  std::uint32_t point_prediction = 0;
  double credibility = 0.0;
  double confidence = 0.0;
  std::vector<LabelEvidence> evidence;  // empty for softmax-derived scores

  std::vector<std::uint32_t> prediction_set(double epsilon) const;
  bool covers(std::uint32_t y, double epsilon) const { return p_values[y] > epsilon; }
  std::size_t set_size(double epsilon) const;
};

/// p-values, argmax (ties to the lowest label), credibility and confidence
/// from one score per candidate label. Shared by every nonconformity measure.
PredictionReport make_report(const CalibrationRecord& record, std::span<const double> label_scores);

PredictionReport predict(const ReferenceIndex& idx, const CalibrationRecord& record,
                         std::span<const double> raw);

/// Reports for every row. Evidence is dropped when `keep_evidence` is false.
std::vector<PredictionReport> predict_batch(const ReferenceIndex& idx,
                                            const CalibrationRecord& record, const Matrix& raw,
                                            Execution exec = Execution::kParallel,
                                            bool keep_evidence = true);

}  // namespace confide
