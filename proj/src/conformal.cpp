#include "confide/conformal.hpp"

#include <algorithm>

#include <fmt/core.h>
#include <fmt/ranges.h>

#include "confide/error.hpp"

namespace confide {

const char* to_string(CalibrationMode mode) {
  return mode == CalibrationMode::kPooled ? "pooled" : "classwise";
}

CalibrationMode parse_calibration_mode(const std::string& text) {
  if (text == "pooled") return CalibrationMode::kPooled;
  if (text == "classwise") return CalibrationMode::kClasswise;
  throw Error(ErrorKind::kUsage, "unknown-mode",
              "calibration mode must be \"pooled\" or \"classwise\", got '" + text + "'");
}

CalibrationRecord::CalibrationRecord(std::vector<double> scores, std::vector<std::uint32_t> labels,
                                     CalibrationMode mode, std::size_t num_classes)
    : scores_(std::move(scores)), labels_(std::move(labels)), mode_(mode), num_classes_(num_classes) {
  if (scores_.size() != labels_.size()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch",
                fmt::format("{} calibration scores but {} labels", scores_.size(), labels_.size()));
  }
  if (scores_.empty()) {
    throw Error(ErrorKind::kPrecondition, "empty-calibration", "calibration split is empty");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= num_classes_) {
      throw Error(ErrorKind::kInputValidation, "label-range",
                  fmt::format("calibration label {} at row {} is out of range", labels_[i], i));
    }
  }
  if (mode_ == CalibrationMode::kPooled) {
    sorted_.assign(1, scores_);
  } else {
    sorted_.assign(num_classes_, {});
    for (std::size_t i = 0; i < scores_.size(); ++i) sorted_[labels_[i]].push_back(scores_[i]);
    std::vector<std::uint32_t> missing;
    for (std::uint32_t c = 0; c < num_classes_; ++c) {
      if (sorted_[c].empty()) missing.push_back(c);
    }
    if (!missing.empty()) {
      throw Error(ErrorKind::kPrecondition, "missing-class",
                  fmt::format("classwise calibration needs every class; absent from the "
                              "calibration split: {}",
                              fmt::join(missing, ", ")));
    }
  }
  for (auto& part : sorted_) std::sort(part.begin(), part.end());
}

std::size_t CalibrationRecord::partition_size(std::uint32_t y) const {
  if (y >= num_classes_) {
    throw Error(ErrorKind::kUsage, "label-range", fmt::format("class {} out of range", y));
  }
  return mode_ == CalibrationMode::kPooled ? sorted_[0].size() : sorted_[y].size();
}

std::size_t CalibrationRecord::count_at_least(double score, std::uint32_t y) const {
  if (y >= num_classes_) {
    throw Error(ErrorKind::kUsage, "label-range", fmt::format("class {} out of range", y));
  }
  const auto& part = mode_ == CalibrationMode::kPooled ? sorted_[0] : sorted_[y];
  // +inf compares equal to other sentinels, so inclusive counting holds for them too.
  return static_cast<std::size_t>(part.end() - std::lower_bound(part.begin(), part.end(), score));
}

double CalibrationRecord::p_value(double score, std::uint32_t y) const {
  const std::size_t n = partition_size(y);
  if (n == 0) {
    throw Error(ErrorKind::kPrecondition, "empty-partition",
                fmt::format("no calibration scores for class {}", y));
  }
  return static_cast<double>(count_at_least(score, y) + 1) / static_cast<double>(n + 1);
}

CalibrationRecord calibrate(const ReferenceIndex& idx, const Matrix& calibration,
                            std::span<const std::uint32_t> labels, CalibrationMode mode,
                            Execution exec) {
  if (calibration.rows() == 0) {
    throw Error(ErrorKind::kPrecondition, "empty-calibration", "calibration split is empty");
  }
  const auto scores = scores_at_labels(idx, calibration, labels, exec);
  std::vector<double> values(scores.size());
  std::transform(scores.begin(), scores.end(), values.begin(),
                 [](const NonconformityScore& s) { return s.value; });
  return CalibrationRecord(std::move(values), {labels.begin(), labels.end()}, mode,
                           idx.num_classes());
}

CalibrationRecord calibrate(const ReferenceIndex& idx, const EmbeddingDataset& ds,
                            CalibrationMode mode, Execution exec) {
  const Split& cal = ds.split(kCalibrationSplit);
  return calibrate(idx, embeddings_matrix(cal, ds.dim), cal.labels, mode, exec);
}

double p_value(const CalibrationRecord& record, const NonconformityScore& score, std::uint32_t y) {
  return record.p_value(score.value, y);
}

std::vector<std::uint32_t> PredictionReport::prediction_set(double epsilon) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t y = 0; y < p_values.size(); ++y) {
    if (p_values[y] > epsilon) out.push_back(y);
  }
  return out;
}

std::size_t PredictionReport::set_size(double epsilon) const {
  return static_cast<std::size_t>(
      std::count_if(p_values.begin(), p_values.end(), [&](double p) { return p > epsilon; }));
}

PredictionReport make_report(const CalibrationRecord& record, std::span<const double> label_scores) {
  if (label_scores.size() != record.num_classes()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch",
                fmt::format("{} label scores for {} classes", label_scores.size(),
                            record.num_classes()));
  }
  PredictionReport report;
  report.p_values.resize(label_scores.size());
  for (std::uint32_t y = 0; y < label_scores.size(); ++y) {
    report.p_values[y] = record.p_value(label_scores[y], y);
  }
  // Strict > keeps the lowest label on ties.
  std::uint32_t best = 0;
  for (std::uint32_t y = 1; y < report.p_values.size(); ++y) {
    if (report.p_values[y] > report.p_values[best]) best = y;
  }
  double second = 0.0;
  for (std::uint32_t y = 0; y < report.p_values.size(); ++y) {
    if (y != best) second = std::max(second, report.p_values[y]);
  }
  report.point_prediction = best;
  report.credibility = report.p_values[best];
  report.confidence = 1.0 - second;
  return report;
}

PredictionReport predict(const ReferenceIndex& idx, const CalibrationRecord& record,
                         std::span<const double> raw) {
  Matrix row(1, static_cast<Eigen::Index>(raw.size()));
  std::copy(raw.begin(), raw.end(), row.data());
  return std::move(predict_batch(idx, record, row, Execution::kSerial, true).front());
}

std::vector<PredictionReport> predict_batch(const ReferenceIndex& idx,
                                            const CalibrationRecord& record, const Matrix& raw,
                                            Execution exec, bool keep_evidence) {
  if (record.num_classes() != idx.num_classes()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch",
                "calibration record and reference index disagree on the number of classes");
  }
  auto evidence = label_evidence(idx, raw, exec);
  std::vector<PredictionReport> reports(evidence.size());
  std::vector<double> scores(idx.num_classes());
  for (std::size_t r = 0; r < evidence.size(); ++r) {
    for (std::size_t y = 0; y < scores.size(); ++y) scores[y] = evidence[r][y].score.value;
    reports[r] = make_report(record, scores);
    if (keep_evidence) reports[r].evidence = std::move(evidence[r]);
  }
  return reports;
}

}  // namespace confide
