#include "confide/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {

SoftmaxScores softmax_with_temperature(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::kUsage, "invalid-temperature",
                fmt::format("temperature must be a positive real, got {}", temperature));
  }
  SoftmaxScores out;
  out.temperature = temperature;
  out.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp((logits(r, c) - top) / temperature);
      out.probs(r, c) = e;
      total += e;
    }
    out.probs.row(r) /= total;
  }
  return out;
}

double nm1_score(std::span<const double> probs, std::uint32_t y) { return 1.0 - probs[y]; }

double nm2_score(std::span<const double> probs, std::uint32_t y) {
  double best_other = 0.0;
  for (std::uint32_t c = 0; c < probs.size(); ++c) {
    if (c != y) best_other = std::max(best_other, probs[c]);
  }
  return best_other - probs[y];
}

const char* to_string(SoftmaxMeasure measure) {
  return measure == SoftmaxMeasure::kNm1 ? "nm1" : "nm2";
}

Matrix logits_matrix(const EmbeddingDataset& ds, const std::string& split) {
  const Split& s = ds.split(split);
  if (!s.logits) {
    throw Error(ErrorKind::kPrecondition, "unsupported-baseline",
                "softmax baselines need logits; split '" + split + "' has no logits_file");
  }
  return to_matrix(*s.logits, s.count, ds.num_classes);
}

std::vector<PredictionReport> softmax_baseline_reports(const EmbeddingDataset& ds,
                                                       SoftmaxMeasure measure, double temperature,
                                                       CalibrationMode mode) {
  auto score = [measure](std::span<const double> p, std::uint32_t y) {
    return measure == SoftmaxMeasure::kNm1 ? nm1_score(p, y) : nm2_score(p, y);
  };
  const std::size_t nc = ds.num_classes;
  const auto cal = softmax_with_temperature(logits_matrix(ds, kCalibrationSplit), temperature);
  const auto& cal_labels = ds.split(kCalibrationSplit).labels;
  std::vector<double> cal_scores(cal_labels.size());
  for (std::size_t i = 0; i < cal_labels.size(); ++i) {
    cal_scores[i] = score({cal.probs.row(static_cast<Eigen::Index>(i)).data(), nc}, cal_labels[i]);
  }
  CalibrationRecord record(std::move(cal_scores), cal_labels, mode, nc);

  const auto test = softmax_with_temperature(logits_matrix(ds, kTestSplit), temperature);
  std::vector<PredictionReport> reports(static_cast<std::size_t>(test.probs.rows()));
  std::vector<double> label_scores(nc);
  for (Eigen::Index r = 0; r < test.probs.rows(); ++r) {
    std::span<const double> p(test.probs.row(r).data(), nc);
    for (std::uint32_t y = 0; y < nc; ++y) label_scores[y] = score(p, y);
    reports[static_cast<std::size_t>(r)] = make_report(record, label_scores);
  }
  return reports;
}

EvalSummary softmax_baseline(const EmbeddingDataset& ds, SoftmaxMeasure measure, double temperature,
                             CalibrationMode mode, std::span<const double> epsilons) {
  const auto reports = softmax_baseline_reports(ds, measure, temperature, mode);
  return evaluate(reports, ds.split(kTestSplit).labels, epsilons);
}

std::vector<PredictionReport> one_nn_reports(const EmbeddingDataset& ds, MetricKind metric,
                                             CalibrationMode mode, Execution exec) {
  IndexOptions options;
  options.k = 1;
  options.metric = metric;
  options.use_pca = false;
  options.filter_correct = false;
  const auto idx = ReferenceIndex::build(ds, options);
  const auto record = calibrate(idx, ds, mode, exec);
  const Split& test = ds.split(kTestSplit);
  return predict_batch(idx, record, embeddings_matrix(test, ds.dim), exec, false);
}

EvalSummary one_nn_baseline(const EmbeddingDataset& ds, MetricKind metric, CalibrationMode mode,
                            std::span<const double> epsilons) {
  const auto reports = one_nn_reports(ds, metric, mode);
  return evaluate(reports, ds.split(kTestSplit).labels, epsilons);
}

double original_accuracy(const EmbeddingDataset& ds) {
  const Matrix logits = logits_matrix(ds, kTestSplit);
  const auto& labels = ds.split(kTestSplit).labels;
  if (labels.empty()) {
    throw Error(ErrorKind::kPrecondition, "no-test-rows", "nothing to evaluate: no test rows");
  }
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    if (static_cast<std::uint32_t>(best) == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace confide
