#include "confide/pipeline.hpp"

#include <fmt/core.h>

#include "confide/baselines.hpp"
#include "confide/error.hpp"
#include "confide/hashing.hpp"

namespace confide {
namespace {

void hash_split(Sha256& h, const std::string& name, const Split& s) {
  h.update(fmt::format("split={};count={};pred={};logits={};ids={};", name, s.count,
                       s.predicted_labels.has_value(), s.logits.has_value(), s.row_ids.has_value()));
  h.update_array(std::span<const float>(s.embeddings));
  h.update_array(std::span<const std::uint32_t>(s.labels));
  if (s.predicted_labels) h.update_array(std::span<const std::uint32_t>(*s.predicted_labels));
  if (s.logits) h.update_array(std::span<const float>(*s.logits));
  if (s.row_ids) h.update_array(std::span<const std::uint64_t>(*s.row_ids));
}

void hash_header(Sha256& h, const EmbeddingDataset& ds) {
  h.update(fmt::format("dim={};classes={};layer={};mode={};", ds.dim, ds.num_classes,
                       to_string(ds.layer), to_string(ds.mode)));
}

}  // namespace

Matrix representation(const EmbeddingDataset& ds, const std::string& split,
                      std::optional<double> temperature) {
  const Split& s = ds.split(split);
  Matrix x = embeddings_matrix(s, ds.dim);
  if (!temperature) return x;
  if (!ds.is_softmax_layer()) {
    throw Error(ErrorKind::kUsage, "temperature-not-applicable",
                "temperature scaling applies only to softmax-layer datasets (layer_index "
                "\"softmax\"); this dataset probes layer " + to_string(ds.layer));
  }
  return softmax_with_temperature(x, *temperature).probs;
}

FittedPipeline fit_pipeline(const EmbeddingDataset& ds, const PipelineConfig& config,
                            Execution exec) {
  const Split& train = ds.split(kTrainSplit);
  const Split& cal = ds.split(kCalibrationSplit);
  std::optional<std::span<const std::uint32_t>> predicted;
  if (train.predicted_labels) predicted = std::span<const std::uint32_t>(*train.predicted_labels);
  auto index = ReferenceIndex::build(representation(ds, kTrainSplit, config.temperature),
                                     train.labels, predicted, ds.num_classes, config.index);
  auto record = calibrate(index, representation(ds, kCalibrationSplit, config.temperature),
                          cal.labels, config.mode, exec);
  return FittedPipeline{std::move(index), std::move(record)};
}

FittedPipeline restore_pipeline(const EmbeddingDataset& ds, const PipelineConfig& config,
                                std::vector<double> calibration_scores) {
  const Split& train = ds.split(kTrainSplit);
  const Split& cal = ds.split(kCalibrationSplit);
  std::optional<std::span<const std::uint32_t>> predicted;
  if (train.predicted_labels) predicted = std::span<const std::uint32_t>(*train.predicted_labels);
  auto index = ReferenceIndex::build(representation(ds, kTrainSplit, config.temperature),
                                     train.labels, predicted, ds.num_classes, config.index);
  CalibrationRecord record(std::move(calibration_scores), cal.labels, config.mode, ds.num_classes);
  return FittedPipeline{std::move(index), std::move(record)};
}

std::vector<PredictionReport> predict_split(const FittedPipeline& fitted, const EmbeddingDataset& ds,
                                            const std::string& split, const PipelineConfig& config,
                                            Execution exec, bool keep_evidence) {
  return predict_batch(fitted.index, fitted.record, representation(ds, split, config.temperature),
                       exec, keep_evidence);
}

EvalSummary run_and_evaluate(const EmbeddingDataset& ds, const PipelineConfig& config,
                             std::span<const double> epsilons, Execution exec) {
  const auto fitted = fit_pipeline(ds, config, exec);
  const auto reports = predict_split(fitted, ds, kTestSplit, config, exec, false);
  return evaluate(reports, ds.split(kTestSplit).labels, epsilons);
}

std::string calibration_inputs_hash(const EmbeddingDataset& ds) {
  Sha256 h;
  hash_header(h, ds);
  for (const char* name : {kTrainSplit, kCalibrationSplit}) {
    if (auto it = ds.splits.find(name); it != ds.splits.end()) hash_split(h, name, it->second);
  }
  return h.hex_digest();
}

std::string dataset_hash(const EmbeddingDataset& ds) {
  Sha256 h;
  hash_header(h, ds);
  h.update(fmt::format("model={};task={};", ds.model, ds.task));
  for (const auto& [name, split] : ds.splits) hash_split(h, name, split);
  return h.hex_digest();
}

}  // namespace confide
