#pragma once

// Per-class kNN pools of correctly predicted training embeddings. Queries
// are exact full scans; ties are broken by ascending train-row index.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "confide/dataset.hpp"
#include "confide/linalg.hpp"

namespace confide {

struct NeighborSet {
  std::vector<double> distances;  // ascending
  std::vector<std::size_t> row_ids;

  std::size_t size() const { return distances.size(); }
  bool empty() const { return distances.empty(); }
  /// Mean distance, summed in ascending order. Undefined (NaN) when empty.
  double mean() const;
};

struct IndexOptions {
  std::size_t k = 20;
  MetricKind metric = MetricKind::kCosine;
  bool use_pca = false;
  double variance_threshold = kDefaultVarianceThreshold;
  // Keep only rows with predicted label == label. The plain 1-NN baseline
  // turns this off.
  bool filter_correct = true;
};

class ReferenceIndex {
 public:
  /// Builds pools from the dataset's train split embeddings.
  static ReferenceIndex build(const EmbeddingDataset& ds, const IndexOptions& options);

  /// Builds pools from an explicit representation matrix (one row per train
  /// example). `predicted` is required when options.filter_correct is set.
  static ReferenceIndex build(const Matrix& train, std::span<const std::uint32_t> labels,
                              std::optional<std::span<const std::uint32_t>> predicted,
                              std::size_t num_classes, const IndexOptions& options);

  std::size_t k() const { return k_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t space_dim() const { return static_cast<std::size_t>(search_points_.cols()); }
  std::size_t total_pool_size() const { return row_ids_.size(); }
  const MetricState& metric() const { return metric_; }
  const std::optional<PcaModel>& pca() const { return pca_; }

  std::size_t pool_size(std::uint32_t c) const { return offsets_[c + 1] - offsets_[c]; }
  std::span<const std::size_t> pool_row_ids(std::uint32_t c) const;
  /// Pool rows of class c in the post-PCA space (pre-whitening).
  Matrix pool(std::uint32_t c) const;

  /// Raw embedding -> search space (PCA projection, then whitening for
  /// Mahalanobis). Row-at-a-time so single and batched queries agree exactly.
  void to_search_space(std::span<const double> raw, std::span<double> out) const;
  Matrix to_search_space(const Matrix& raw) const;

  /// Raw-space queries. An empty result signals an empty pool.
  NeighborSet query_same_class(std::span<const double> raw, std::uint32_t y) const;
  NeighborSet query_other_class(std::span<const double> raw, std::uint32_t y) const;

  /// Same queries for a vector already in the search space.
  NeighborSet same_class_in_space(std::span<const double> z, std::uint32_t y) const;
  NeighborSet other_class_in_space(std::span<const double> z, std::uint32_t y) const;

  /// One scan over every pool; returns the k' nearest rows of each class.
  /// `scratch` is resized as needed and may be reused across calls.
  std::vector<NeighborSet> nearest_per_class(std::span<const double> z,
                                             std::vector<double>& scratch) const;

  /// Content hash of the fitted index (pools, ids, metric, PCA, k).
  std::string fingerprint() const;

 private:
  ReferenceIndex() = default;

  void scan(std::span<const double> z, std::size_t begin, std::size_t end,
            std::span<double> out) const;
  NeighborSet select_nearest(std::span<const double> distances,
                             std::span<const std::size_t> positions) const;

  std::size_t k_ = 1;
  std::size_t num_classes_ = 0;
  std::size_t input_dim_ = 0;
  std::optional<PcaModel> pca_;
  MetricState metric_;
  Matrix search_points_;  // grouped by class; post-PCA, whitened for Mahalanobis
  std::optional<Matrix> unwhitened_points_;  // post-PCA copy, Mahalanobis only
  std::vector<double> norms_;  // row norms of search_points_ (cosine only)
  std::vector<std::size_t> row_ids_;
  std::vector<std::size_t> offsets_;  // class c occupies [offsets_[c], offsets_[c+1])
};

}  // namespace confide
