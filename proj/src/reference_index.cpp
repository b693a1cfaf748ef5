#include "confide/reference_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "confide/distance.hpp"
#include "confide/error.hpp"
#include "confide/hashing.hpp"

namespace confide {

double NeighborSet::mean() const {
  if (distances.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double d : distances) acc += d;
  return acc / static_cast<double>(distances.size());
}

ReferenceIndex ReferenceIndex::build(const EmbeddingDataset& ds, const IndexOptions& options) {
  const Split& train = ds.split(kTrainSplit);
  std::optional<std::span<const std::uint32_t>> predicted;
  if (train.predicted_labels) predicted = std::span<const std::uint32_t>(*train.predicted_labels);
  return build(embeddings_matrix(train, ds.dim), train.labels, predicted, ds.num_classes, options);
}

ReferenceIndex ReferenceIndex::build(const Matrix& train, std::span<const std::uint32_t> labels,
                                     std::optional<std::span<const std::uint32_t>> predicted,
                                     std::size_t num_classes, const IndexOptions& options) {
  if (options.k == 0) {
    throw Error(ErrorKind::kUsage, "invalid-k", "k must be a positive integer");
  }
  if (static_cast<std::size_t>(train.rows()) != labels.size()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch",
                fmt::format("{} train rows but {} labels", train.rows(), labels.size()));
  }
  if (options.filter_correct) {
    if (!predicted) {
      throw Error(ErrorKind::kInputValidation, "missing-field",
                  "train split lacks predicted_labels (predicted_labels_file), required to "
                  "filter the reference pools");
    }
    if (predicted->size() != labels.size()) {
      throw Error(ErrorKind::kUsage, "dimension-mismatch",
                  "predicted labels and labels differ in length");
    }
  }
  if (num_classes < 2) {
    throw Error(ErrorKind::kPrecondition, "unusable-reference",
                "a reference index needs at least two classes");
  }

  // Group kept rows by class, preserving ascending train-row order.
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw Error(ErrorKind::kInputValidation, "label-range",
                  fmt::format("train label {} at row {} is out of range", labels[i], i));
    }
    if (options.filter_correct && (*predicted)[i] != labels[i]) continue;
    members[labels[i]].push_back(i);
  }

  ReferenceIndex idx;
  idx.k_ = options.k;
  idx.num_classes_ = num_classes;
  idx.input_dim_ = static_cast<std::size_t>(train.cols());
  idx.offsets_.assign(num_classes + 1, 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    idx.offsets_[c + 1] = idx.offsets_[c] + members[c].size();
    idx.row_ids_.insert(idx.row_ids_.end(), members[c].begin(), members[c].end());
  }
  if (idx.row_ids_.empty()) {
    throw Error(ErrorKind::kPrecondition, "unusable-reference",
                "every reference pool is empty (no correctly predicted training rows)");
  }

  Matrix pooled(static_cast<Eigen::Index>(idx.row_ids_.size()), train.cols());
  for (std::size_t r = 0; r < idx.row_ids_.size(); ++r) {
    pooled.row(static_cast<Eigen::Index>(r)) = train.row(static_cast<Eigen::Index>(idx.row_ids_[r]));
  }

  if (options.use_pca) {
    idx.pca_ = fit_pca(pooled, options.variance_threshold);
    pooled = transform(*idx.pca_, pooled);
  }

  if (options.metric == MetricKind::kMahalanobis) {
    idx.metric_ = fit_covariance(pooled);
    const auto& w = *idx.metric_.whitening;
    const std::size_t m = static_cast<std::size_t>(pooled.cols());
    idx.search_points_.resize(pooled.rows(), pooled.cols());
    for (Eigen::Index r = 0; r < pooled.rows(); ++r) {
      const double* in = pooled.row(r).data();
      double* out = idx.search_points_.row(r).data();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = i; j < m; ++j) {
          acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * in[j];
        }
        out[i] = acc;
      }
    }
    idx.unwhitened_points_ = std::move(pooled);
  } else {
    idx.metric_ = MetricState::cosine();
    idx.search_points_ = std::move(pooled);
    idx.norms_.resize(idx.row_ids_.size());
    const std::size_t m = idx.space_dim();
    for (std::size_t r = 0; r < idx.row_ids_.size(); ++r) {
      idx.norms_[r] = l2_norm({idx.search_points_.data() + r * m, m});
    }
  }
  return idx;
}

std::span<const std::size_t> ReferenceIndex::pool_row_ids(std::uint32_t c) const {
  return std::span<const std::size_t>(row_ids_).subspan(offsets_[c], pool_size(c));
}

Matrix ReferenceIndex::pool(std::uint32_t c) const {
  const Matrix& src = unwhitened_points_ ? *unwhitened_points_ : search_points_;
  return src.middleRows(static_cast<Eigen::Index>(offsets_[c]),
                        static_cast<Eigen::Index>(pool_size(c)));
}

void ReferenceIndex::to_search_space(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != input_dim_) {
    throw Error(ErrorKind::kUsage, "width-mismatch",
                fmt::format("query has width {}, index expects {}", raw.size(), input_dim_));
  }
  const std::size_t m = space_dim();
  std::vector<double> reduced;
  std::span<const double> y = raw;
  if (pca_) {
    reduced.resize(m);
    transform_row(*pca_, raw, reduced);
    y = reduced;
  }
  if (metric_.kind == MetricKind::kMahalanobis) {
    const auto& w = *metric_.whitening;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = i; j < m; ++j) {
        acc += w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * y[j];
      }
      out[i] = acc;
    }
  } else {
    std::copy(y.begin(), y.end(), out.begin());
  }
}

Matrix ReferenceIndex::to_search_space(const Matrix& raw) const {
  Matrix out(raw.rows(), static_cast<Eigen::Index>(space_dim()));
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    to_search_space({raw.row(r).data(), static_cast<std::size_t>(raw.cols())},
                    {out.row(r).data(), space_dim()});
  }
  return out;
}

void ReferenceIndex::scan(std::span<const double> z, std::size_t begin, std::size_t end,
                          std::span<double> out) const {
  if (metric_.kind == MetricKind::kCosine) {
    kernels::cosine_scan(z, l2_norm(z), search_points_, norms_, begin, end, out);
  } else {
    kernels::euclidean_scan(z, search_points_, begin, end, out);
  }
}

NeighborSet ReferenceIndex::select_nearest(std::span<const double> distances,
                                           std::span<const std::size_t> positions) const {
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t kk = std::min(k_, order.size());
  auto closer = [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return row_ids_[positions[a]] < row_ids_[positions[b]];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                    closer);
  NeighborSet out;
  out.distances.reserve(kk);
  out.row_ids.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    out.distances.push_back(distances[order[i]]);
    out.row_ids.push_back(row_ids_[positions[order[i]]]);
  }
  return out;
}

NeighborSet ReferenceIndex::same_class_in_space(std::span<const double> z, std::uint32_t y) const {
  if (y >= num_classes_) {
    throw Error(ErrorKind::kUsage, "label-range", fmt::format("class {} out of range", y));
  }
  const std::size_t begin = offsets_[y];
  const std::size_t end = offsets_[y + 1];
  std::vector<double> dist(end - begin);
  scan(z, begin, end, dist);
  std::vector<std::size_t> positions(end - begin);
  std::iota(positions.begin(), positions.end(), begin);
  return select_nearest(dist, positions);
}

NeighborSet ReferenceIndex::other_class_in_space(std::span<const double> z, std::uint32_t y) const {
  if (y >= num_classes_) {
    throw Error(ErrorKind::kUsage, "label-range", fmt::format("class {} out of range", y));
  }
  const std::size_t total = row_ids_.size();
  const std::size_t head = offsets_[y];
  const std::size_t tail_begin = offsets_[y + 1];
  std::vector<double> dist(head + (total - tail_begin));
  scan(z, 0, head, std::span<double>(dist).first(head));
  scan(z, tail_begin, total, std::span<double>(dist).subspan(head));
  std::vector<std::size_t> positions;
  positions.reserve(dist.size());
  for (std::size_t p = 0; p < head; ++p) positions.push_back(p);
  for (std::size_t p = tail_begin; p < total; ++p) positions.push_back(p);
  return select_nearest(dist, positions);
}

NeighborSet ReferenceIndex::query_same_class(std::span<const double> raw, std::uint32_t y) const {
  std::vector<double> z(space_dim());
  to_search_space(raw, z);
  return same_class_in_space(z, y);
}

NeighborSet ReferenceIndex::query_other_class(std::span<const double> raw, std::uint32_t y) const {
  std::vector<double> z(space_dim());
  to_search_space(raw, z);
  return other_class_in_space(z, y);
}

std::vector<NeighborSet> ReferenceIndex::nearest_per_class(std::span<const double> z,
                                                           std::vector<double>& scratch) const {
  const std::size_t total = row_ids_.size();
  scratch.resize(total);
  scan(z, 0, total, scratch);
  std::vector<NeighborSet> out(num_classes_);
  std::vector<std::size_t> positions;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    const std::size_t begin = offsets_[c];
    const std::size_t end = offsets_[c + 1];
    positions.resize(end - begin);
    std::iota(positions.begin(), positions.end(), begin);
    out[c] = select_nearest(std::span<const double>(scratch).subspan(begin, end - begin), positions);
  }
  return out;
}

std::string ReferenceIndex::fingerprint() const {
  Sha256 h;
  h.update(fmt::format("k={};metric={};classes={};input_dim={};space_dim={};pca={};", k_,
                       to_string(metric_.kind), num_classes_, input_dim_, space_dim(),
                       pca_ ? pca_->output_dim() : 0));
  h.update_array(std::span<const std::size_t>(offsets_));
  h.update_array(std::span<const std::size_t>(row_ids_));
  h.update_array(std::span<const double>(search_points_.data(),
                                         static_cast<std::size_t>(search_points_.size())));
  return h.hex_digest();
}

}  // namespace confide
