#include "confide/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <omp.h>

#include "confide/error.hpp"

namespace confide {
namespace {

// Nearest k rows drawn from every per-class list except `excluded`.
NeighborSet merge_other(const std::vector<NeighborSet>& per_class, std::uint32_t excluded,
                        std::size_t k) {
  std::vector<std::pair<double, std::size_t>> pool;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (c == excluded) continue;
    const auto& ns = per_class[c];
    for (std::size_t i = 0; i < ns.size(); ++i) pool.emplace_back(ns.distances[i], ns.row_ids[i]);
  }
  const std::size_t kk = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk), pool.end());
  NeighborSet out;
  out.distances.reserve(kk);
  out.row_ids.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    out.distances.push_back(pool[i].first);
    out.row_ids.push_back(pool[i].second);
  }
  return out;
}

std::vector<LabelEvidence> fused_row(const ReferenceIndex& idx, std::span<const double> z,
                                     std::vector<double>& scratch) {
  auto per_class = idx.nearest_per_class(z, scratch);
  std::vector<LabelEvidence> out(idx.num_classes());
  for (std::uint32_t y = 0; y < idx.num_classes(); ++y) {
    out[y].other_class = merge_other(per_class, y, idx.k());
    out[y].same_class = per_class[y];
    out[y].score = score_from_neighbors(out[y].same_class, out[y].other_class);
  }
  return out;
}

void check_labels(const ReferenceIndex& idx, const Matrix& raw,
                  std::span<const std::uint32_t> labels) {
  if (static_cast<std::size_t>(raw.rows()) != labels.size()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch", "rows and labels differ in length");
  }
  for (auto y : labels) {
    if (y >= idx.num_classes()) {
      throw Error(ErrorKind::kInputValidation, "label-range", "label outside the index classes");
    }
  }
}

// Runs body(row) for every row on the OpenMP team, rethrowing the first
// exception on the calling thread.
template <typename Body>
void parallel_rows(Eigen::Index rows, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r) {
    try {
      body(r);
    } catch (...) {
#pragma omp critical(confide_scoring_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

int g_workers = 0;

}  // namespace

NonconformityScore score_from_neighbors(const NeighborSet& same, const NeighborSet& other) {
  if (other.empty()) {
    throw Error(ErrorKind::kPrecondition, "unusable-reference",
                "no other-class reference rows: every pool but one is empty");
  }
  NonconformityScore s;
  s.denominator = other.mean();
  if (same.empty()) {
    s.numerator = std::numeric_limits<double>::quiet_NaN();
    s.value = std::numeric_limits<double>::infinity();
    return s;
  }
  s.numerator = same.mean();
  s.value = s.numerator / std::max(s.denominator, kDenominatorFloor);
  return s;
}

NonconformityScore nonconformity(const ReferenceIndex& idx, std::span<const double> raw,
                                 std::uint32_t y) {
  return score_from_neighbors(idx.query_same_class(raw, y), idx.query_other_class(raw, y));
}

std::vector<std::vector<LabelEvidence>> label_evidence_serial(const ReferenceIndex& idx,
                                                              const Matrix& raw) {
  std::vector<std::vector<LabelEvidence>> out(static_cast<std::size_t>(raw.rows()));
  const std::size_t width = static_cast<std::size_t>(raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    std::span<const double> row(raw.row(r).data(), width);
    auto& labels = out[static_cast<std::size_t>(r)];
    labels.resize(idx.num_classes());
    for (std::uint32_t y = 0; y < idx.num_classes(); ++y) {
      labels[y].same_class = idx.query_same_class(row, y);
      labels[y].other_class = idx.query_other_class(row, y);
      labels[y].score = score_from_neighbors(labels[y].same_class, labels[y].other_class);
    }
  }
  return out;
}

std::vector<std::vector<LabelEvidence>> label_evidence_parallel(const ReferenceIndex& idx,
                                                                const Matrix& raw) {
  const Matrix z = idx.to_search_space(raw);
  const std::size_t width = static_cast<std::size_t>(z.cols());
  std::vector<std::vector<LabelEvidence>> out(static_cast<std::size_t>(raw.rows()));
  parallel_rows(z.rows(), [&](Eigen::Index r) {
    thread_local std::vector<double> scratch;
    out[static_cast<std::size_t>(r)] = fused_row(idx, {z.row(r).data(), width}, scratch);
  });
  return out;
}

std::vector<std::vector<LabelEvidence>> label_evidence(const ReferenceIndex& idx, const Matrix& raw,
                                                       Execution exec) {
  return exec == Execution::kSerial ? label_evidence_serial(idx, raw)
                                    : label_evidence_parallel(idx, raw);
}

std::vector<NonconformityScore> scores_at_labels_serial(const ReferenceIndex& idx, const Matrix& raw,
                                                        std::span<const std::uint32_t> labels) {
  check_labels(idx, raw, labels);
  std::vector<NonconformityScore> out(labels.size());
  const std::size_t width = static_cast<std::size_t>(raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out[i] = nonconformity(idx, {raw.row(r).data(), width}, labels[i]);
  }
  return out;
}

std::vector<NonconformityScore> scores_at_labels_parallel(const ReferenceIndex& idx,
                                                          const Matrix& raw,
                                                          std::span<const std::uint32_t> labels) {
  check_labels(idx, raw, labels);
  const Matrix z = idx.to_search_space(raw);
  const std::size_t width = static_cast<std::size_t>(z.cols());
  std::vector<NonconformityScore> out(labels.size());
  parallel_rows(z.rows(), [&](Eigen::Index r) {
    thread_local std::vector<double> scratch;
    const auto i = static_cast<std::size_t>(r);
    auto per_class = idx.nearest_per_class({z.row(r).data(), width}, scratch);
    out[i] = score_from_neighbors(per_class[labels[i]], merge_other(per_class, labels[i], idx.k()));
  });
  return out;
}

std::vector<NonconformityScore> scores_at_labels(const ReferenceIndex& idx, const Matrix& raw,
                                                 std::span<const std::uint32_t> labels,
                                                 Execution exec) {
  return exec == Execution::kSerial ? scores_at_labels_serial(idx, raw, labels)
                                    : scores_at_labels_parallel(idx, raw, labels);
}

void set_worker_count(int workers) {
  g_workers = workers;
  if (workers > 0) omp_set_num_threads(workers);
}

int worker_count() { return g_workers > 0 ? g_workers : omp_get_max_threads(); }

}  // namespace confide
