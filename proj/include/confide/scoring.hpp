#pragma once

// Ratio nonconformity: mean distance to the k nearest same-class reference
// rows over mean distance to the k nearest rows pooled from all other classes.
//
// Two batch implementations are kept side by side. The serial one is the
// reference: it answers each (row, label) pair with independent same-class
// and other-class queries. The OpenMP one scans every pool once per row and
// derives all labels from the per-class nearest lists. Both produce
// bit-identical scores.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "confide/reference_index.hpp"

namespace confide {

inline constexpr double kDenominatorFloor = 1e-12;

struct NonconformityScore {
  double value = 0.0;
  double numerator = 0.0;    // mean same-class distance (NaN when the pool is empty)
  double denominator = 0.0;  // mean other-class distance

  bool is_sentinel() const { return value == std::numeric_limits<double>::infinity(); }
};

/// Combines two neighbor sets. An empty same-class set gives the +inf
/// sentinel; an empty other-class set is an unusable-reference error.
NonconformityScore score_from_neighbors(const NeighborSet& same, const NeighborSet& other);

NonconformityScore nonconformity(const ReferenceIndex& idx, std::span<const double> raw,
                                 std::uint32_t y);

struct LabelEvidence {
  NeighborSet same_class;
  NeighborSet other_class;
  NonconformityScore score;
};

enum class Execution { kSerial, kParallel };

/// Evidence for every candidate label of every row of `raw` (raw space).
std::vector<std::vector<LabelEvidence>> label_evidence_serial(const ReferenceIndex& idx,
                                                              const Matrix& raw);
std::vector<std::vector<LabelEvidence>> label_evidence_parallel(const ReferenceIndex& idx,
                                                                const Matrix& raw);
std::vector<std::vector<LabelEvidence>> label_evidence(const ReferenceIndex& idx, const Matrix& raw,
                                                       Execution exec);

/// Scores only at the given label of each row (calibration scoring).
std::vector<NonconformityScore> scores_at_labels_serial(const ReferenceIndex& idx, const Matrix& raw,
                                                        std::span<const std::uint32_t> labels);
std::vector<NonconformityScore> scores_at_labels_parallel(const ReferenceIndex& idx,
                                                          const Matrix& raw,
                                                          std::span<const std::uint32_t> labels);
std::vector<NonconformityScore> scores_at_labels(const ReferenceIndex& idx, const Matrix& raw,
                                                 std::span<const std::uint32_t> labels,
                                                 Execution exec);

/// Sets the OpenMP team size used by the parallel kernels (0 = runtime default).
void set_worker_count(int workers);
int worker_count();

}  // namespace confide
