#pragma once

#include <cstddef>
#include <span>

#include "confide/linalg.hpp"

namespace confide {

/// 1 − u·v/(‖u‖‖v‖), clamped to [0, 2]. A zero-norm argument yields 1.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// sqrt((u−v)ᵀ P (u−v)) evaluated directly from the precision matrix P.
double mahalanobis_distance(std::span<const double> u, std::span<const double> v,
                            const MetricState& state);

double euclidean_distance(std::span<const double> u, std::span<const double> v);

double l2_norm(std::span<const double> v);

namespace kernels {

/// Distances from `query` to rows [begin, end) of `points`, written to
/// out[0 .. end-begin). Cosine uses the precomputed row norms; the whitened
/// Mahalanobis case reduces to Euclidean distance on stored points.
void cosine_scan(std::span<const double> query, double query_norm, const Matrix& points,
                 std::span<const double> norms, std::size_t begin, std::size_t end,
                 std::span<double> out);

void euclidean_scan(std::span<const double> query, const Matrix& points, std::size_t begin,
                    std::size_t end, std::span<double> out);

}  // namespace kernels
}  // namespace confide
