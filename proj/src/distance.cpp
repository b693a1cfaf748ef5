#include "confide/distance.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double cosine_from_parts(double uv, double nu, double nv) {
  if (nu == 0.0 || nv == 0.0) return 1.0;
  return std::clamp(1.0 - uv / (nu * nv), 0.0, 2.0);
}

void require_same_size(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::kUsage, "width-mismatch",
                fmt::format("vectors have different widths ({} vs {})", u.size(), v.size()));
  }
}

}  // namespace

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v.data(), v.data(), v.size())); }

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require_same_size(u, v);
  return cosine_from_parts(dot(u.data(), v.data(), u.size()), l2_norm(u), l2_norm(v));
}

double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  require_same_size(u, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double mahalanobis_distance(std::span<const double> u, std::span<const double> v,
                            const MetricState& state) {
  if (state.kind != MetricKind::kMahalanobis || !state.precision) {
    throw Error(ErrorKind::kUsage, "unfitted-metric",
                "mahalanobis distance requires a fitted precision matrix");
  }
  require_same_size(u, v);
  const auto& p = *state.precision;
  if (static_cast<std::size_t>(p.rows()) != u.size()) {
    throw Error(ErrorKind::kUsage, "width-mismatch",
                fmt::format("precision is {}x{} but vectors have width {}", p.rows(), p.cols(),
                            u.size()));
  }
  const Eigen::Map<const Vector> uu(u.data(), static_cast<Eigen::Index>(u.size()));
  const Eigen::Map<const Vector> vv(v.data(), static_cast<Eigen::Index>(v.size()));
  const Vector diff = uu - vv;
  return std::sqrt(std::max(0.0, diff.dot(p * diff)));
}

namespace kernels {

void cosine_scan(std::span<const double> query, double query_norm, const Matrix& points,
                 std::span<const double> norms, std::size_t begin, std::size_t end,
                 std::span<double> out) {
  const std::size_t dim = query.size();
  for (std::size_t r = begin; r < end; ++r) {
    const double* row = points.data() + r * dim;
    out[r - begin] = cosine_from_parts(dot(query.data(), row, dim), query_norm, norms[r]);
  }
}

void euclidean_scan(std::span<const double> query, const Matrix& points, std::size_t begin,
                    std::size_t end, std::span<double> out) {
  const std::size_t dim = query.size();
  for (std::size_t r = begin; r < end; ++r) {
    const double* row = points.data() + r * dim;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = query[i] - row[i];
      acc += d * d;
    }
    out[r - begin] = std::sqrt(acc);
  }
}

}  // namespace kernels
}  // namespace confide
