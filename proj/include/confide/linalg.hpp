#pragma once

// Covariance estimation, PCA and the fitted metric state shared by the
// reference index. Dense algebra is delegated to Eigen; the row-level
// projections are written as explicit loops so that a vector projected alone
// and the same vector projected inside a batch are bit-identical.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "confide/dataset.hpp"

namespace confide {

/// Row-major dense matrix; one observation per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class MetricKind { kCosine, kMahalanobis };

const char* to_string(MetricKind kind);
MetricKind parse_metric_kind(const std::string& text);

/// Distance configuration of a reference index.
///
/// For Mahalanobis, `precision` is the inverse of the ridge-regularised
/// covariance and `whitening` is the upper-triangular W with precision = WᵀW,
/// so that sqrt((u−v)ᵀ Σ⁻¹ (u−v)) = ‖W(u−v)‖.
struct MetricState {
  MetricKind kind = MetricKind::kCosine;
  std::optional<Eigen::MatrixXd> precision;
  std::optional<Eigen::MatrixXd> covariance;  // regularised Σ + λI
  std::optional<Eigen::MatrixXd> whitening;
  double regularizer = 0.0;

  static MetricState cosine();
  /// Builds a Mahalanobis state from a given SPD precision matrix.
  static MetricState from_precision(const Eigen::MatrixXd& precision);

  bool fitted() const { return kind == MetricKind::kCosine || (precision && whitening); }
  std::size_t dim() const { return precision ? static_cast<std::size_t>(precision->rows()) : 0; }
};

/// Relative ridge added to the sample covariance: λ = kRidgeScale·trace(Σ)/dim.
inline constexpr double kRidgeScale = 1e-6;

/// Pooled sample covariance (n−1 normalisation) of the rows of `x`, ridge
/// regularised and inverted through a Cholesky factorisation.
MetricState fit_covariance(const Matrix& x);

struct PcaModel {
  Vector mean;                       // dim
  Matrix components;                 // m x dim, orthonormal rows
  Vector explained_variance_ratio;   // m, nonincreasing

  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(components.rows()); }
};

inline constexpr double kDefaultVarianceThreshold = 0.95;

/// Fits PCA on the rows of `x` and keeps the smallest number of leading
/// components whose cumulative explained-variance ratio reaches
/// `variance_threshold`. Uses the dim x dim covariance when n > dim and the
/// n x n Gram matrix otherwise.
PcaModel fit_pca(const Matrix& x, double variance_threshold = kDefaultVarianceThreshold);

/// (x − mean)·componentsᵀ for each row.
Matrix transform(const PcaModel& model, const Matrix& x);
void transform_row(const PcaModel& model, std::span<const double> in, std::span<double> out);
/// Maps reduced coordinates back to the input space.
Matrix inverse_transform(const PcaModel& model, const Matrix& reduced);

/// Copies a float split into a double matrix (count x dim).
Matrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols);
Matrix embeddings_matrix(const Split& split, std::size_t dim);

}  // namespace confide
