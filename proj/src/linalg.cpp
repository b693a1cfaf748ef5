#include "confide/linalg.hpp"

#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {
namespace {

// Above this width a dense covariance is not worth attempting; the caller is
// expected to enable PCA first.
constexpr Eigen::Index kMaxCovarianceDim = 4096;

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Matrix centered(const Matrix& x, Vector& mean) {
  mean = x.colwise().mean().transpose();
  Matrix c = x;
  c.rowwise() -= mean.transpose();
  return c;
}

// Flip so the entry of largest magnitude is positive (first index on ties).
void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0) v = -v;
}

}  // namespace

const char* to_string(MetricKind kind) {
  return kind == MetricKind::kCosine ? "cosine" : "mahalanobis";
}

MetricKind parse_metric_kind(const std::string& text) {
  if (text == "cosine") return MetricKind::kCosine;
  if (text == "mahalanobis") return MetricKind::kMahalanobis;
  throw Error(ErrorKind::kUsage, "unknown-metric",
              "metric must be \"cosine\" or \"mahalanobis\", got '" + text + "'");
}

MetricState MetricState::cosine() { return MetricState{}; }

MetricState MetricState::from_precision(const Eigen::MatrixXd& precision) {
  if (precision.rows() != precision.cols() || precision.rows() == 0) {
    throw Error(ErrorKind::kUsage, "invalid-precision", "precision matrix must be square");
  }
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorKind::kUsage, "invalid-precision", "precision matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kUsage, "invalid-precision", "precision matrix is not positive definite");
  }
  MetricState state;
  state.kind = MetricKind::kMahalanobis;
  state.precision = precision;
  state.whitening = Eigen::MatrixXd(llt.matrixU());
  return state;
}

MetricState fit_covariance(const Matrix& x) {
  const auto n = x.rows();
  const auto dim = x.cols();
  if (n < 2) {
    throw Error(ErrorKind::kPrecondition, "insufficient-data",
                fmt::format("covariance needs at least 2 observations, got {}", n));
  }
  if (dim > kMaxCovarianceDim) {
    throw Error(ErrorKind::kPrecondition, "covariance-too-large",
                fmt::format("refusing a {}x{} covariance; enable PCA first", dim, dim));
  }
  Vector mean;
  const Matrix c = centered(x, mean);
  Eigen::MatrixXd cov = symmetrized(c.transpose() * c / static_cast<double>(n - 1));

  const double lambda = kRidgeScale * cov.trace() / static_cast<double>(dim);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::kPrecondition, "degenerate-covariance",
                "all features have zero variance; the ridge cannot regularise the covariance");
  }
  cov.diagonal().array() += lambda;

  Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kPrecondition, "ill-conditioned",
                "regularised covariance is not numerically positive definite");
  }
  Eigen::MatrixXd precision =
      symmetrized(cov_llt.solve(Eigen::MatrixXd::Identity(dim, dim)));

  Eigen::LLT<Eigen::MatrixXd> prec_llt(precision);
  if (prec_llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kPrecondition, "ill-conditioned",
                "precision matrix is not numerically positive definite");
  }

  MetricState state;
  state.kind = MetricKind::kMahalanobis;
  state.regularizer = lambda;
  state.covariance = std::move(cov);
  state.whitening = Eigen::MatrixXd(prec_llt.matrixU());
  state.precision = std::move(precision);
  return state;
}

PcaModel fit_pca(const Matrix& x, double variance_threshold) {
  const auto n = x.rows();
  const auto dim = x.cols();
  if (n < 2) {
    throw Error(ErrorKind::kPrecondition, "insufficient-data",
                fmt::format("PCA needs at least 2 observations, got {}", n));
  }
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw Error(ErrorKind::kUsage, "invalid-threshold",
                fmt::format("variance threshold must lie in (0, 1], got {}", variance_threshold));
  }

  PcaModel model;
  const Matrix c = centered(x, model.mean);
  const double norm = static_cast<double>(n - 1);

  // Eigenpairs in descending order; directions as columns of `dirs`.
  Vector eigenvalues;
  Eigen::MatrixXd dirs;
  const bool use_gram = n <= dim;
  if (!use_gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(c.transpose() * c / norm));
    eigenvalues = eig.eigenvalues().reverse();
    dirs = eig.eigenvectors().rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(c * c.transpose() / norm));
    eigenvalues = eig.eigenvalues().reverse();
    dirs = eig.eigenvectors().rowwise().reverse();  // n x n, left singular vectors
  }
  eigenvalues = eigenvalues.cwiseMax(0.0);
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "zero-variance", "PCA input has zero total variance");
  }

  Eigen::Index m = 0;
  double cumulative = 0.0;
  while (m < eigenvalues.size()) {
    cumulative += eigenvalues[m] / total;
    ++m;
    if (cumulative >= variance_threshold - 1e-12) break;
  }

  model.components.resize(m, dim);
  model.explained_variance_ratio.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector v;
    if (use_gram) {
      v = c.transpose() * dirs.col(j);
    } else {
      v = dirs.col(j);
    }
    // Gram-Schmidt against earlier rows keeps the basis orthonormal when
    // directions were recovered from the Gram matrix.
    for (Eigen::Index p = 0; p < j; ++p) {
      v -= model.components.row(p).transpose().dot(v) * model.components.row(p).transpose();
    }
    const double vn = v.norm();
    if (!(vn > 0.0)) {
      throw Error(ErrorKind::kPrecondition, "zero-variance",
                  "PCA component collapsed during orthonormalisation");
    }
    v /= vn;
    fix_sign(v);
    model.components.row(j) = v.transpose();
    model.explained_variance_ratio[j] = eigenvalues[j] / total;
  }
  return model;
}

void transform_row(const PcaModel& model, std::span<const double> in, std::span<double> out) {
  const std::size_t dim = model.input_dim();
  const std::size_t m = model.output_dim();
  for (std::size_t j = 0; j < m; ++j) {
    const double* comp = model.components.data() + j * dim;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) acc += (in[i] - model.mean[static_cast<Eigen::Index>(i)]) * comp[i];
    out[j] = acc;
  }
}

Matrix transform(const PcaModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
    throw Error(ErrorKind::kUsage, "width-mismatch",
                fmt::format("PCA expects width {}, got {}", model.input_dim(), x.cols()));
  }
  Matrix out(x.rows(), static_cast<Eigen::Index>(model.output_dim()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    transform_row(model, {x.row(r).data(), model.input_dim()},
                  {out.row(r).data(), model.output_dim()});
  }
  return out;
}

Matrix inverse_transform(const PcaModel& model, const Matrix& reduced) {
  if (static_cast<std::size_t>(reduced.cols()) != model.output_dim()) {
    throw Error(ErrorKind::kUsage, "width-mismatch",
                fmt::format("PCA inverse expects width {}, got {}", model.output_dim(),
                            reduced.cols()));
  }
  Matrix out = reduced * model.components;
  out.rowwise() += model.mean.transpose();
  return out;
}

Matrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols) {
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  double* dst = out.data();
  for (std::size_t i = 0; i < rows * cols; ++i) dst[i] = static_cast<double>(values[i]);
  return out;
}

Matrix embeddings_matrix(const Split& split, std::size_t dim) {
  return to_matrix(split.embeddings, split.count, dim);
}

}  // namespace confide
