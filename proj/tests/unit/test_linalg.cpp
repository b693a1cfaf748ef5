#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "confide/distance.hpp"
#include "confide/error.hpp"
#include "confide/linalg.hpp"
#include "instances.hpp"
#include "oracle.hpp"

using namespace confide;
using testing_support::random_matrix;

namespace {

std::vector<double> row_vec(const Matrix& m, Eigen::Index r) {
  return {m.row(r).data(), m.row(r).data() + m.cols()};
}

}  // namespace

TEST(Cosine, Examples) {
  const std::vector<double> u = {0.3, -1.2, 2.0};
  EXPECT_EQ(cosine_distance(u, u), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 3}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{-1, 0}), 2.0);
}

TEST(Cosine, ZeroNormIsOne) {
  const std::vector<double> zero = {0, 0, 0};
  const std::vector<double> v = {1, 2, 3};
  EXPECT_EQ(cosine_distance(zero, v), 1.0);
  EXPECT_EQ(cosine_distance(v, zero), 1.0);
  EXPECT_EQ(cosine_distance(zero, zero), 1.0);
}

TEST(Cosine, ScaleInvarianceAndRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> u(6), v(6), au(6), bv(6);
    const double a = scale(rng), b = scale(rng);
    for (int j = 0; j < 6; ++j) {
      u[j] = normal(rng);
      v[j] = normal(rng);
      au[j] = a * u[j];
      bv[j] = b * v[j];
    }
    const double d = cosine_distance(u, v);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    EXPECT_NEAR(cosine_distance(au, bv), d, 1e-12);
    EXPECT_NEAR(d, oracle::cosine(u, v), 1e-12);
  }
}

TEST(Mahalanobis, HandEvaluatedQuadraticForm) {
  // Sigma = diag(4, 1) so the precision is diag(1/4, 1).
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  p(0, 0) = 0.25;
  p(1, 1) = 1.0;
  const auto state = MetricState::from_precision(p);
  EXPECT_DOUBLE_EQ(mahalanobis_distance(std::vector<double>{3, 1}, std::vector<double>{1, 1}, state), 1.0);
  EXPECT_EQ(mahalanobis_distance(std::vector<double>{3, 1}, std::vector<double>{3, 1}, state), 0.0);
}

TEST(Mahalanobis, IdentityAndScaledIdentityMatchEuclidean) {
  std::mt19937_64 rng(2);
  const auto m = random_matrix(rng, 200, 5);
  const auto id = MetricState::from_precision(Eigen::MatrixXd::Identity(5, 5));
  const auto scaled = MetricState::from_precision(Eigen::MatrixXd::Identity(5, 5) / 4.0);
  for (Eigen::Index i = 0; i + 1 < m.rows(); i += 2) {
    const auto u = row_vec(m, i), v = row_vec(m, i + 1);
    const double e = euclidean_distance(u, v);
    EXPECT_LE(std::abs(mahalanobis_distance(u, v, id) - e), 1e-9 * e);
    EXPECT_LE(std::abs(mahalanobis_distance(u, v, scaled) - e / 2.0), 1e-9 * e / 2.0);
  }
}

TEST(Mahalanobis, UnfittedStateIsAnError) {
  const std::vector<double> u = {1, 2};
  try {
    mahalanobis_distance(u, u, MetricState::cosine());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unfitted-metric");
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(Mahalanobis, RejectsAsymmetricOrIndefinitePrecision) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(MetricState::from_precision(asym), Error);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  EXPECT_THROW(MetricState::from_precision(indefinite), Error);
}

TEST(Covariance, StandardNormalGivesIdentityPrecision) {
  std::mt19937_64 rng(3);
  const auto x = random_matrix(rng, 10000, 4);
  const auto state = fit_covariance(x);
  ASSERT_TRUE(state.precision.has_value());
  const auto& p = *state.precision;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(p(i, j), i == j ? 1.0 : 0.0, 0.1);
  }
}

TEST(Covariance, PrecisionInvertsRegularisedCovariance) {
  std::mt19937_64 rng(4);
  const Matrix x = random_matrix(rng, 50, 6) * random_matrix(rng, 6, 6);
  const auto state = fit_covariance(x);
  const Eigen::MatrixXd prod = *state.precision * *state.covariance;
  EXPECT_LE((prod - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((*state.precision - state.precision->transpose()).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*state.precision);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Covariance, RidgeMatchesTraceRule) {
  std::mt19937_64 rng(5);
  const auto x = random_matrix(rng, 30, 3);
  const auto state = fit_covariance(x);
  Vector mean = x.colwise().mean().transpose();
  Matrix c = x;
  c.rowwise() -= mean.transpose();
  const Eigen::MatrixXd cov = c.transpose() * c / 29.0;
  EXPECT_NEAR(state.regularizer, 1e-6 * cov.trace() / 3.0, 1e-18);
}

TEST(Covariance, ConstantColumnStaysPositiveDefinite) {
  std::mt19937_64 rng(6);
  Matrix x = random_matrix(rng, 40, 3);
  x.col(1).setConstant(2.5);
  const auto state = fit_covariance(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*state.precision);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  const std::vector<double> u = {0, 2.5, 0}, v = {1, 2.5, 1};
  EXPECT_TRUE(std::isfinite(mahalanobis_distance(u, v, state)));
}

TEST(Covariance, NeedsTwoRows) {
  Matrix x(1, 3);
  x << 1, 2, 3;
  try {
    fit_covariance(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "insufficient-data");
  }
}

TEST(Covariance, WhitenedDistanceMatchesQuadraticForm) {
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(rng, 100, 4) * random_matrix(rng, 4, 4);
  const auto state = fit_covariance(x);
  const auto& w = *state.whitening;
  for (Eigen::Index i = 0; i + 1 < 40; i += 2) {
    const Vector d = (x.row(i) - x.row(i + 1)).transpose();
    const double direct = mahalanobis_distance(row_vec(x, i), row_vec(x, i + 1), state);
    EXPECT_NEAR((w * d).norm(), direct, 1e-9 * direct);
  }
}

TEST(Pca, RankTwoDataInTenDimensions) {
  std::mt19937_64 rng(8);
  const Matrix coeffs = random_matrix(rng, 300, 2);
  Matrix basis = random_matrix(rng, 2, 10);
  Matrix x = coeffs * basis;
  x.rowwise() += random_matrix(rng, 1, 10).row(0);
  const auto model = fit_pca(x, 0.95);
  EXPECT_EQ(model.output_dim(), 2u);
  EXPECT_NEAR(model.explained_variance_ratio.sum(), 1.0, 1e-9);
  const Matrix back = inverse_transform(model, transform(model, x));
  EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Pca, FullThresholdKeepsMinOfRowsMinusOneAndDim) {
  std::mt19937_64 rng(9);
  EXPECT_EQ(fit_pca(random_matrix(rng, 50, 6), 1.0).output_dim(), 6u);
  // Gram path: fewer rows than columns.
  EXPECT_EQ(fit_pca(random_matrix(rng, 5, 12), 1.0).output_dim(), 4u);
}

TEST(Pca, IsotropicDataNeedsAllComponents) {
  std::mt19937_64 rng(10);
  const auto model = fit_pca(random_matrix(rng, 20000, 4), 0.95);
  EXPECT_EQ(model.output_dim(), 4u);
}

TEST(Pca, ComponentsOrthonormalAndRatiosNonincreasing) {
  std::mt19937_64 rng(11);
  for (auto [n, d] : {std::pair{200, 8}, std::pair{6, 20}}) {
    const Matrix x = random_matrix(rng, n, d) * random_matrix(rng, d, d);
    const auto model = fit_pca(x, 0.99);
    const Eigen::MatrixXd g = model.components * model.components.transpose();
    EXPECT_LE((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-8);
    for (Eigen::Index j = 1; j < model.explained_variance_ratio.size(); ++j) {
      EXPECT_LE(model.explained_variance_ratio[j], model.explained_variance_ratio[j - 1]);
    }
    EXPECT_GE(model.explained_variance_ratio.sum(), 0.99 - 1e-12);
    for (Eigen::Index j = 0; j < model.explained_variance_ratio.size(); ++j) {
      EXPECT_GT(model.explained_variance_ratio[j], 0.0);
      EXPECT_LE(model.explained_variance_ratio[j], 1.0);
    }
  }
}

TEST(Pca, SignConventionLargestEntryPositive) {
  std::mt19937_64 rng(12);
  const Matrix x = random_matrix(rng, 100, 5) * random_matrix(rng, 5, 5);
  const auto a = fit_pca(x, 1.0);
  const auto b = fit_pca(-x, 1.0);
  for (Eigen::Index j = 0; j < a.components.rows(); ++j) {
    Eigen::Index arg;
    a.components.row(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(a.components(j, arg), 0.0);
  }
  // Negating the data leaves the directions, and so the components, unchanged.
  EXPECT_LE((a.components - b.components).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, TransformOfMeanIsZeroAndFullRankIsIsometry) {
  std::mt19937_64 rng(13);
  const Matrix x = random_matrix(rng, 80, 6) * random_matrix(rng, 6, 6);
  const auto model = fit_pca(x, 1.0);
  ASSERT_EQ(model.output_dim(), 6u);
  Matrix mean_row = model.mean.transpose();
  EXPECT_LE(transform(model, mean_row).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix z = transform(model, x);
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index j = i + 1; j < 30; ++j) {
      EXPECT_NEAR((z.row(i) - z.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-8);
    }
  }
}

TEST(Pca, SingleRowTransformMatchesBatchExactly) {
  std::mt19937_64 rng(14);
  const Matrix x = random_matrix(rng, 60, 7);
  const auto model = fit_pca(x, 0.9);
  const Matrix batch = transform(model, x);
  std::vector<double> out(model.output_dim());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    transform_row(model, row_vec(x, i), out);
    for (std::size_t j = 0; j < out.size(); ++j) EXPECT_EQ(out[j], batch(i, static_cast<Eigen::Index>(j)));
  }
}

TEST(Pca, Errors) {
  std::mt19937_64 rng(15);
  auto code_of = [](auto&& f) -> std::string {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return "none";
  };
  EXPECT_EQ(code_of([&] { fit_pca(random_matrix(rng, 1, 3)); }), "insufficient-data");
  EXPECT_EQ(code_of([&] { fit_pca(random_matrix(rng, 10, 3), 0.0); }), "invalid-threshold");
  EXPECT_EQ(code_of([&] { fit_pca(random_matrix(rng, 10, 3), 1.5); }), "invalid-threshold");
  EXPECT_EQ(code_of([&] { fit_pca(Matrix::Ones(10, 3)); }), "zero-variance");
  const auto model = fit_pca(random_matrix(rng, 10, 3));
  EXPECT_EQ(code_of([&] { transform(model, random_matrix(rng, 2, 4)); }), "width-mismatch");
}

TEST(MetricKind, ParseRoundTrip) {
  EXPECT_EQ(parse_metric_kind("cosine"), MetricKind::kCosine);
  EXPECT_EQ(parse_metric_kind(to_string(MetricKind::kMahalanobis)), MetricKind::kMahalanobis);
  EXPECT_THROW(parse_metric_kind("euclid"), Error);
}
