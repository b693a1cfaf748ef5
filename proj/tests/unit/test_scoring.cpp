#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "confide/error.hpp"
#include "confide/scoring.hpp"
#include "confide/synthetic.hpp"
#include "instances.hpp"
#include "oracle.hpp"

using namespace confide;
using testing_support::to_matrix;

namespace {

NeighborSet neighbors(std::vector<double> d) {
  NeighborSet n;
  n.distances = std::move(d);
  for (std::size_t i = 0; i < n.distances.size(); ++i) n.row_ids.push_back(i);
  return n;
}

ReferenceIndex cosine_index(const Matrix& x, const std::vector<std::uint32_t>& labels, std::size_t k) {
  IndexOptions o;
  o.k = k;
  return ReferenceIndex::build(x, labels, std::span<const std::uint32_t>(labels), 2, o);
}

Matrix rows(std::initializer_list<std::vector<double>> list) {
  Matrix m(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(list.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& v : list) {
    for (std::size_t j = 0; j < v.size(); ++j) m(r, static_cast<Eigen::Index>(j)) = v[j];
    ++r;
  }
  return m;
}

}  // namespace

TEST(Scoring, CoincidentSameClassRowScoresZero) {
  const Matrix x = rows({{3, 4}, {-1, 0.5}});
  const auto idx = cosine_index(x, {0, 1}, 1);
  const std::vector<double> q = {3, 4};
  const auto s = nonconformity(idx, q, 0);
  EXPECT_EQ(s.numerator, 0.0);
  EXPECT_GT(s.denominator, 0.0);
  EXPECT_EQ(s.value, 0.0);
}

TEST(Scoring, NearlyEqualMeansScoreNearOne) {
  const auto s = score_from_neighbors(neighbors({0.15, 0.17}), neighbors({0.17}));
  EXPECT_DOUBLE_EQ(s.numerator, 0.16);
  EXPECT_NEAR(s.value, 0.16 / 0.17, 1e-15);
  EXPECT_NEAR(s.value, 0.941, 5e-4);
}

TEST(Scoring, MirrorImagePoolsScoreExactlyOne) {
  // Query on the bisector; each pool is the reflection of the other.
  const Matrix x = rows({{1, 0.3}, {1, 0.8}, {1, -0.3}, {1, -0.8}});
  const auto idx = cosine_index(x, {0, 0, 1, 1}, 2);
  const std::vector<double> q = {2, 0};
  EXPECT_EQ(nonconformity(idx, q, 0).value, 1.0);
  EXPECT_EQ(nonconformity(idx, q, 1).value, 1.0);
}

TEST(Scoring, EmptySameClassPoolGivesSentinel) {
  const auto s = score_from_neighbors(NeighborSet{}, neighbors({0.3}));
  EXPECT_TRUE(s.is_sentinel());
  EXPECT_TRUE(std::isinf(s.value));
}

TEST(Scoring, EmptyOtherClassIsUnusableReference) {
  try {
    score_from_neighbors(neighbors({0.1}), NeighborSet{});
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unusable-reference");
  }
}

TEST(Scoring, DenominatorIsFloored) {
  const auto s = score_from_neighbors(neighbors({0.5}), neighbors({0.0, 0.0}));
  EXPECT_EQ(s.denominator, 0.0);
  EXPECT_EQ(s.value, 0.5 / kDenominatorFloor);
  EXPECT_TRUE(std::isfinite(s.value));
  // Zero over zero stays zero rather than NaN.
  EXPECT_EQ(score_from_neighbors(neighbors({0.0}), neighbors({0.0})).value, 0.0);
}

TEST(Scoring, DuplicateEmbeddingsAcrossClassesStayFinite) {
  const Matrix x = rows({{3, 4}, {3, 4}, {0, 1}});
  const auto idx = cosine_index(x, {0, 1, 1}, 1);
  const std::vector<double> q = {3, 4};
  const auto s = nonconformity(idx, q, 1);
  EXPECT_TRUE(std::isfinite(s.value));
  EXPECT_EQ(s.value, 0.0);
  EXPECT_EQ(nonconformity(idx, q, 0).value, 0.0);
}

TEST(Scoring, MatchesOracleScores) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 80; ++t) {
    const auto metric = t % 2 ? oracle::Metric::kMahalanobis : oracle::Metric::kCosine;
    const auto p = testing_support::random_problem(rng, metric, false);
    const auto run = testing_support::run_engine(p, Execution::kSerial);
    const oracle::Engine ref(p);
    for (const auto& q : p.test) {
      for (std::uint32_t y = 0; y < p.num_classes; ++y) {
        const double want = ref.score(q, y);
        const double got = nonconformity(run.index, q, y).value;
        if (std::isinf(want)) {
          EXPECT_TRUE(std::isinf(got));
        } else {
          EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want));
        }
      }
    }
  }
}

TEST(Scoring, SerialAndParallelAreBitIdentical) {
  set_worker_count(4);
  for (auto metric : {MetricKind::kCosine, MetricKind::kMahalanobis}) {
    BlobSpec spec = two_class_blobs(12, 1.0, 0.5, 300, 60, 80, 17);
    spec.means.push_back(std::vector<double>(12, 0.5));
    spec.class_weights = {0.4, 0.3, 0.3};
    const auto ds = make_gaussian_blobs(spec);
    IndexOptions o;
    o.k = 7;
    o.metric = metric;
    const auto idx = ReferenceIndex::build(ds, o);
    const Matrix test = embeddings_matrix(ds.split(kTestSplit), ds.dim);
    const auto a = label_evidence_serial(idx, test);
    const auto b = label_evidence_parallel(idx, test);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      for (std::size_t y = 0; y < a[r].size(); ++y) {
        EXPECT_EQ(a[r][y].score.value, b[r][y].score.value);
        EXPECT_EQ(a[r][y].same_class.row_ids, b[r][y].same_class.row_ids);
        EXPECT_EQ(a[r][y].other_class.row_ids, b[r][y].other_class.row_ids);
        EXPECT_EQ(a[r][y].other_class.distances, b[r][y].other_class.distances);
      }
    }
    const auto& labels = ds.split(kTestSplit).labels;
    const auto sa = scores_at_labels_serial(idx, test, labels);
    const auto sb = scores_at_labels_parallel(idx, test, labels);
    for (std::size_t r = 0; r < sa.size(); ++r) {
      EXPECT_EQ(sa[r].value, sb[r].value);
      EXPECT_EQ(sa[r].value, a[r][labels[r]].score.value);
    }
  }
  set_worker_count(0);
}

TEST(Scoring, WorkerCountRoundTrips) {
  set_worker_count(3);
  EXPECT_EQ(worker_count(), 3);
  set_worker_count(0);
  EXPECT_GE(worker_count(), 1);
}
