#include <algorithm>

#include <gtest/gtest.h>

#include "confide/dataset.hpp"
#include "confide/synthetic.hpp"

using namespace confide;

TEST(Synthetic, SameSeedSameDataset) {
  const auto spec = two_class_blobs(5, 1.0, 0.3, 100, 50, 50, 123);
  EXPECT_EQ(make_gaussian_blobs(spec), make_gaussian_blobs(spec));
  auto other = spec;
  other.seed = 124;
  EXPECT_FALSE(make_gaussian_blobs(spec) == make_gaussian_blobs(other));
}

TEST(Synthetic, ShapesAndValidity) {
  const auto ds = make_gaussian_blobs(two_class_blobs(5, 1.0, 0.5, 100, 50, 20, 1));
  EXPECT_NO_THROW(validate(ds));
  EXPECT_EQ(ds.split(kTrainSplit).count, 100u);
  EXPECT_EQ(ds.split(kCalibrationSplit).count, 50u);
  EXPECT_EQ(ds.split(kTestSplit).count, 20u);
  EXPECT_EQ(ds.split(kTrainSplit).embeddings.size(), 500u);
  EXPECT_TRUE(ds.split(kTestSplit).predicted_labels.has_value());
  EXPECT_EQ(ds.split(kTestSplit).logits->size(), 40u);
}

TEST(Synthetic, ClassProportionsFollowWeights) {
  const auto ds = make_gaussian_blobs(two_class_blobs(3, 1.0, 0.1, 5000, 10, 10, 2));
  const auto& y = ds.split(kTrainSplit).labels;
  const double minority = static_cast<double>(std::count(y.begin(), y.end(), 1u)) / 5000.0;
  // Binomial standard error is about 0.0042.
  EXPECT_NEAR(minority, 0.1, 0.02);
}

TEST(Synthetic, PredictedLabelsAreNearestMean) {
  const auto spec = two_class_blobs(4, 1.5, 0.5, 200, 10, 10, 3);
  const auto ds = make_gaussian_blobs(spec);
  const auto& s = ds.split(kTrainSplit);
  for (std::size_t i = 0; i < s.count; ++i) {
    double d[2] = {0, 0};
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double diff = s.embeddings[i * 4 + j] - spec.means[c][j];
        d[c] += diff * diff;
      }
    }
    EXPECT_EQ((*s.predicted_labels)[i], d[1] < d[0] ? 1u : 0u);
  }
}

TEST(Synthetic, SoftmaxLayerStoresLogitsAsEmbeddings) {
  auto spec = two_class_blobs(4, 1.5, 0.5, 30, 10, 10, 4);
  spec.softmax_layer = true;
  const auto ds = make_gaussian_blobs(spec);
  EXPECT_TRUE(ds.is_softmax_layer());
  EXPECT_EQ(ds.dim, 2u);
  EXPECT_EQ(ds.split(kTrainSplit).embeddings, *ds.split(kTrainSplit).logits);
}
