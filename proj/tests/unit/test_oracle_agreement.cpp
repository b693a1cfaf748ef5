#include <random>

#include <gtest/gtest.h>

#include "instances.hpp"
#include "oracle.hpp"

using namespace confide;

namespace {

void expect_agreement(oracle::Metric metric, bool classwise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 40; ++t) {
    const auto p = testing_support::random_problem(rng, metric, classwise);
    const auto ranks = oracle::Engine(p).ranks();
    for (auto exec : {Execution::kSerial, Execution::kParallel}) {
      const auto run = testing_support::run_engine(p, exec);
      for (std::size_t i = 0; i < p.test.size(); ++i) {
        for (std::uint32_t y = 0; y < p.num_classes; ++y) {
          const auto& rank = ranks[i][y];
          const double score = nonconformity(run.index, p.test[i], y).value;
          ASSERT_EQ(run.record.count_at_least(score, y), rank.at_least)
              << "instance " << t << " row " << i << " label " << y;
          EXPECT_EQ(run.record.partition_size(y), rank.partition);
          EXPECT_EQ(run.reports[i].p_values[y], rank.p_value());
        }
      }
    }
  }
}

}  // namespace

TEST(OracleAgreement, CosinePooled) { expect_agreement(oracle::Metric::kCosine, false, 101); }
TEST(OracleAgreement, CosineClasswise) { expect_agreement(oracle::Metric::kCosine, true, 103); }
TEST(OracleAgreement, MahalanobisPooled) { expect_agreement(oracle::Metric::kMahalanobis, false, 107); }
TEST(OracleAgreement, MahalanobisClasswise) { expect_agreement(oracle::Metric::kMahalanobis, true, 109); }
