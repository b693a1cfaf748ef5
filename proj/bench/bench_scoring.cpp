// Serial reference kernels vs the OpenMP kernels on synthetic blobs.
// Arguments: reference rows, embedding width.

#include <benchmark/benchmark.h>

#include "confide/reference_index.hpp"
#include "confide/scoring.hpp"
#include "confide/synthetic.hpp"

namespace {

using namespace confide;

struct Fixture {
  EmbeddingDataset ds;
  ReferenceIndex index;
  Matrix queries;
};

Fixture make_fixture(std::size_t n_train, std::size_t dim, MetricKind metric) {
  BlobSpec spec = two_class_blobs(dim, 1.0, 0.5, n_train, 0, 256, 2026);
  auto ds = make_gaussian_blobs(spec);
  IndexOptions o;
  o.k = 20;
  o.metric = metric;
  auto index = ReferenceIndex::build(ds, o);
  Matrix q = embeddings_matrix(ds.split(kTestSplit), ds.dim);
  return {std::move(ds), std::move(index), std::move(q)};
}

template <MetricKind Metric>
void BM_LabelEvidenceSerial(benchmark::State& state) {
  const auto f = make_fixture(state.range(0), state.range(1), Metric);
  for (auto _ : state) benchmark::DoNotOptimize(label_evidence_serial(f.index, f.queries));
  state.SetItemsProcessed(state.iterations() * f.queries.rows());
}

template <MetricKind Metric>
void BM_LabelEvidenceParallel(benchmark::State& state) {
  const auto f = make_fixture(state.range(0), state.range(1), Metric);
  for (auto _ : state) benchmark::DoNotOptimize(label_evidence_parallel(f.index, f.queries));
  state.SetItemsProcessed(state.iterations() * f.queries.rows());
}

void BM_ScoresAtLabelsSerial(benchmark::State& state) {
  const auto f = make_fixture(state.range(0), state.range(1), MetricKind::kCosine);
  const auto& labels = f.ds.split(kTestSplit).labels;
  for (auto _ : state) benchmark::DoNotOptimize(scores_at_labels_serial(f.index, f.queries, labels));
  state.SetItemsProcessed(state.iterations() * f.queries.rows());
}

void BM_ScoresAtLabelsParallel(benchmark::State& state) {
  const auto f = make_fixture(state.range(0), state.range(1), MetricKind::kCosine);
  const auto& labels = f.ds.split(kTestSplit).labels;
  for (auto _ : state) benchmark::DoNotOptimize(scores_at_labels_parallel(f.index, f.queries, labels));
  state.SetItemsProcessed(state.iterations() * f.queries.rows());
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {1000, 4000}) {
    for (long d : {64, 256}) b->Args({n, d});
  }
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_LabelEvidenceSerial<MetricKind::kCosine>)->Apply(sizes);
BENCHMARK(BM_LabelEvidenceParallel<MetricKind::kCosine>)->Apply(sizes);
BENCHMARK(BM_LabelEvidenceSerial<MetricKind::kMahalanobis>)->Apply(sizes);
BENCHMARK(BM_LabelEvidenceParallel<MetricKind::kMahalanobis>)->Apply(sizes);
BENCHMARK(BM_ScoresAtLabelsSerial)->Apply(sizes);
BENCHMARK(BM_ScoresAtLabelsParallel)->Apply(sizes);

BENCHMARK_MAIN();
