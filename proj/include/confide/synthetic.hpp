#pragma once

// Seeded Gaussian-blob datasets for tests, benchmarks and the bundled
// fixture. Sampling uses mt19937_64 with an explicit Box-Muller transform so
// output is identical across standard libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "confide/dataset.hpp"

namespace confide {

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct BlobSpec {
  std::size_t dim = 16;
  std::vector<std::vector<double>> means;  // one per class
  std::vector<double> class_weights;       // sampling probabilities; empty = uniform
  double sigma = 1.0;
  std::size_t n_train = 0;
  std::size_t n_calibration = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  // Store logits (-|x - mu_c|^2 / 2 sigma^2) as the embeddings and mark the
  // layer as "softmax".
  bool softmax_layer = false;
};

/// Two classes in R^dim with means ±shift·e1.
BlobSpec two_class_blobs(std::size_t dim, double shift, double minority_weight, std::size_t n_train,
                         std::size_t n_calibration, std::size_t n_test, std::uint64_t seed);

/// Labels are drawn i.i.d. from class_weights, so every split is
/// exchangeable. Predicted labels (nearest mean), logits and unique row ids
/// are attached to every split.
EmbeddingDataset make_gaussian_blobs(const BlobSpec& spec);

}  // namespace confide
