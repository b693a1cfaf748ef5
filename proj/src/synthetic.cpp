#include "confide/synthetic.hpp"

#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {

double NormalSampler::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double NormalSampler::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

BlobSpec two_class_blobs(std::size_t dim, double shift, double minority_weight, std::size_t n_train,
                         std::size_t n_calibration, std::size_t n_test, std::uint64_t seed) {
  BlobSpec spec;
  spec.dim = dim;
  spec.means.assign(2, std::vector<double>(dim, 0.0));
  spec.means[0][0] = shift;
  spec.means[1][0] = -shift;
  spec.class_weights = {1.0 - minority_weight, minority_weight};
  spec.n_train = n_train;
  spec.n_calibration = n_calibration;
  spec.n_test = n_test;
  spec.seed = seed;
  return spec;
}

EmbeddingDataset make_gaussian_blobs(const BlobSpec& spec) {
  const std::size_t nc = spec.means.size();
  if (nc < 2 || spec.dim == 0) {
    throw Error(ErrorKind::kUsage, "invalid-spec", "need at least two classes and dim > 0");
  }
  for (const auto& m : spec.means) {
    if (m.size() != spec.dim) {
      throw Error(ErrorKind::kUsage, "invalid-spec", "every class mean must have length dim");
    }
  }
  std::vector<double> weights = spec.class_weights;
  if (weights.empty()) weights.assign(nc, 1.0 / static_cast<double>(nc));
  if (weights.size() != nc) {
    throw Error(ErrorKind::kUsage, "invalid-spec", "class_weights must have one entry per class");
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;

  NormalSampler rng(spec.seed);
  EmbeddingDataset ds;
  ds.num_classes = nc;
  ds.dim = spec.softmax_layer ? nc : spec.dim;
  ds.model = "synthetic";
  ds.task = "gaussian-blobs";
  ds.mode = RepresentationMode::kAttention;
  if (spec.softmax_layer) {
    ds.layer = SoftmaxLayer{};
    ds.layer_name = "classifier.logits";
  } else {
    ds.layer = std::int64_t{0};
    ds.layer_name = "input";
  }
  for (std::size_t c = 0; c < nc; ++c) ds.class_names.push_back(fmt::format("class_{}", c));

  const double inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
  std::uint64_t next_id = 0;
  auto sample_split = [&](std::size_t count) {
    Split s;
    s.count = count;
    s.embeddings.reserve(count * ds.dim);
    s.labels.reserve(count);
    s.predicted_labels.emplace();
    s.logits.emplace();
    s.row_ids.emplace();
    std::vector<double> x(spec.dim);
    for (std::size_t i = 0; i < count; ++i) {
      const double u = rng.uniform() * wsum;
      std::uint32_t y = static_cast<std::uint32_t>(nc - 1);
      double acc = 0.0;
      for (std::size_t c = 0; c < nc; ++c) {
        acc += weights[c];
        if (u < acc) {
          y = static_cast<std::uint32_t>(c);
          break;
        }
      }
      for (std::size_t d = 0; d < spec.dim; ++d) x[d] = spec.means[y][d] + spec.sigma * rng.normal();

      std::vector<float> logits(nc);
      std::uint32_t pred = 0;
      for (std::size_t c = 0; c < nc; ++c) {
        double sq = 0.0;
        for (std::size_t d = 0; d < spec.dim; ++d) {
          const double diff = x[d] - spec.means[c][d];
          sq += diff * diff;
        }
        logits[c] = static_cast<float>(-sq * inv_two_var);
        if (logits[c] > logits[pred]) pred = static_cast<std::uint32_t>(c);
      }
      if (spec.softmax_layer) {
        s.embeddings.insert(s.embeddings.end(), logits.begin(), logits.end());
      } else {
        for (double v : x) s.embeddings.push_back(static_cast<float>(v));
      }
      s.labels.push_back(y);
      s.predicted_labels->push_back(pred);
      s.logits->insert(s.logits->end(), logits.begin(), logits.end());
      s.row_ids->push_back(next_id++);
    }
    return s;
  };
  ds.splits[kTrainSplit] = sample_split(spec.n_train);
  ds.splits[kCalibrationSplit] = sample_split(spec.n_calibration);
  ds.splits[kTestSplit] = sample_split(spec.n_test);
  return ds;
}

}  // namespace confide
