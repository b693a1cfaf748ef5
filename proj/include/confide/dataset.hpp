#pragma once

// Portable embedding-dataset format: one directory holding manifest.json plus
// raw little-endian binaries (binary32 embeddings/logits, uint32 labels).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace confide {

inline constexpr int kSchemaVersion = 1;

inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kCalibrationSplit = "calibration";
inline constexpr const char* kTestSplit = "test";

enum class RepresentationMode { kAttention, kFlattened };

const char* to_string(RepresentationMode mode);
RepresentationMode parse_representation_mode(const std::string& text);

/// Numeric probe index of the layer, or the final softmax/logit layer.
struct SoftmaxLayer {
  bool operator==(const SoftmaxLayer&) const = default;
};
using LayerIndex = std::variant<std::int64_t, SoftmaxLayer>;

std::string to_string(const LayerIndex& layer);

struct Split {
  std::size_t count = 0;
  std::vector<float> embeddings;  // count x dim, row-major
  std::vector<std::uint32_t> labels;
  std::optional<std::vector<std::uint32_t>> predicted_labels;
  std::optional<std::vector<float>> logits;  // count x num_classes, row-major
  // Stable provenance key per row (e.g. source example index).
  std::optional<std::vector<std::uint64_t>> row_ids;

  std::span<const float> row(std::size_t i, std::size_t dim) const {
    return {embeddings.data() + i * dim, dim};
  }

  bool operator==(const Split&) const = default;
};

struct EmbeddingDataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;  // empty, or one name per class
  std::string model;
  std::string task;
  LayerIndex layer = std::int64_t{0};
  std::optional<std::string> layer_name;
  RepresentationMode mode = RepresentationMode::kAttention;
  std::map<std::string, Split> splits;

  bool has_split(const std::string& name) const { return splits.contains(name); }
  /// Throws a "missing-field" error when the split is absent.
  const Split& split(const std::string& name) const;
  bool is_softmax_layer() const { return std::holds_alternative<SoftmaxLayer>(layer); }
  std::string class_name(std::uint32_t label) const;

  bool operator==(const EmbeddingDataset&) const = default;
};

/// Checks every invariant (row widths, label ranges, finiteness, split names,
/// provenance disjointness). Throws confide::Error on the first violation.
void validate(const EmbeddingDataset& ds);

/// Reads and fully validates a dataset directory.
EmbeddingDataset read_dataset(const std::filesystem::path& dir);

/// Writes manifest.json and one binary per array. The directory is created if
/// needed; existing files with the same names are overwritten.
void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& dir);

}  // namespace confide
