#include "confide/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "confide/error.hpp"

namespace confide {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kManifestName = "manifest.json";

bool is_known_split(const std::string& name) {
  return name == kTrainSplit || name == kCalibrationSplit || name == kTestSplit;
}

Error validation_error(std::string code, const std::string& message,
                       std::optional<std::string> file = std::nullopt,
                       std::optional<std::uint64_t> offset = std::nullopt) {
  return Error(ErrorKind::kInputValidation, std::move(code), message, std::move(file), offset);
}

template <typename T>
T byteswap_value(T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

// Reads a whole little-endian array of T and checks its exact byte size.
template <typename T>
std::vector<T> read_le_array(const fs::path& file, std::size_t expected_count) {
  std::error_code ec;
  if (!fs::exists(file, ec)) {
    throw Error(ErrorKind::kIo, "missing-file", "referenced file does not exist", file.string());
  }
  const auto size = fs::file_size(file, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "io-error", "cannot stat file: " + ec.message(), file.string());
  }
  const std::uint64_t expected_bytes = static_cast<std::uint64_t>(expected_count) * sizeof(T);
  if (size != expected_bytes) {
    throw validation_error(
        "dimension-mismatch",
        fmt::format("file holds {} bytes but the manifest implies {} bytes", size, expected_bytes),
        file.string(), std::min<std::uint64_t>(size, expected_bytes));
  }
  std::vector<T> values(expected_count);
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "io-error", "cannot open file for reading", file.string());
  }
  if (expected_count > 0 &&
      !in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected_bytes))) {
    throw Error(ErrorKind::kIo, "io-error", "short read", file.string());
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) v = byteswap_value(v);
  }
  return values;
}

template <typename T>
void write_le_array(const fs::path& file, const std::vector<T>& values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "io-error", "cannot open file for writing", file.string());
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (T v : values) {
      v = byteswap_value(v);
      out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
  } else if (!values.empty()) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(T)));
  }
  if (!out) {
    throw Error(ErrorKind::kIo, "io-error", "write failed", file.string());
  }
}

void check_finite(const std::vector<float>& values, const std::string& file) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw validation_error("non-finite", "non-finite value", file, i * sizeof(float));
    }
  }
}

void check_labels(const std::vector<std::uint32_t>& labels, std::size_t num_classes,
                  const std::string& file) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw validation_error(
          "label-range",
          fmt::format("label {} at row {} is outside [0, {})", labels[i], i, num_classes), file,
          i * sizeof(std::uint32_t));
    }
  }
}

void validate_split(const std::string& name, const Split& split, const EmbeddingDataset& ds,
                    const std::map<std::string, std::string>& files) {
  auto file_for = [&](const char* key) {
    auto it = files.find(key);
    return it != files.end() ? it->second : fmt::format("<{}:{}>", name, key);
  };
  if (split.embeddings.size() != split.count * ds.dim) {
    throw validation_error("dimension-mismatch",
                           fmt::format("split '{}' embeddings hold {} values, expected {}x{}", name,
                                       split.embeddings.size(), split.count, ds.dim),
                           file_for("embeddings_file"));
  }
  if (split.labels.size() != split.count) {
    throw validation_error("dimension-mismatch",
                           fmt::format("split '{}' has {} labels for {} rows", name,
                                       split.labels.size(), split.count),
                           file_for("labels_file"));
  }
  check_finite(split.embeddings, file_for("embeddings_file"));
  check_labels(split.labels, ds.num_classes, file_for("labels_file"));
  if (split.predicted_labels) {
    if (split.predicted_labels->size() != split.count) {
      throw validation_error("dimension-mismatch",
                             fmt::format("split '{}' has {} predicted labels for {} rows", name,
                                         split.predicted_labels->size(), split.count),
                             file_for("predicted_labels_file"));
    }
    check_labels(*split.predicted_labels, ds.num_classes, file_for("predicted_labels_file"));
  }
  if (split.logits) {
    if (split.logits->size() != split.count * ds.num_classes) {
      throw validation_error("dimension-mismatch",
                             fmt::format("split '{}' logits hold {} values, expected {}x{}", name,
                                         split.logits->size(), split.count, ds.num_classes),
                             file_for("logits_file"));
    }
    check_finite(*split.logits, file_for("logits_file"));
  }
  if (split.row_ids && split.row_ids->size() != split.count) {
    throw validation_error("dimension-mismatch",
                           fmt::format("split '{}' has {} row ids for {} rows", name,
                                       split.row_ids->size(), split.count),
                           file_for("row_ids_file"));
  }
}

void validate_impl(const EmbeddingDataset& ds,
                   const std::map<std::string, std::map<std::string, std::string>>& files) {
  if (ds.dim == 0) throw validation_error("manifest-schema", "dim must be positive");
  if (ds.num_classes == 0) throw validation_error("manifest-schema", "num_classes must be positive");
  if (!ds.class_names.empty() && ds.class_names.size() != ds.num_classes) {
    throw validation_error("manifest-schema",
                           fmt::format("class_names has {} entries for {} classes",
                                       ds.class_names.size(), ds.num_classes));
  }
  static const std::map<std::string, std::string> kNoFiles;
  for (const auto& [name, split] : ds.splits) {
    if (!is_known_split(name)) {
      throw validation_error("unknown-split",
                             "split name '" + name + "' is not one of train, calibration, test");
    }
    auto it = files.find(name);
    validate_split(name, split, ds, it != files.end() ? it->second : kNoFiles);
  }
  // Calibration and test rows must not reuse training examples.
  auto train = ds.splits.find(kTrainSplit);
  if (train != ds.splits.end() && train->second.row_ids) {
    std::unordered_set<std::uint64_t> train_ids(train->second.row_ids->begin(),
                                                train->second.row_ids->end());
    for (const char* other : {kCalibrationSplit, kTestSplit}) {
      auto it = ds.splits.find(other);
      if (it == ds.splits.end() || !it->second.row_ids) continue;
      const auto& ids = *it->second.row_ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (train_ids.contains(ids[i])) {
          throw validation_error("split-overlap",
                                 fmt::format("{} row {} has provenance id {} which also appears "
                                             "in train",
                                             other, i, ids[i]));
        }
      }
    }
  }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where, const std::string& file) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw validation_error("missing-field", fmt::format("{} lacks required field '{}'", where, key),
                           file);
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw validation_error("manifest-schema",
                           fmt::format("{} field '{}' has the wrong type: {}", where, key, e.what()),
                           file);
  }
}

std::optional<std::string> optional_string(const json& obj, const char* key,
                                           const std::string& file) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw validation_error("manifest-schema", fmt::format("field '{}' must be a string", key), file);
  }
  return it->get<std::string>();
}

fs::path resolve_data_file(const fs::path& dir, const std::string& name, const std::string& manifest) {
  fs::path rel(name);
  if (rel.empty() || rel.is_absolute()) {
    throw validation_error("manifest-schema",
                           "data file paths must be relative to the dataset directory: '" + name + "'",
                           manifest);
  }
  return dir / rel;
}

std::string split_file_name(const std::string& split, const char* what, const char* ext) {
  return fmt::format("{}_{}.{}", split, what, ext);
}

}  // namespace

const char* to_string(RepresentationMode mode) {
  return mode == RepresentationMode::kAttention ? "attention" : "flattened";
}

RepresentationMode parse_representation_mode(const std::string& text) {
  if (text == "attention") return RepresentationMode::kAttention;
  if (text == "flattened") return RepresentationMode::kFlattened;
  throw validation_error("manifest-schema",
                         "mode must be \"attention\" or \"flattened\", got '" + text + "'");
}

std::string to_string(const LayerIndex& layer) {
  if (std::holds_alternative<SoftmaxLayer>(layer)) return "softmax";
  return std::to_string(std::get<std::int64_t>(layer));
}

const Split& EmbeddingDataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) {
    throw Error(ErrorKind::kInputValidation, "missing-field",
                "dataset has no '" + name + "' split");
  }
  return it->second;
}

std::string EmbeddingDataset::class_name(std::uint32_t label) const {
  if (label < class_names.size()) return class_names[label];
  return std::to_string(label);
}

void validate(const EmbeddingDataset& ds) { validate_impl(ds, {}); }

EmbeddingDataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  const std::string mfile = manifest_path.string();
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorKind::kIo, "missing-file", "cannot open dataset manifest", mfile);
  }
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw validation_error("manifest-parse", e.what(), mfile, e.byte);
  }
  if (!manifest.is_object()) {
    throw validation_error("manifest-schema", "manifest must be a JSON object", mfile);
  }

  const auto version = require<int>(manifest, "schema_version", "manifest", mfile);
  if (version != kSchemaVersion) {
    throw validation_error("manifest-schema",
                           fmt::format("unsupported schema_version {}", version), mfile);
  }

  EmbeddingDataset ds;
  const auto dim = require<std::int64_t>(manifest, "dim", "manifest", mfile);
  const auto num_classes = require<std::int64_t>(manifest, "num_classes", "manifest", mfile);
  if (dim <= 0 || num_classes <= 0) {
    throw validation_error("manifest-schema", "dim and num_classes must be positive", mfile);
  }
  ds.dim = static_cast<std::size_t>(dim);
  ds.num_classes = static_cast<std::size_t>(num_classes);
  if (auto it = manifest.find("class_names"); it != manifest.end() && !it->is_null()) {
    try {
      ds.class_names = it->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw validation_error("manifest-schema", "class_names must be an array of strings", mfile);
    }
  }
  ds.model = require<std::string>(manifest, "model", "manifest", mfile);
  ds.task = require<std::string>(manifest, "task", "manifest", mfile);

  auto layer_it = manifest.find("layer_index");
  if (layer_it == manifest.end()) {
    throw validation_error("missing-field", "manifest lacks required field 'layer_index'", mfile);
  }
  if (layer_it->is_number_integer()) {
    ds.layer = layer_it->get<std::int64_t>();
  } else if (layer_it->is_string() && layer_it->get<std::string>() == "softmax") {
    ds.layer = SoftmaxLayer{};
  } else {
    throw validation_error("manifest-schema",
                           "layer_index must be an integer or the string \"softmax\"", mfile);
  }
  ds.layer_name = optional_string(manifest, "layer_name", mfile);
  ds.mode = parse_representation_mode(require<std::string>(manifest, "mode", "manifest", mfile));

  auto splits_it = manifest.find("splits");
  if (splits_it == manifest.end() || !splits_it->is_object()) {
    throw validation_error("missing-field", "manifest lacks an object-valued 'splits' field",
                           mfile);
  }

  std::map<std::string, std::map<std::string, std::string>> files;
  for (const auto& [name, entry] : splits_it->items()) {
    if (!is_known_split(name)) {
      throw validation_error("unknown-split",
                             "split name '" + name + "' is not one of train, calibration, test",
                             mfile);
    }
    const std::string where = "split '" + name + "'";
    if (!entry.is_object()) {
      throw validation_error("manifest-schema", where + " must be an object", mfile);
    }
    const auto count = require<std::int64_t>(entry, "count", where, mfile);
    if (count < 0) throw validation_error("manifest-schema", where + " has negative count", mfile);

    Split split;
    split.count = static_cast<std::size_t>(count);
    auto& split_files = files[name];

    const auto emb = resolve_data_file(dir, require<std::string>(entry, "embeddings_file", where, mfile), mfile);
    split_files["embeddings_file"] = emb.string();
    split.embeddings = read_le_array<float>(emb, split.count * ds.dim);

    const auto lab = resolve_data_file(dir, require<std::string>(entry, "labels_file", where, mfile), mfile);
    split_files["labels_file"] = lab.string();
    split.labels = read_le_array<std::uint32_t>(lab, split.count);

    if (auto name_opt = optional_string(entry, "predicted_labels_file", mfile)) {
      const auto f = resolve_data_file(dir, *name_opt, mfile);
      split_files["predicted_labels_file"] = f.string();
      split.predicted_labels = read_le_array<std::uint32_t>(f, split.count);
    }
    if (auto name_opt = optional_string(entry, "logits_file", mfile)) {
      const auto f = resolve_data_file(dir, *name_opt, mfile);
      split_files["logits_file"] = f.string();
      split.logits = read_le_array<float>(f, split.count * ds.num_classes);
    }
    if (auto name_opt = optional_string(entry, "row_ids_file", mfile)) {
      const auto f = resolve_data_file(dir, *name_opt, mfile);
      split_files["row_ids_file"] = f.string();
      split.row_ids = read_le_array<std::uint64_t>(f, split.count);
    }
    ds.splits.emplace(name, std::move(split));
  }

  validate_impl(ds, files);
  return ds;
}

void write_dataset(const EmbeddingDataset& ds, const fs::path& dir) {
  validate(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "io-error", "cannot create directory: " + ec.message(),
                dir.string());
  }

  json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["dim"] = ds.dim;
  manifest["num_classes"] = ds.num_classes;
  if (!ds.class_names.empty()) manifest["class_names"] = ds.class_names;
  manifest["model"] = ds.model;
  manifest["task"] = ds.task;
  if (ds.is_softmax_layer()) {
    manifest["layer_index"] = "softmax";
  } else {
    manifest["layer_index"] = std::get<std::int64_t>(ds.layer);
  }
  if (ds.layer_name) manifest["layer_name"] = *ds.layer_name;
  manifest["mode"] = to_string(ds.mode);

  json splits = json::object();
  for (const auto& [name, split] : ds.splits) {
    json entry;
    entry["count"] = split.count;
    entry["embeddings_file"] = split_file_name(name, "embeddings", "f32");
    write_le_array(dir / entry["embeddings_file"].get<std::string>(), split.embeddings);
    entry["labels_file"] = split_file_name(name, "labels", "u32");
    write_le_array(dir / entry["labels_file"].get<std::string>(), split.labels);
    if (split.predicted_labels) {
      entry["predicted_labels_file"] = split_file_name(name, "predicted_labels", "u32");
      write_le_array(dir / entry["predicted_labels_file"].get<std::string>(),
                     *split.predicted_labels);
    }
    if (split.logits) {
      entry["logits_file"] = split_file_name(name, "logits", "f32");
      write_le_array(dir / entry["logits_file"].get<std::string>(), *split.logits);
    }
    if (split.row_ids) {
      entry["row_ids_file"] = split_file_name(name, "row_ids", "u64");
      write_le_array(dir / entry["row_ids_file"].get<std::string>(), *split.row_ids);
    }
    splits[name] = std::move(entry);
  }
  manifest["splits"] = std::move(splits);

  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "io-error", "cannot write manifest",
                (dir / kManifestName).string());
  }
  out << manifest.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorKind::kIo, "io-error", "manifest write failed",
                (dir / kManifestName).string());
  }
}

}  // namespace confide
