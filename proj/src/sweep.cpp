#include "confide/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/core.h>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "confide/dataset.hpp"
#include "confide/error.hpp"
#include "confide/evaluation.hpp"
#include "confide/hashing.hpp"
#include "confide/pipeline.hpp"

namespace confide {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Error config_error(const std::string& message) {
  return Error(ErrorKind::kInputValidation, "sweep-config", message);
}

template <typename T>
std::vector<T> nonempty_list(const json& j, const char* key, std::vector<T> fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  std::vector<T> out;
  try {
    out = it->get<std::vector<T>>();
  } catch (const json::exception& e) {
    throw config_error(fmt::format("'{}' has the wrong type: {}", key, e.what()));
  }
  if (out.empty()) throw config_error(fmt::format("'{}' must be nonempty", key));
  return out;
}

std::string temperature_text(const std::optional<double>& t) {
  return t ? format_number(*t) : "-";
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "io-error", "cannot write file", file.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "io-error", "write failed", file.string());
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json row_to_json(const SweepRow& row) {
  json j;
  j["config_id"] = row.point.config_id;
  j["hash"] = row.point.hash;
  j["ok"] = row.ok;
  j["message"] = row.message;
  j["test_accuracy"] = row.test_accuracy;
  j["top_correct_efficiency"] = optional_json(row.top_correct_efficiency);
  j["top_correct_efficiency_epsilon"] = optional_json(row.top_correct_efficiency_epsilon);
  j["wall_seconds"] = row.wall_seconds;
  return j;
}

// Loads a cached row if it exists and belongs to this grid point.
std::optional<SweepRow> load_cached_row(const fs::path& file, const SweepPoint& point) {
  std::error_code ec;
  if (!fs::exists(file, ec)) return std::nullopt;
  std::ifstream in(file);
  try {
    const json j = json::parse(in);
    if (j.at("hash").get<std::string>() != point.hash ||
        j.at("config_id").get<std::string>() != point.config_id) {
      return std::nullopt;
    }
    SweepRow row;
    row.point = point;
    row.ok = j.at("ok").get<bool>();
    row.message = j.at("message").get<std::string>();
    row.test_accuracy = j.at("test_accuracy").get<double>();
    row.top_correct_efficiency = optional_from(j, "top_correct_efficiency");
    row.top_correct_efficiency_epsilon = optional_from(j, "top_correct_efficiency_epsilon");
    row.wall_seconds = j.at("wall_seconds").get<double>();
    return row;
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cached row {}: {}", file.string(), e.what());
    return std::nullopt;
  }
}

std::vector<SweepPoint> enumerate_points(const SweepConfig& config,
                                         const std::vector<EmbeddingDataset>& datasets,
                                         const std::vector<std::string>& hashes) {
  std::vector<SweepPoint> points;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& ds = datasets[d];
    std::vector<std::optional<double>> temperatures{std::nullopt};
    if (ds.is_softmax_layer() && !config.temperature_grid.empty()) {
      temperatures.assign(config.temperature_grid.begin(), config.temperature_grid.end());
    }
    for (MetricKind metric : config.metrics) {
      for (bool pca : config.pca_options) {
        for (const auto& t : temperatures) {
          for (std::size_t k : config.k_grid) {
            SweepPoint p;
            p.dataset = d;
            p.dataset_path = config.dataset_paths[d].string();
            p.layer = to_string(ds.layer);
            p.mode = to_string(ds.mode);
            p.k = k;
            p.metric = metric;
            p.pca = pca;
            p.temperature = t;
            p.config_id = fmt::format("d{}:layer={}:{}:k={}:{}:pca={}:T={}", d, p.layer, p.mode, k,
                                      to_string(metric), pca ? 1 : 0, temperature_text(t));
            p.hash = sha256_hex(fmt::format(
                         "dataset={};k={};metric={};pca={};threshold={};T={};mode={}", hashes[d], k,
                         to_string(metric), pca, format_number(config.variance_threshold),
                         temperature_text(t), to_string(config.calibration_mode)))
                         .substr(0, 24);
            points.push_back(std::move(p));
          }
        }
      }
    }
  }
  return points;
}

SweepRow evaluate_point(const SweepPoint& point, const EmbeddingDataset& ds,
                        const SweepConfig& config, const std::vector<double>& epsilons,
                        const fs::path& curves_dir) {
  SweepRow row;
  row.point = point;
  const auto start = std::chrono::steady_clock::now();
  try {
    PipelineConfig pc;
    pc.index.k = point.k;
    pc.index.metric = point.metric;
    pc.index.use_pca = point.pca;
    pc.index.variance_threshold = config.variance_threshold;
    pc.mode = config.calibration_mode;
    pc.temperature = point.temperature;
    const auto summary = run_and_evaluate(ds, pc, epsilons, Execution::kSerial);
    row.ok = true;
    row.test_accuracy = summary.test_accuracy;
    row.top_correct_efficiency = summary.top_correct_efficiency;
    row.top_correct_efficiency_epsilon = summary.top_correct_efficiency_epsilon;
    std::ostringstream csv;
    write_curve_csv(csv, summary.curve);
    write_text(curves_dir / (point.hash + ".csv"), csv.str());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    row.ok = false;
    row.message = fmt::format("{}: {}", e.code(), e.what());
    spdlog::warn("sweep: skipping {} ({})", point.config_id, row.message);
  }
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

void select_best(SweepResult& result) {
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    if (!row.ok) continue;
    if (!result.confide_a || row.test_accuracy > result.rows[*result.confide_a].test_accuracy) {
      result.confide_a = i;
    }
    if (row.top_correct_efficiency &&
        (!result.confide_c ||
         *row.top_correct_efficiency > *result.rows[*result.confide_c].top_correct_efficiency)) {
      result.confide_c = i;
    }
  }
}

std::string optional_csv(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

std::string results_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "config_id,hash,dataset,layer,mode,k,metric,pca,temperature,status,test_accuracy,"
         "top_correct_efficiency,top_correct_efficiency_epsilon,message\n";
  for (const auto& row : result.rows) {
    const auto& p = row.point;
    std::string message = row.message;
    std::replace(message.begin(), message.end(), ',', ';');
    std::replace(message.begin(), message.end(), '\n', ' ');
    out << p.config_id << ',' << p.hash << ',' << p.dataset << ',' << p.layer << ',' << p.mode
        << ',' << p.k << ',' << to_string(p.metric) << ',' << (p.pca ? "true" : "false") << ','
        << temperature_text(p.temperature) << ',' << (row.ok ? "ok" : "skipped") << ','
        << (row.ok ? format_number(row.test_accuracy) : "NA") << ','
        << optional_csv(row.top_correct_efficiency) << ','
        << optional_csv(row.top_correct_efficiency_epsilon) << ',' << message << '\n';
  }
  return out.str();
}

json summary_json(const SweepResult& result, const SweepConfig& config) {
  json j;
  j["config"] = to_json(config);
  j["rows"] = result.rows.size();
  j["successful_rows"] = std::count_if(result.rows.begin(), result.rows.end(),
                                       [](const SweepRow& r) { return r.ok; });
  auto selection = [&](const std::optional<std::size_t>& idx) -> json {
    if (!idx) return nullptr;
    const auto& row = result.rows[*idx];
    return {{"config_id", row.point.config_id},
            {"hash", row.point.hash},
            {"test_accuracy", row.test_accuracy},
            {"top_correct_efficiency", optional_json(row.top_correct_efficiency)},
            {"top_correct_efficiency_epsilon", optional_json(row.top_correct_efficiency_epsilon)}};
  };
  j["confide_a"] = selection(result.confide_a);
  j["confide_c"] = selection(result.confide_c);
  return j;
}

void write_heatmap(const fs::path& file, const HeatmapTable& table,
                   const std::vector<std::vector<std::optional<double>>>& values) {
  std::ostringstream out;
  out << table.row_axis << '\\' << table.col_axis;
  for (const auto& c : table.col_keys) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.row_keys.size(); ++r) {
    out << table.row_keys[r];
    for (const auto& v : values[r]) out << ',' << optional_csv(v);
    out << '\n';
  }
  write_text(file, out.str());
}

template <typename RowKey, typename ColKey>
HeatmapTable build_table(const SweepResult& result, std::string row_axis, std::string col_axis,
                         RowKey row_key, ColKey col_key) {
  HeatmapTable table;
  table.row_axis = std::move(row_axis);
  table.col_axis = std::move(col_axis);
  std::map<std::string, std::size_t> rows;
  std::map<std::string, std::size_t> cols;
  // Keys in first-appearance order.
  for (const auto& row : result.rows) {
    auto rk = row_key(row.point);
    auto ck = col_key(row.point);
    if (!rk || !ck) continue;
    if (!rows.contains(*rk)) {
      rows[*rk] = table.row_keys.size();
      table.row_keys.push_back(*rk);
    }
    if (!cols.contains(*ck)) {
      cols[*ck] = table.col_keys.size();
      table.col_keys.push_back(*ck);
    }
  }
  table.best_accuracy.assign(table.row_keys.size(),
                             std::vector<std::optional<double>>(table.col_keys.size()));
  table.best_correct_efficiency = table.best_accuracy;
  for (const auto& row : result.rows) {
    auto rk = row_key(row.point);
    auto ck = col_key(row.point);
    if (!rk || !ck || !row.ok) continue;
    auto& acc = table.best_accuracy[rows[*rk]][cols[*ck]];
    if (!acc || row.test_accuracy > *acc) acc = row.test_accuracy;
    if (row.top_correct_efficiency) {
      auto& ceff = table.best_correct_efficiency[rows[*rk]][cols[*ck]];
      if (!ceff || *row.top_correct_efficiency > *ceff) ceff = row.top_correct_efficiency;
    }
  }
  return table;
}

}  // namespace

SweepConfig parse_sweep_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw config_error("sweep config must be a JSON object");
  SweepConfig c;
  auto datasets = nonempty_list<std::string>(j, "datasets", {});
  if (datasets.empty()) throw config_error("'datasets' must list at least one dataset directory");
  for (const auto& d : datasets) {
    fs::path p(d);
    c.dataset_paths.push_back(p.is_absolute() || base_dir.empty() ? p : base_dir / p);
  }
  c.k_grid = nonempty_list<std::size_t>(j, "k_grid", c.k_grid);
  if (std::find(c.k_grid.begin(), c.k_grid.end(), std::size_t{0}) != c.k_grid.end()) {
    throw config_error("'k_grid' entries must be positive");
  }
  if (j.contains("metrics")) {
    c.metrics.clear();
    for (const auto& m : nonempty_list<std::string>(j, "metrics", {})) {
      c.metrics.push_back(parse_metric_kind(m));
    }
  }
  c.pca_options = nonempty_list<bool>(j, "pca", c.pca_options);
  if (j.contains("temperatures")) {
    c.temperature_grid = nonempty_list<double>(j, "temperatures", {});
    for (double t : c.temperature_grid) {
      if (!(t > 0.0)) throw config_error("'temperatures' entries must be positive");
    }
  }
  if (auto it = j.find("calibration_mode"); it != j.end()) {
    c.calibration_mode = parse_calibration_mode(it->get<std::string>());
  }
  if (auto it = j.find("variance_threshold"); it != j.end()) {
    c.variance_threshold = it->get<double>();
  }
  if (j.contains("epsilons")) c.epsilons = nonempty_list<double>(j, "epsilons", {});
  if (auto it = j.find("seed"); it != j.end()) c.seed = it->get<std::uint64_t>();
  return c;
}

SweepConfig load_sweep_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIo, "missing-file", "cannot open sweep config", file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInputValidation, "sweep-config", e.what(), file.string(), e.byte);
  }
  return parse_sweep_config(j, file.parent_path());
}

json to_json(const SweepConfig& c) {
  json j;
  std::vector<std::string> paths;
  for (const auto& p : c.dataset_paths) paths.push_back(p.string());
  j["datasets"] = paths;
  j["k_grid"] = c.k_grid;
  std::vector<std::string> metrics;
  for (auto m : c.metrics) metrics.emplace_back(to_string(m));
  j["metrics"] = metrics;
  j["pca"] = c.pca_options;
  j["temperatures"] = c.temperature_grid;
  j["calibration_mode"] = to_string(c.calibration_mode);
  j["variance_threshold"] = c.variance_threshold;
  if (!c.epsilons.empty()) j["epsilons"] = c.epsilons;
  j["seed"] = c.seed;
  return j;
}

SweepResult run_sweep(const SweepConfig& config, const fs::path& out_dir,
                      const SweepOptions& options) {
  std::vector<EmbeddingDataset> datasets;
  std::vector<std::string> hashes;
  for (const auto& path : config.dataset_paths) {
    datasets.push_back(read_dataset(path));
    hashes.push_back(dataset_hash(datasets.back()));
  }
  const std::vector<double> epsilons =
      config.epsilons.empty() ? default_epsilons() : config.epsilons;

  std::error_code ec;
  const fs::path rows_dir = out_dir / "rows";
  const fs::path curves_dir = out_dir / "curves";
  fs::create_directories(rows_dir, ec);
  fs::create_directories(curves_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "io-error", "cannot create sweep directories", out_dir.string());

  const auto points = enumerate_points(config, datasets, hashes);
  SweepResult result;
  result.rows.resize(points.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (auto cached = load_cached_row(rows_dir / (points[i].hash + ".json"), points[i])) {
      result.rows[i] = std::move(*cached);
    } else {
      pending.push_back(i);
    }
  }
  if (options.limit && pending.size() > *options.limit) {
    pending.resize(*options.limit);
    result.complete = false;
  }
  spdlog::info("sweep: {} grid points, {} cached, {} to evaluate", points.size(),
               points.size() - pending.size() - (result.complete ? 0 : 0), pending.size());

  const int jobs = options.jobs > 0 ? options.jobs : omp_get_max_threads();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (std::size_t j = 0; j < pending.size(); ++j) {
    try {
      const std::size_t i = pending[j];
      auto row = evaluate_point(points[i], datasets[points[i].dataset], config, epsilons, curves_dir);
      write_text(rows_dir / (points[i].hash + ".json"), row_to_json(row).dump(2) + "\n");
      result.rows[i] = std::move(row);
    } catch (...) {
#pragma omp critical(confide_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  result.computed = pending.size();

  if (!result.complete) {
    // Drop rows that were neither cached nor evaluated.
    std::vector<SweepRow> done;
    for (auto& row : result.rows) {
      if (!row.point.hash.empty()) done.push_back(std::move(row));
    }
    result.rows = std::move(done);
    select_best(result);
    spdlog::info("sweep: stopped early after {} new points", result.computed);
    return result;
  }

  select_best(result);
  if (!result.confide_a) {
    throw Error(ErrorKind::kPrecondition, "no-successful-combinations",
                "every grid point failed; see the skip reasons in rows/");
  }

  write_text(out_dir / "results.csv", results_csv(result));
  write_text(out_dir / "summary.json", summary_json(result, config).dump(2) + "\n");
  std::ostringstream timings;
  timings << "config_id,hash,wall_seconds\n";
  for (const auto& row : result.rows) {
    timings << row.point.config_id << ',' << row.point.hash << ','
            << format_number(row.wall_seconds) << '\n';
  }
  write_text(out_dir / "timings.csv", timings.str());
  emit_heatmap_tables(result, out_dir);
  return result;
}

HeatmapTable layer_k_heatmap(const SweepResult& result) {
  return build_table(
      result, "layer", "k",
      [](const SweepPoint& p) { return std::optional<std::string>(p.layer); },
      [](const SweepPoint& p) { return std::optional<std::string>(std::to_string(p.k)); });
}

HeatmapTable softmax_k_temperature_heatmap(const SweepResult& result) {
  return build_table(
      result, "temperature", "k",
      [](const SweepPoint& p) -> std::optional<std::string> {
        if (p.layer != "softmax" || !p.temperature) return std::nullopt;
        return format_number(*p.temperature);
      },
      [](const SweepPoint& p) { return std::optional<std::string>(std::to_string(p.k)); });
}

void emit_heatmap_tables(const SweepResult& result, const fs::path& out_dir) {
  const auto lk = layer_k_heatmap(result);
  write_heatmap(out_dir / "heatmap_layer_k_accuracy.csv", lk, lk.best_accuracy);
  write_heatmap(out_dir / "heatmap_layer_k_correct_efficiency.csv", lk, lk.best_correct_efficiency);
  const auto tk = softmax_k_temperature_heatmap(result);
  if (!tk.row_keys.empty()) {
    write_heatmap(out_dir / "heatmap_temperature_k_accuracy.csv", tk, tk.best_accuracy);
    write_heatmap(out_dir / "heatmap_temperature_k_correct_efficiency.csv", tk,
                  tk.best_correct_efficiency);
  }
}

}  // namespace confide
