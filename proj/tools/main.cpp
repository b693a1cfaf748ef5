// confide: command-line front end for calibration, prediction, evaluation,
// explanation, sweeps and dataset linting.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "confide/artifact.hpp"
#include "confide/baselines.hpp"
#include "confide/dataset.hpp"
#include "confide/error.hpp"
#include "confide/evaluation.hpp"
#include "confide/hashing.hpp"
#include "confide/pipeline.hpp"
#include "confide/sweep.hpp"
#include "confide/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace confide;

namespace {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitPrecondition = 3,
  kExitIo = 4,
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kInputValidation: return kExitInput;
    case ErrorKind::kPrecondition: return kExitPrecondition;
    case ErrorKind::kIo: return kExitIo;
  }
  return kExitUsage;
}

// Flags shared by most subcommands.
struct Common {
  std::string dataset;
  std::size_t k = 20;
  std::string metric = "cosine";
  bool pca = false;
  double variance_threshold = kDefaultVarianceThreshold;
  std::string mode = "pooled";
  double epsilon = 0.1;
  std::optional<double> temperature;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out;
  bool error_json = false;
};

void init_logging() {
  auto logger = spdlog::stderr_color_mt("confide");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CONFIDE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("unrecognised CONFIDE_LOG value '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

PipelineConfig pipeline_config(const Common& c) {
  PipelineConfig config;
  config.index.k = c.k;
  config.index.metric = parse_metric_kind(c.metric);
  config.index.use_pca = c.pca;
  config.index.variance_threshold = c.variance_threshold;
  config.mode = parse_calibration_mode(c.mode);
  config.temperature = c.temperature;
  return config;
}

void require_out(const Common& c, const char* what) {
  if (c.out.empty()) throw Error(ErrorKind::kUsage, "missing-option", fmt::format("--out {} is required", what));
}

// Opens --out, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorKind::kIo, "io-error", "cannot open output file", path);
      path_ = path;
    }
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  void close() {
    if (path_.empty()) {
      std::cout.flush();
      return;
    }
    file_.close();
    if (!file_) throw Error(ErrorKind::kIo, "io-error", "write failed", path_);
  }

 private:
  std::ofstream file_;
  std::string path_;
};

RunManifest make_run(const std::string& command, const Common& c, const EmbeddingDataset* ds) {
  RunManifest run;
  run.command = command;
  run.dataset = c.dataset;
  run.seed = c.seed;
  if (ds) run.input_hashes["dataset"] = dataset_hash(*ds);
  return run;
}

void check_train_predictions(const EmbeddingDataset& ds, const std::string& dir) {
  if (!ds.split(kTrainSplit).predicted_labels) {
    throw Error(ErrorKind::kInputValidation, "missing-field",
                "train split has no predicted_labels_file; reference pools need the model's "
                "predictions",
                (fs::path(dir) / "manifest.json").string());
  }
}

// Rebuilds the fitted pipeline from an artifact, refusing stale inputs.
FittedPipeline load_fitted(const EmbeddingDataset& ds, const CalibrationArtifact& artifact,
                           const std::string& artifact_path) {
  if (calibration_inputs_hash(ds) != artifact.dataset_hash) {
    throw Error(ErrorKind::kPrecondition, "stale-calibration",
                "the dataset's train/calibration content does not match the artifact; "
                "rerun calibrate",
                artifact_path);
  }
  auto fitted = restore_pipeline(ds, artifact.config, artifact.scores);
  if (fitted.index.fingerprint() != artifact.index_fingerprint) {
    throw Error(ErrorKind::kPrecondition, "stale-calibration",
                "the rebuilt reference index differs from the one used at calibration",
                artifact_path);
  }
  return fitted;
}

json report_json(const PredictionReport& r, std::size_t row, const Split& split, double epsilon) {
  json j;
  j["row"] = row;
  if (split.row_ids) j["row_id"] = (*split.row_ids)[row];
  j["label"] = split.labels[row];
  j["p_values"] = r.p_values;
  j["epsilon"] = epsilon;
  j["prediction_set"] = r.prediction_set(epsilon);
  j["point_prediction"] = r.point_prediction;
  j["credibility"] = r.credibility;
  j["confidence"] = r.confidence;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const Common& c) {
  require_out(c, "<artifact.json>");
  const auto started = utc_timestamp();
  const auto ds = read_dataset(c.dataset);
  check_train_predictions(ds, c.dataset);
  const auto config = pipeline_config(c);
  const auto fitted = fit_pipeline(ds, config);

  CalibrationArtifact artifact;
  artifact.config = config;
  artifact.dataset_hash = calibration_inputs_hash(ds);
  artifact.index_fingerprint = fitted.index.fingerprint();
  artifact.scores = fitted.record.scores();
  artifact.labels = fitted.record.labels();
  artifact.run = make_run("calibrate", c, &ds);
  artifact.run.hyperparameters = to_json(config);
  artifact.run.input_hashes["calibration_inputs"] = artifact.dataset_hash;
  write_artifact(artifact, c.out);
  write_run_sidecar(artifact.run, c.out, started, utc_timestamp());
  spdlog::info("calibrated {} points; {} pooled reference rows", artifact.scores.size(),
               fitted.index.total_pool_size());
  return kExitOk;
}

// Streams written to a file get a run sidecar; stdout streams do not.
void maybe_write_sidecar(const std::string& command, const Common& c, const EmbeddingDataset& ds,
                         const CalibrationArtifact& artifact, const std::string& calibration,
                         const std::string& started) {
  if (c.out.empty()) return;
  RunManifest run = make_run(command, c, &ds);
  run.hyperparameters = to_json(artifact.config);
  run.hyperparameters["epsilon"] = c.epsilon;
  run.input_hashes["calibration_artifact"] = sha256_file(calibration);
  write_run_sidecar(run, c.out, started, utc_timestamp());
}

int cmd_predict(const Common& c, const std::string& calibration, const std::string& split_name) {
  const auto started = utc_timestamp();
  const auto ds = read_dataset(c.dataset);
  const auto artifact = read_artifact(calibration);
  const auto fitted = load_fitted(ds, artifact, calibration);
  const auto& split = ds.split(split_name);
  const auto reports = predict_split(fitted, ds, split_name, artifact.config, Execution::kParallel, false);
  Output out(c.out);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out.stream() << report_json(reports[i], i, split, c.epsilon).dump() << '\n';
  }
  out.close();
  maybe_write_sidecar("predict", c, ds, artifact, calibration, started);
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& calibration, double gap_threshold) {
  require_out(c, "<directory>");
  const auto started = utc_timestamp();
  const auto ds = read_dataset(c.dataset);
  const auto artifact = read_artifact(calibration);
  const auto fitted = load_fitted(ds, artifact, calibration);
  const auto& test = ds.split(kTestSplit);
  if (test.count == 0) {
    throw Error(ErrorKind::kPrecondition, "no-test-rows", "the test split has no rows",
                (fs::path(c.dataset) / "manifest.json").string());
  }
  const auto reports = predict_split(fitted, ds, kTestSplit, artifact.config, Execution::kParallel, false);
  const auto eps = default_epsilons();
  const auto summary = evaluate(reports, test.labels, eps);
  const auto gaps = coverage_gap_report(summary.curve, gap_threshold);

  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "io-error", "cannot create output directory", dir.string());

  RunManifest run = make_run("eval", c, &ds);
  run.hyperparameters = to_json(artifact.config);
  run.input_hashes["calibration_artifact"] = sha256_file(calibration);

  json j = to_json(summary, false);
  j["coverage_gaps"] = to_json(gaps);
  j["run"] = to_json(run);
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
  std::ostringstream curve;
  write_curve_csv(curve, summary.curve);
  write_text_file(dir / "coverage.csv", curve.str());
  std::ostringstream gap_csv;
  write_gap_csv(gap_csv, gaps);
  write_text_file(dir / "coverage_gaps.csv", gap_csv.str());
  write_run_sidecar(run, dir / "summary.json", started, utc_timestamp());

  for (const auto& g : gaps) {
    if (g.flagged) {
      spdlog::warn("class {} undercovers by up to {} (eps {})", g.label,
                   format_number(g.max_undercoverage), format_number(g.epsilon_at_max.value_or(0)));
    }
  }
  return kExitOk;
}

// Relative gap under which two neighborhoods are called indistinguishable.
constexpr double kIndistinguishable = 0.10;

bool indistinguishable(const LabelEvidence& e) {
  if (e.same_class.empty() || e.other_class.empty()) return false;
  const double a = e.score.numerator;
  const double b = e.score.denominator;
  const double hi = std::max(a, b);
  return hi > 0.0 && std::abs(a - b) / hi < kIndistinguishable;
}

json neighbors_json(const NeighborSet& n, const Split& train) {
  json list = json::array();
  for (std::size_t i = 0; i < n.size(); ++i) {
    json item = {{"train_row", n.row_ids[i]}, {"distance", n.distances[i]}};
    if (train.row_ids) item["row_id"] = (*train.row_ids)[n.row_ids[i]];
    item["label"] = train.labels[n.row_ids[i]];
    list.push_back(item);
  }
  return list;
}

std::string fmt_score(double v) { return std::isfinite(v) ? fmt::format("{:.6g}", v) : "inf"; }

int cmd_explain(const Common& c, const std::string& calibration, std::size_t row,
                const std::string& split_name, const std::string& format) {
  const auto started = utc_timestamp();
  const auto ds = read_dataset(c.dataset);
  const auto artifact = read_artifact(calibration);
  const auto fitted = load_fitted(ds, artifact, calibration);
  const auto& split = ds.split(split_name);
  if (row >= split.count) {
    throw Error(ErrorKind::kUsage, "row-out-of-range",
                fmt::format("row {} is out of range; the {} split has {} rows", row, split_name, split.count));
  }
  const Matrix all = representation(ds, split_name, artifact.config.temperature);
  const Matrix one = all.row(static_cast<Eigen::Index>(row));
  const auto report = predict_batch(fitted.index, fitted.record, one, Execution::kSerial, true).front();
  const auto set = report.prediction_set(c.epsilon);
  const auto& train = ds.split(kTrainSplit);

  bool any_flag = false;
  json labels = json::array();
  for (std::uint32_t y = 0; y < ds.num_classes; ++y) {
    const auto& e = report.evidence[y];
    const bool flag = indistinguishable(e);
    any_flag = any_flag || flag;
    json lj;
    lj["label"] = y;
    lj["name"] = ds.class_name(y);
    lj["p_value"] = report.p_values[y];
    lj["in_set"] = report.covers(y, c.epsilon);
    lj["score"] = std::isfinite(e.score.value) ? json(e.score.value) : json(nullptr);
    lj["same_class_mean"] = std::isfinite(e.score.numerator) ? json(e.score.numerator) : json(nullptr);
    lj["other_class_mean"] = e.score.denominator;
    lj["indistinguishable"] = flag;
    lj["supporting"] = neighbors_json(e.same_class, train);
    lj["contradicting"] = neighbors_json(e.other_class, train);
    labels.push_back(lj);
  }

  Output out(c.out);
  if (format == "json") {
    json j;
    j["row"] = row;
    if (split.row_ids) j["row_id"] = (*split.row_ids)[row];
    j["label"] = split.labels[row];
    j["epsilon"] = c.epsilon;
    j["prediction_set"] = set;
    j["point_prediction"] = report.point_prediction;
    j["credibility"] = report.credibility;
    j["confidence"] = report.confidence;
    j["indistinguishable_neighborhoods"] = any_flag;
    j["no_label_conforms"] = set.empty();
    j["labels"] = labels;
    out.stream() << j.dump(2) << '\n';
    out.close();
    maybe_write_sidecar("explain", c, ds, artifact, calibration, started);
    return kExitOk;
  }

  auto& os = out.stream();
  os << fmt::format("row {} of split '{}' (true label {})\n", row, split_name, split.labels[row]);
  std::vector<std::string> names;
  for (auto y : set) names.push_back(fmt::format("{} ({})", y, ds.class_name(y)));
  os << fmt::format("prediction set at eps={}: {{{}}}\n", format_number(c.epsilon), fmt::join(names, ", "));
  if (set.empty()) {
    os << fmt::format("  no label conforms: every p-value is at most eps (credibility {})\n",
                      fmt_score(report.credibility));
  }
  os << fmt::format("point prediction: {}   credibility: {}   confidence: {}\n",
                    report.point_prediction, fmt_score(report.credibility), fmt_score(report.confidence));
  if (any_flag) {
    os << "warning: indistinguishable neighborhoods (same-class and other-class mean distances "
          "differ by less than 10%)\n";
  }
  for (std::uint32_t y = 0; y < ds.num_classes; ++y) {
    const auto& e = report.evidence[y];
    os << fmt::format("\nlabel {} ({}): p={} score={} same={} other={}{}\n", y, ds.class_name(y),
                      fmt_score(report.p_values[y]), fmt_score(e.score.value),
                      fmt_score(e.score.numerator), fmt_score(e.score.denominator),
                      indistinguishable(e) ? "  [indistinguishable]" : "");
    os << "  supporting (same class):\n";
    if (e.same_class.empty()) os << "    (empty pool)\n";
    for (std::size_t i = 0; i < e.same_class.size(); ++i) {
      os << fmt::format("    train row {:>6}  d={}\n", e.same_class.row_ids[i], fmt_score(e.same_class.distances[i]));
    }
    os << "  contradicting (other classes):\n";
    for (std::size_t i = 0; i < e.other_class.size(); ++i) {
      const auto id = e.other_class.row_ids[i];
      os << fmt::format("    train row {:>6}  d={}  label {}\n", id, fmt_score(e.other_class.distances[i]),
                        train.labels[id]);
    }
  }
  out.close();
  maybe_write_sidecar("explain", c, ds, artifact, calibration, started);
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& config_path, std::optional<std::size_t> limit) {
  require_out(c, "<directory>");
  const auto started = utc_timestamp();
  const auto config = load_sweep_config(config_path);
  SweepOptions options;
  options.jobs = c.jobs;
  options.limit = limit;
  const auto result = run_sweep(config, c.out, options);
  if (!result.complete) {
    std::cout << fmt::format("sweep interrupted after {} new points; rerun to resume\n", result.computed);
    return kExitOk;
  }
  RunManifest run = make_run("sweep", c, nullptr);
  run.dataset.clear();
  run.hyperparameters = to_json(config);
  run.input_hashes["config"] = sha256_file(config_path);
  write_run_sidecar(run, fs::path(c.out) / "summary.json", started, utc_timestamp());

  const auto& a = result.rows[*result.confide_a];
  std::cout << fmt::format("{} grid points ({} computed now)\n", result.rows.size(), result.computed);
  std::cout << fmt::format("best accuracy: {} at {}\n", format_number(a.test_accuracy), a.point.config_id);
  if (result.confide_c) {
    const auto& ce = result.rows[*result.confide_c];
    std::cout << fmt::format("best top correct efficiency: {} at {}\n",
                             format_number(*ce.top_correct_efficiency), ce.point.config_id);
  }
  return kExitOk;
}

int cmd_validate(const Common& c) {
  const auto ds = read_dataset(c.dataset);
  std::cout << fmt::format("ok: {} / {} layer {} ({}), dim {}, {} classes\n", ds.model, ds.task,
                           to_string(ds.layer), to_string(ds.mode), ds.dim, ds.num_classes);
  for (const auto& [name, s] : ds.splits) {
    std::cout << fmt::format("  {:<12} {:>8} rows{}{}\n", name, s.count,
                             s.predicted_labels ? "  predicted_labels" : "", s.logits ? "  logits" : "");
  }
  return kExitOk;
}

int cmd_baseline(const Common& c, const std::string& measure) {
  require_out(c, "<directory>");
  const auto ds = read_dataset(c.dataset);
  const auto mode = parse_calibration_mode(c.mode);
  const auto eps = default_epsilons();
  EvalSummary summary;
  json extra;
  if (measure == "1nn") {
    summary = one_nn_baseline(ds, parse_metric_kind(c.metric), mode, eps);
    extra["metric"] = c.metric;
  } else if (measure == "nm1" || measure == "nm2") {
    const double t = c.temperature.value_or(1.0);
    summary = softmax_baseline(ds, measure == "nm1" ? SoftmaxMeasure::kNm1 : SoftmaxMeasure::kNm2, t, mode, eps);
    extra["temperature"] = t;
    extra["original_accuracy"] = original_accuracy(ds);
  } else {
    throw Error(ErrorKind::kUsage, "unsupported-baseline", fmt::format("unknown baseline '{}'", measure));
  }
  fs::create_directories(c.out);
  json j = to_json(summary, false);
  j["baseline"] = measure;
  j["mode"] = c.mode;
  j["settings"] = extra;
  RunManifest run = make_run("baseline", c, &ds);
  run.hyperparameters = extra;
  j["run"] = to_json(run);
  write_text_file(fs::path(c.out) / "summary.json", j.dump(2) + "\n");
  std::ostringstream curve;
  write_curve_csv(curve, summary.curve);
  write_text_file(fs::path(c.out) / "coverage.csv", curve.str());
  return kExitOk;
}

struct SynthOptions {
  std::size_t dim = 16;
  std::size_t classes = 2;
  double shift = 1.0;
  double sigma = 1.0;
  double minority = 0.5;
  std::size_t n_train = 2000;
  std::size_t n_cal = 1000;
  std::size_t n_test = 2000;
  bool softmax = false;
};

int cmd_synth(const Common& c, const SynthOptions& s) {
  require_out(c, "<directory>");
  BlobSpec spec;
  if (s.classes == 2) {
    spec = two_class_blobs(s.dim, s.shift, s.minority, s.n_train, s.n_cal, s.n_test, c.seed);
  } else {
    // Means on the first `classes` axes.
    if (s.classes > s.dim) throw Error(ErrorKind::kUsage, "invalid-spec", "--classes may not exceed --dim");
    spec.dim = s.dim;
    spec.means.assign(s.classes, std::vector<double>(s.dim, 0.0));
    for (std::size_t k = 0; k < s.classes; ++k) spec.means[k][k] = s.shift;
    spec.n_train = s.n_train;
    spec.n_calibration = s.n_cal;
    spec.n_test = s.n_test;
    spec.seed = c.seed;
  }
  spec.sigma = s.sigma;
  spec.softmax_layer = s.softmax;
  write_dataset(make_gaussian_blobs(spec), c.out);
  return kExitOk;
}

void print_error(const Error& e, bool as_json) {
  if (as_json) {
    json j;
    j["error"] = {{"kind", to_string(e.kind())}, {"code", e.code()}, {"message", e.what()}};
    if (e.file()) j["error"]["file"] = *e.file();
    if (e.offset()) j["error"]["offset"] = *e.offset();
    std::cerr << j.dump() << '\n';
    return;
  }
  std::string where;
  if (e.file()) where = fmt::format(" [{}{}]", *e.file(), e.offset() ? fmt::format(" @ byte {}", *e.offset()) : "");
  std::cerr << fmt::format("confide: error ({}): {}{}\n", e.code(), e.what(), where);
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"confide: conformal prediction over layer-wise embeddings"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common c;
  std::string calibration;
  std::string split = kTestSplit;
  std::string format = "text";
  std::string measure = "nm1";
  std::string sweep_config;
  std::size_t row = 0;
  double gap_threshold = 0.05;
  std::optional<std::size_t> limit;
  SynthOptions synth;

  auto add_dataset = [&](CLI::App* sub) {
    sub->add_option("--dataset", c.dataset, "Dataset directory")->required();
  };
  auto add_engine = [&](CLI::App* sub) {
    sub->add_option("--k", c.k, "Neighbours per query")->check(CLI::PositiveNumber);
    sub->add_option("--metric", c.metric, "Distance metric")->check(CLI::IsMember({"cosine", "mahalanobis"}));
    sub->add_flag("--pca", c.pca, "Reduce with PCA before the kNN search");
    sub->add_option("--variance-threshold", c.variance_threshold, "PCA explained-variance target")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--mode", c.mode, "Calibration partition")->check(CLI::IsMember({"pooled", "classwise"}));
    sub->add_option("--temperature", c.temperature, "Softmax temperature (softmax-layer datasets)");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Seed recorded in the run manifest");
    sub->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--error-json", c.error_json, "Report failures as a JSON object on stderr");
  };

  auto* calibrate = app.add_subcommand("calibrate", "Fit reference pools and score the calibration split");
  add_dataset(calibrate);
  add_engine(calibrate);
  add_common(calibrate);
  calibrate->add_option("--out", c.out, "Calibration artifact (JSON)");

  auto* predict = app.add_subcommand("predict", "Stream one JSON record per row");
  add_dataset(predict);
  add_common(predict);
  predict->add_option("--calibration", calibration, "Artifact from calibrate")->required();
  predict->add_option("--epsilon", c.epsilon, "Significance level")->check(CLI::Range(0.0, 1.0));
  predict->add_option("--split", split, "Split to predict");
  predict->add_option("--out", c.out, "JSON-lines output (default stdout)");

  auto* eval = app.add_subcommand("eval", "Coverage and efficiency curves on the test split");
  add_dataset(eval);
  add_common(eval);
  eval->add_option("--calibration", calibration, "Artifact from calibrate")->required();
  eval->add_option("--gap-threshold", gap_threshold, "Flag classes undercovering by more than this");
  eval->add_option("--out", c.out, "Output directory");

  auto* explain = app.add_subcommand("explain", "Show the neighbour evidence behind one prediction");
  add_dataset(explain);
  add_common(explain);
  explain->add_option("--calibration", calibration, "Artifact from calibrate")->required();
  explain->add_option("--row", row, "Row index within the split")->required();
  explain->add_option("--epsilon", c.epsilon, "Significance level")->check(CLI::Range(0.0, 1.0));
  explain->add_option("--split", split, "Split holding the row");
  explain->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  explain->add_option("--out", c.out, "Output file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Grid search with a resumable row cache");
  add_common(sweep);
  sweep->add_option("--config", sweep_config, "Sweep config (JSON)")->required();
  sweep->add_option("--out", c.out, "Output directory");
  sweep->add_option("--limit", limit, "Stop after this many uncached grid points");

  auto* validate = app.add_subcommand("validate", "Lint a dataset directory");
  add_dataset(validate);
  add_common(validate);

  auto* baseline = app.add_subcommand("baseline", "Softmax (NM1/NM2) or unfiltered 1-NN baselines");
  add_dataset(baseline);
  add_common(baseline);
  baseline->add_option("--measure", measure, "nm1, nm2 or 1nn")->check(CLI::IsMember({"nm1", "nm2", "1nn"}));
  baseline->add_option("--metric", c.metric, "Metric for 1nn")->check(CLI::IsMember({"cosine", "mahalanobis"}));
  baseline->add_option("--mode", c.mode, "Calibration partition")->check(CLI::IsMember({"pooled", "classwise"}));
  baseline->add_option("--temperature", c.temperature, "Softmax temperature");
  baseline->add_option("--out", c.out, "Output directory");

  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded Gaussian-blob dataset");
  add_common(synth_cmd);
  synth_cmd->add_option("--dim", synth.dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--classes", synth.classes)->check(CLI::Range(2, 1 << 16));
  synth_cmd->add_option("--shift", synth.shift, "Distance of each class mean from the origin");
  synth_cmd->add_option("--sigma", synth.sigma)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--minority", synth.minority, "Weight of class 1 (two-class only)")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--n-train", synth.n_train);
  synth_cmd->add_option("--n-cal", synth.n_cal);
  synth_cmd->add_option("--n-test", synth.n_test);
  synth_cmd->add_flag("--softmax", synth.softmax, "Store logits as a softmax-layer dataset");
  synth_cmd->add_option("--out", c.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    set_worker_count(c.jobs);
    if (*calibrate) return cmd_calibrate(c);
    if (*predict) return cmd_predict(c, calibration, split);
    if (*eval) return cmd_eval(c, calibration, gap_threshold);
    if (*explain) return cmd_explain(c, calibration, row, split, format);
    if (*sweep) return cmd_sweep(c, sweep_config, limit);
    if (*validate) return cmd_validate(c);
    if (*baseline) return cmd_baseline(c, measure);
    if (*synth_cmd) return cmd_synth(c, synth);
  } catch (const Error& e) {
    print_error(e, c.error_json);
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    print_error(Error(ErrorKind::kIo, "io-error", e.what(), e.path1().string()), c.error_json);
    return kExitIo;
  } catch (const std::exception& e) {
    print_error(Error(ErrorKind::kPrecondition, "internal", e.what()), c.error_json);
    return kExitPrecondition;
  }
  return kExitUsage;
}
