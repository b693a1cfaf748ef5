#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "confide/dataset.hpp"
#include "confide/synthetic.hpp"
#include "temp_dir.hpp"

using namespace confide;
using nlohmann::json;
using testing_support::read_file;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = CONFIDE_CLI_PATH;
const fs::path kFixture = CONFIDE_FIXTURE_DIR;

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = kCli.string() + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

json error_of(const Run& r) {
  const auto start = r.err.find("{\"error\"");
  if (start == std::string::npos) return json::object();
  const auto end = r.err.find('\n', start);
  return json::parse(r.err.substr(start, end - start))["error"];
}

fs::path copy_fixture(const TempDir& dir, const std::string& name = "data") {
  const auto dst = dir / name;
  fs::copy(kFixture, dst, fs::copy_options::recursive);
  return dst;
}

fs::path calibrate(const TempDir& dir, const fs::path& data, const std::string& extra = "") {
  const auto art = dir / "cal.json";
  const auto r = run_cli(dir, "calibrate --dataset " + q(data) + " --k 10 --out " + q(art) + " " + extra);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  return art;
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

void keep_rows(Split& s, std::size_t dim, std::size_t nc, auto keep) {
  Split out;
  if (s.predicted_labels) out.predicted_labels.emplace();
  if (s.logits) out.logits.emplace();
  if (s.row_ids) out.row_ids.emplace();
  for (std::size_t i = 0; i < s.count; ++i) {
    if (!keep(s.labels[i])) continue;
    out.embeddings.insert(out.embeddings.end(), s.embeddings.begin() + i * dim, s.embeddings.begin() + (i + 1) * dim);
    out.labels.push_back(s.labels[i]);
    if (s.predicted_labels) out.predicted_labels->push_back((*s.predicted_labels)[i]);
    if (s.logits) out.logits->insert(out.logits->end(), s.logits->begin() + i * nc, s.logits->begin() + (i + 1) * nc);
    if (s.row_ids) out.row_ids->push_back((*s.row_ids)[i]);
    ++out.count;
  }
  s = std::move(out);
}

}  // namespace

TEST(Cli, ValidateAcceptsFixture) {
  TempDir dir("cli");
  const auto r = run_cli(dir, "validate --dataset " + q(kFixture));
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("ok:", 0), 0u);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST(Cli, ValidateReportsCorruptionWithOffset) {
  TempDir dir("cli");
  const auto data = copy_fixture(dir);
  auto bytes = read_file(data / "test_labels.u32");
  bytes[8] = 9;
  testing_support::write_file(data / "test_labels.u32", bytes);
  const auto r = run_cli(dir, "validate --error-json --dataset " + q(data));
  EXPECT_EQ(r.exit_code, 2);
  const auto e = error_of(r);
  EXPECT_EQ(e["kind"], "input-validation");
  EXPECT_EQ(e["code"], "label-range");
  EXPECT_EQ(e["offset"], 8);
  EXPECT_NE(e["file"].get<std::string>().find("test_labels.u32"), std::string::npos);
}

TEST(Cli, CalibrateWithoutPredictedLabelsNamesTheFile) {
  TempDir dir("cli");
  const auto data = copy_fixture(dir);
  auto m = json::parse(read_file(data / "manifest.json"));
  m["splits"]["train"].erase("predicted_labels_file");
  testing_support::write_file(data / "manifest.json", m.dump(2));
  const auto r = run_cli(dir, "calibrate --error-json --dataset " + q(data) + " --out " + q(dir / "c.json"));
  EXPECT_EQ(r.exit_code, 2) << r.err;
  const auto e = error_of(r);
  EXPECT_EQ(e["code"], "missing-field");
  EXPECT_NE(e["file"].get<std::string>().find("manifest.json"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "c.json"));
}

TEST(Cli, ClasswiseCalibrationListsMissingClasses) {
  TempDir dir("cli");
  auto spec = two_class_blobs(4, 2.0, 0.5, 90, 60, 30, 5);
  spec.means.push_back({0.0, 2.0, 0.0, 0.0});
  spec.class_weights.clear();
  auto ds = make_gaussian_blobs(spec);
  keep_rows(ds.splits[kCalibrationSplit], ds.dim, ds.num_classes, [](std::uint32_t y) { return y != 2; });
  const auto data = dir / "three";
  fs::create_directories(data);
  write_dataset(ds, data);
  const auto r = run_cli(dir, "calibrate --error-json --mode classwise --dataset " + q(data) + " --out " + q(dir / "c.json"));
  EXPECT_EQ(r.exit_code, 3);
  const auto e = error_of(r);
  EXPECT_EQ(e["code"], "missing-class");
  EXPECT_NE(e["message"].get<std::string>().find('2'), std::string::npos);
  EXPECT_EQ(run_cli(dir, "calibrate --mode pooled --dataset " + q(data) + " --out " + q(dir / "c.json")).exit_code, 0);
}

TEST(Cli, PredictAtZeroEpsilonReturnsEveryLabel) {
  TempDir dir("cli");
  const auto art = calibrate(dir, kFixture);
  const auto r = run_cli(dir, "predict --dataset " + q(kFixture) + " --calibration " + q(art) + " --epsilon 0");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rows = json_lines(r.out);
  ASSERT_EQ(rows.size(), 300u);
  for (const auto& row : rows) {
    EXPECT_EQ(row["prediction_set"], json({0, 1}));
    EXPECT_GE(row["credibility"].get<double>(), 1.0 - row["confidence"].get<double>());
  }
  EXPECT_EQ(rows[3]["row"], 3);
  EXPECT_TRUE(rows[0].contains("row_id"));
}

TEST(Cli, PredictSupportsOtherSplitsAndFiles) {
  TempDir dir("cli");
  const auto art = calibrate(dir, kFixture);
  const auto r = run_cli(dir, "predict --dataset " + q(kFixture) + " --calibration " + q(art) +
                                  " --split calibration --epsilon 0.2 --out " + q(dir / "p.jsonl"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(json_lines(read_file(dir / "p.jsonl")).size(), 200u);
  EXPECT_TRUE(fs::exists(dir / "p.jsonl.run.json"));
}

TEST(Cli, ChangedCalibrationInputsAreStale) {
  TempDir dir("cli");
  const auto data = copy_fixture(dir);
  const auto art = calibrate(dir, data);

  // Test rows may change freely.
  auto bytes = read_file(data / "test_embeddings.f32");
  bytes[0] ^= 1;
  testing_support::write_file(data / "test_embeddings.f32", bytes);
  EXPECT_EQ(run_cli(dir, "predict --dataset " + q(data) + " --calibration " + q(art)).exit_code, 0);

  bytes = read_file(data / "calibration_embeddings.f32");
  bytes[0] ^= 1;
  testing_support::write_file(data / "calibration_embeddings.f32", bytes);
  const auto r = run_cli(dir, "predict --error-json --dataset " + q(data) + " --calibration " + q(art));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(error_of(r)["code"], "stale-calibration");
}

TEST(Cli, EvalOnFixtureMeetsCoverage) {
  TempDir dir("cli");
  const auto art = calibrate(dir, kFixture);
  const auto out = dir / "eval";
  const auto r = run_cli(dir, "eval --dataset " + q(kFixture) + " --calibration " + q(art) + " --out " + q(out));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto s = json::parse(read_file(out / "summary.json"));
  EXPECT_GE(s["coverage"]["0.1"].get<double>(), 0.88);
  EXPECT_TRUE(s.contains("coverage_gaps"));
  EXPECT_TRUE(s.contains("run"));
  EXPECT_TRUE(fs::exists(out / "coverage.csv"));
  EXPECT_TRUE(fs::exists(out / "coverage_gaps.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.json.run.json"));
}

TEST(Cli, EvalWithoutTestRows) {
  TempDir dir("cli");
  const auto ds = make_gaussian_blobs(two_class_blobs(4, 2.0, 0.5, 40, 20, 0, 6));
  const auto data = dir / "empty";
  fs::create_directories(data);
  write_dataset(ds, data);
  const auto art = calibrate(dir, data);
  const auto r = run_cli(dir, "eval --error-json --dataset " + q(data) + " --calibration " + q(art) + " --out " + q(dir / "e"));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(error_of(r)["code"], "no-test-rows");
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir dir("cli");
  const auto a = dir / "a.json";
  const auto b = dir / "b.json";
  ASSERT_EQ(run_cli(dir, "calibrate --dataset " + q(kFixture) + " --k 7 --metric mahalanobis --out " + q(a)).exit_code, 0);
  ASSERT_EQ(run_cli(dir, "calibrate --dataset " + q(kFixture) + " --k 7 --metric mahalanobis --jobs 1 --out " + q(b)).exit_code, 0);
  auto strip = [](json j) {
    j["run"]["hyperparameters"].erase("jobs");
    return j;
  };
  EXPECT_EQ(strip(json::parse(read_file(a))), strip(json::parse(read_file(b))));
}

TEST(Cli, ExplainDuplicateOfTrainRowHasFullCredibility) {
  TempDir dir("cli");
  auto ds = read_dataset(kFixture);
  auto& train = ds.splits[kTrainSplit];
  auto& test = ds.splits[kTestSplit];
  std::size_t src = 0;
  while ((*train.predicted_labels)[src] != train.labels[src]) ++src;
  std::copy_n(train.embeddings.begin() + src * ds.dim, ds.dim, test.embeddings.begin());
  test.labels[0] = train.labels[src];
  const auto data = dir / "dup";
  fs::create_directories(data);
  write_dataset(ds, data);
  const auto art = dir / "k1.json";
  ASSERT_EQ(run_cli(dir, "calibrate --k 1 --metric mahalanobis --dataset " + q(data) + " --out " + q(art)).exit_code, 0);
  const auto r = run_cli(dir, "explain --format json --row 0 --dataset " + q(data) + " --calibration " + q(art));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["credibility"], 1.0);
  EXPECT_EQ(j["prediction_set"], json({test.labels[0]}));
  const auto& label = j["labels"][test.labels[0]];
  EXPECT_EQ(label["score"], 0.0);
  EXPECT_EQ(label["supporting"][0]["train_row"], src);
  EXPECT_EQ(label["supporting"][0]["distance"], 0.0);
}

TEST(Cli, ExplainFlagsIndistinguishableNeighborhoods) {
  TempDir dir("cli");
  const auto ds = make_gaussian_blobs(two_class_blobs(8, 0.05, 0.5, 200, 100, 10, 7));
  const auto data = dir / "overlap";
  fs::create_directories(data);
  write_dataset(ds, data);
  const auto art = calibrate(dir, data);
  bool seen = false;
  for (int row = 0; row < 10; ++row) {
    const auto r = run_cli(dir, "explain --format json --row " + std::to_string(row) + " --dataset " + q(data) +
                                    " --calibration " + q(art));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = json::parse(r.out);
    bool any = false;
    for (const auto& l : j["labels"]) {
      const double a = l["same_class_mean"], b = l["other_class_mean"];
      const bool close = std::abs(a - b) / std::max(a, b) < 0.10;
      EXPECT_EQ(l["indistinguishable"].get<bool>(), close);
      any = any || close;
    }
    EXPECT_EQ(j["indistinguishable_neighborhoods"].get<bool>(), any);
    if (any && !seen) {
      seen = true;
      const auto text = run_cli(dir, "explain --row " + std::to_string(row) + " --dataset " + q(data) +
                                         " --calibration " + q(art));
      EXPECT_NE(text.out.find("warning: indistinguishable neighborhoods"), std::string::npos);
    }
  }
  EXPECT_TRUE(seen);
}

TEST(Cli, ExplainWithEmptySet) {
  TempDir dir("cli");
  const auto art = calibrate(dir, kFixture);
  const auto r = run_cli(dir, "explain --row 5 --epsilon 1 --dataset " + q(kFixture) + " --calibration " + q(art));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("no label conforms"), std::string::npos);
  EXPECT_NE(r.out.find("supporting (same class)"), std::string::npos);
  const auto bad = run_cli(dir, "explain --error-json --row 300 --dataset " + q(kFixture) + " --calibration " + q(art));
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_EQ(error_of(bad)["code"], "row-out-of-range");
}

TEST(Cli, BaselinesWriteSummaries) {
  TempDir dir("cli");
  for (const char* m : {"nm1", "nm2", "1nn"}) {
    const auto out = dir / m;
    const auto r = run_cli(dir, std::string("baseline --measure ") + m + " --temperature 10 --dataset " + q(kFixture) +
                                    " --out " + q(out));
    ASSERT_EQ(r.exit_code, 0) << m << r.err;
    const auto s = json::parse(read_file(out / "summary.json"));
    EXPECT_GT(s["test_accuracy"].get<double>(), 0.5) << m;
  }
}

TEST(Cli, SweepFromConfigFile) {
  TempDir dir("cli");
  const json config = {{"datasets", {kFixture.string()}}, {"k_grid", {3, 9}}, {"metrics", {"cosine"}}, {"pca", {false}}};
  testing_support::write_file(dir / "sweep.json", config.dump());
  const auto r = run_cli(dir, "sweep --config " + q(dir / "sweep.json") + " --out " + q(dir / "s"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "s" / "results.csv"));
  EXPECT_EQ(json::parse(read_file(dir / "s" / "summary.json.run.json"))["command"], "sweep");
  EXPECT_EQ(json::parse(read_file(dir / "s" / "summary.json"))["successful_rows"], 2);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli(dir, "").exit_code, 1);
  EXPECT_EQ(run_cli(dir, "calibrate --dataset x --k 0").exit_code, 1);
  EXPECT_EQ(run_cli(dir, "frobnicate").exit_code, 1);
  const auto io = run_cli(dir, "validate --error-json --dataset " + q(dir / "missing"));
  EXPECT_EQ(io.exit_code, 4);
  EXPECT_EQ(error_of(io)["kind"], "io");
  EXPECT_EQ(run_cli(dir, "--help").exit_code, 0);
}

TEST(Cli, SynthWritesAValidDataset) {
  TempDir dir("cli");
  const auto out = dir / "syn";
  ASSERT_EQ(run_cli(dir, "synth --seed 3 --dim 5 --n-train 50 --n-cal 20 --n-test 10 --out " + q(out)).exit_code, 0);
  const auto ds = read_dataset(out);
  EXPECT_EQ(ds.dim, 5u);
  EXPECT_EQ(ds.split(kTestSplit).count, 10u);
  EXPECT_EQ(run_cli(dir, "validate --dataset " + q(out)).exit_code, 0);
}
