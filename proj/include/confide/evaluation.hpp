#pragma once

// Coverage, efficiency and correct efficiency over a grid of significance
// levels, marginally and per true class.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "confide/conformal.hpp"

namespace confide {

/// 0.01, 0.02, ..., 0.99.
std::vector<double> default_epsilons();

struct CoverageCurve {
  std::vector<double> epsilons;
  std::vector<double> coverage;
  // [class][epsilon]; nullopt when the class has no test rows.
  std::vector<std::vector<std::optional<double>>> classwise_coverage;
  std::vector<double> mean_set_size;
  // Missing where no prediction set covers the truth.
  std::vector<std::optional<double>> correct_efficiency;
  // Raw counts behind the fractions.
  std::vector<std::size_t> covered_count;
  std::vector<std::vector<std::size_t>> classwise_covered_count;
  std::vector<std::size_t> class_support;
  std::size_t num_rows = 0;
};

struct ClassStats {
  std::size_t support = 0;
  std::optional<double> accuracy;
  std::optional<double> mean_credibility;
  std::optional<double> mean_confidence;
};

struct EvalSummary {
  std::size_t num_rows = 0;
  std::size_t num_classes = 0;
  double test_accuracy = 0.0;
  // Max of correct efficiency over the grid and the epsilon where it occurs.
  std::optional<double> top_correct_efficiency;
  std::optional<double> top_correct_efficiency_epsilon;
  CoverageCurve curve;
  std::vector<ClassStats> per_class;
};

EvalSummary evaluate(std::span<const PredictionReport> reports,
                     std::span<const std::uint32_t> true_labels, std::span<const double> epsilons);

struct CoverageGap {
  std::uint32_t label = 0;
  bool has_support = false;
  double max_undercoverage = 0.0;  // max over eps of (1 − eps) − coverage_c(eps)
  std::optional<double> epsilon_at_max;
  // Smallest and largest eps where coverage_c(eps) < 1 − eps.
  std::optional<double> below_from;
  std::optional<double> below_to;
  bool flagged = false;
};

/// Per-class undercoverage diagnostics; classes whose maximal gap exceeds
/// `threshold` are flagged.
std::vector<CoverageGap> coverage_gap_report(const CoverageCurve& curve, double threshold = 0.05);

/// CSV columns: epsilon, coverage, coverage_class_<c>..., mean_set_size,
/// correct_efficiency. Missing values are written as "NA".
void write_curve_csv(std::ostream& out, const CoverageCurve& curve);
void write_gap_csv(std::ostream& out, std::span<const CoverageGap> gaps);

nlohmann::json to_json(const EvalSummary& summary, bool include_curve = false);
nlohmann::json to_json(std::span<const CoverageGap> gaps);

/// Shortest decimal text that round-trips the double.
std::string format_number(double value);

}  // namespace confide
