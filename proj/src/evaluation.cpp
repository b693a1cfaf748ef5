#include "confide/evaluation.hpp"

#include <ostream>

#include <fmt/core.h>

#include "confide/error.hpp"

namespace confide {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string optional_csv(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

}  // namespace

std::vector<double> default_epsilons() {
  std::vector<double> eps;
  eps.reserve(99);
  for (int i = 1; i <= 99; ++i) eps.push_back(i / 100.0);
  return eps;
}

std::string format_number(double value) { return fmt::format("{}", value); }

EvalSummary evaluate(std::span<const PredictionReport> reports,
                     std::span<const std::uint32_t> true_labels, std::span<const double> epsilons) {
  if (reports.size() != true_labels.size()) {
    throw Error(ErrorKind::kUsage, "dimension-mismatch",
                fmt::format("{} reports but {} labels", reports.size(), true_labels.size()));
  }
  if (reports.empty()) {
    throw Error(ErrorKind::kPrecondition, "no-test-rows", "nothing to evaluate: no test rows");
  }
  const std::size_t n = reports.size();
  const std::size_t num_classes = reports.front().p_values.size();
  const std::size_t ne = epsilons.size();

  EvalSummary s;
  s.num_rows = n;
  s.num_classes = num_classes;
  auto& curve = s.curve;
  curve.num_rows = n;
  curve.epsilons.assign(epsilons.begin(), epsilons.end());
  curve.covered_count.assign(ne, 0);
  curve.classwise_covered_count.assign(num_classes, std::vector<std::size_t>(ne, 0));
  curve.class_support.assign(num_classes, 0);
  std::vector<std::size_t> total_size(ne, 0);
  std::vector<std::size_t> covered_size(ne, 0);

  std::vector<std::size_t> correct(num_classes, 0);
  std::vector<double> cred_sum(num_classes, 0.0);
  std::vector<double> conf_sum(num_classes, 0.0);
  std::size_t correct_total = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    const std::uint32_t y = true_labels[i];
    if (r.p_values.size() != num_classes || y >= num_classes) {
      throw Error(ErrorKind::kUsage, "dimension-mismatch",
                  fmt::format("report {} does not match {} classes", i, num_classes));
    }
    ++curve.class_support[y];
    if (r.point_prediction == y) {
      ++correct[y];
      ++correct_total;
    }
    cred_sum[y] += r.credibility;
    conf_sum[y] += r.confidence;
    for (std::size_t e = 0; e < ne; ++e) {
      const std::size_t size = r.set_size(epsilons[e]);
      total_size[e] += size;
      if (r.covers(y, epsilons[e])) {
        ++curve.covered_count[e];
        ++curve.classwise_covered_count[y][e];
        covered_size[e] += size;
      }
    }
  }

  const double nd = static_cast<double>(n);
  curve.coverage.resize(ne);
  curve.mean_set_size.resize(ne);
  curve.correct_efficiency.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    curve.coverage[e] = static_cast<double>(curve.covered_count[e]) / nd;
    curve.mean_set_size[e] = static_cast<double>(total_size[e]) / nd;
    if (curve.covered_count[e] > 0) {
      curve.correct_efficiency[e] =
          1.0 - static_cast<double>(covered_size[e]) /
                    (static_cast<double>(curve.covered_count[e]) * static_cast<double>(num_classes));
    }
  }
  curve.classwise_coverage.assign(num_classes, std::vector<std::optional<double>>(ne));
  s.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t support = curve.class_support[c];
    s.per_class[c].support = support;
    if (support == 0) continue;
    const double sd = static_cast<double>(support);
    for (std::size_t e = 0; e < ne; ++e) {
      curve.classwise_coverage[c][e] = static_cast<double>(curve.classwise_covered_count[c][e]) / sd;
    }
    s.per_class[c].accuracy = static_cast<double>(correct[c]) / sd;
    s.per_class[c].mean_credibility = cred_sum[c] / sd;
    s.per_class[c].mean_confidence = conf_sum[c] / sd;
  }

  s.test_accuracy = static_cast<double>(correct_total) / nd;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ceff = curve.correct_efficiency[e];
    if (ceff && (!s.top_correct_efficiency || *ceff > *s.top_correct_efficiency)) {
      s.top_correct_efficiency = *ceff;
      s.top_correct_efficiency_epsilon = epsilons[e];
    }
  }
  return s;
}

std::vector<CoverageGap> coverage_gap_report(const CoverageCurve& curve, double threshold) {
  std::vector<CoverageGap> gaps(curve.classwise_coverage.size());
  for (std::size_t c = 0; c < gaps.size(); ++c) {
    auto& g = gaps[c];
    g.label = static_cast<std::uint32_t>(c);
    g.has_support = c < curve.class_support.size() && curve.class_support[c] > 0;
    if (!g.has_support) continue;
    bool first = true;
    for (std::size_t e = 0; e < curve.epsilons.size(); ++e) {
      const double eps = curve.epsilons[e];
      const double gap = (1.0 - eps) - *curve.classwise_coverage[c][e];
      if (first || gap > g.max_undercoverage) {
        g.max_undercoverage = gap;
        g.epsilon_at_max = eps;
        first = false;
      }
      if (gap > 0.0) {
        if (!g.below_from) g.below_from = eps;
        g.below_to = eps;
      }
    }
    g.flagged = g.max_undercoverage > threshold;
  }
  return gaps;
}

void write_curve_csv(std::ostream& out, const CoverageCurve& curve) {
  out << "epsilon,coverage";
  for (std::size_t c = 0; c < curve.classwise_coverage.size(); ++c) out << ",coverage_class_" << c;
  out << ",mean_set_size,correct_efficiency\n";
  for (std::size_t e = 0; e < curve.epsilons.size(); ++e) {
    out << format_number(curve.epsilons[e]) << ',' << format_number(curve.coverage[e]);
    for (const auto& cls : curve.classwise_coverage) out << ',' << optional_csv(cls[e]);
    out << ',' << format_number(curve.mean_set_size[e]) << ','
        << optional_csv(curve.correct_efficiency[e]) << '\n';
  }
}

void write_gap_csv(std::ostream& out, std::span<const CoverageGap> gaps) {
  out << "class,support,max_undercoverage,epsilon_at_max,below_from,below_to,flagged\n";
  for (const auto& g : gaps) {
    if (!g.has_support) {
      out << g.label << ",no support,NA,NA,NA,NA,NA\n";
      continue;
    }
    out << g.label << ",yes," << format_number(g.max_undercoverage) << ','
        << optional_csv(g.epsilon_at_max) << ',' << optional_csv(g.below_from) << ','
        << optional_csv(g.below_to) << ',' << (g.flagged ? "true" : "false") << '\n';
  }
}

nlohmann::json to_json(const EvalSummary& s, bool include_curve) {
  nlohmann::json j;
  j["num_rows"] = s.num_rows;
  j["num_classes"] = s.num_classes;
  j["test_accuracy"] = s.test_accuracy;
  j["top_correct_efficiency"] = optional_json(s.top_correct_efficiency);
  j["top_correct_efficiency_epsilon"] = optional_json(s.top_correct_efficiency_epsilon);
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto& pc = s.per_class[c];
    classes.push_back({{"class", c},
                       {"support", pc.support},
                       {"accuracy", optional_json(pc.accuracy)},
                       {"mean_credibility", optional_json(pc.mean_credibility)},
                       {"mean_confidence", optional_json(pc.mean_confidence)}});
  }
  j["per_class"] = std::move(classes);
  nlohmann::json coverage = nlohmann::json::object();
  for (std::size_t e = 0; e < s.curve.epsilons.size(); ++e) {
    coverage[format_number(s.curve.epsilons[e])] = s.curve.coverage[e];
  }
  j["coverage"] = std::move(coverage);
  if (include_curve) {
    nlohmann::json ceff = nlohmann::json::array();
    for (const auto& v : s.curve.correct_efficiency) ceff.push_back(optional_json(v));
    j["correct_efficiency"] = std::move(ceff);
    j["mean_set_size"] = s.curve.mean_set_size;
    j["epsilons"] = s.curve.epsilons;
  }
  return j;
}

nlohmann::json to_json(std::span<const CoverageGap> gaps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : gaps) {
    nlohmann::json j;
    j["class"] = g.label;
    if (!g.has_support) {
      j["support"] = "no support";
    } else {
      j["max_undercoverage"] = g.max_undercoverage;
      j["epsilon_at_max"] = optional_json(g.epsilon_at_max);
      j["below_from"] = optional_json(g.below_from);
      j["below_to"] = optional_json(g.below_to);
      j["flagged"] = g.flagged;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace confide
