#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "themes/metrics.hpp"

namespace themes::metrics {

// Metrics of one method on one evaluation run.
struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  ClassificationMetrics classification;
  std::optional<SegmentationMetrics> segmentation;
};

struct MetricSummary {
  std::string name;
  std::optional<Summary> summary;  // absent when no run defines the metric
};

struct EvalReport {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricSummary> metrics;  // in metric_names() order

  [[nodiscard]] std::optional<Summary> get(const std::string& name) const;
};

const std::vector<std::string>& metric_names();

// Value of a named metric in one run; absent for undefined AUC or missing
// segmentation.
std::optional<double> metric_value(const RunRecord& run, const std::string& name);

// Groups runs by method, in order of first appearance.
std::vector<EvalReport> aggregate(const std::vector<RunRecord>& runs);

std::string run_record_to_json(const RunRecord& run);
RunRecord run_record_from_json(const std::string& text);

// One row per method, cells "x.xxx(.xxx)".
std::string report_csv(const std::vector<EvalReport>& reports);
// Summaries plus every raw run.
std::string report_json(const std::vector<EvalReport>& reports, const std::vector<RunRecord>& runs);
// Grouped bar chart of the classification metric means.
std::string report_svg(const std::vector<EvalReport>& reports);

}  // namespace themes::metrics
