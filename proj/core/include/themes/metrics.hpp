#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace themes::metrics {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when only one class is present
  double jaccard = 0.0;       // positive class = action 1
};

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(std::span<const int> truth, std::span<const double> positive_prob, double threshold = 0.5);

ClassificationMetrics classification_metrics(std::span<const int> truth, std::span<const double> positive_prob,
                                             double threshold = 0.5);

ClassificationMetrics from_confusion(const Confusion& c);

// Rank-statistic AUC, tied scores share their average rank.
std::optional<double> auc(std::span<const int> truth, std::span<const double> scores);

struct SegmentationMetrics {
  double adjusted_rand = 0.0;
  double aligned_macro_f1 = 0.0;
};

SegmentationMetrics segmentation_metrics(std::span<const int> truth, std::span<const int> predicted);

double adjusted_rand_index(std::span<const int> truth, std::span<const int> predicted);

// Minimum-cost assignment of rows to columns (rows <= cols); returns the
// column per row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

// Predicted label -> true label mapping maximizing matched counts.
std::vector<int> align_labels(std::span<const int> truth, std::span<const int> predicted);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

// "x.xxx(.xxx)" with leading zeros dropped, as in the usual results tables.
std::string format_mean_std(const Summary& s);

}  // namespace themes::metrics
