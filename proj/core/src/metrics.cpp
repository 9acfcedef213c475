#include "themes/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "themes/errors.hpp"

namespace themes::metrics {

Confusion confusion(std::span<const int> truth, std::span<const double> prob, double threshold) {
  if (truth.size() != prob.size()) throw ArgumentError("labels and predictions differ in length");
  if (truth.empty()) throw ArgumentError("no predictions");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0 && truth[i] != 1) throw ArgumentError("classification metrics need binary actions");
    const bool pred = prob[i] >= threshold;
    if (truth[i] == 1) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

ClassificationMetrics from_confusion(const Confusion& c) {
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  ClassificationMetrics m;
  const double total = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
  m.accuracy = ratio(static_cast<double>(c.tp + c.tn), total);
  m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.f1 = ratio(2.0 * static_cast<double>(c.tp), static_cast<double>(2 * c.tp + c.fp + c.fn));
  m.jaccard = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp + c.fn));
  return m;
}

std::optional<double> auc(std::span<const int> truth, std::span<const double> scores) {
  if (truth.size() != scores.size()) throw ArgumentError("labels and scores differ in length");
  const auto n = truth.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (truth[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClassificationMetrics classification_metrics(std::span<const int> truth, std::span<const double> prob, double threshold) {
  auto m = from_confusion(confusion(truth, prob, threshold));
  m.auc = auc(truth, prob);
  return m;
}

namespace {

std::map<std::pair<int, int>, long> contingency(std::span<const int> a, std::span<const int> b) {
  std::map<std::pair<int, int>, long> table;
  for (std::size_t i = 0; i < a.size(); ++i) ++table[{a[i], b[i]}];
  return table;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ArgumentError("label sequences differ in length");
  if (truth.empty()) throw ArgumentError("no labels");
  const auto table = contingency(truth, pred);
  std::map<int, long> rows, cols;
  double sum_ij = 0.0;
  for (const auto& [key, n] : table) {
    rows[key.first] += n;
    cols[key.second] += n;
    sum_ij += choose2(static_cast<double>(n));
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, n] : rows) sum_a += choose2(static_cast<double>(n));
  for (const auto& [k, n] : cols) sum_b += choose2(static_cast<double>(n));
  const double total = choose2(static_cast<double>(truth.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (sum_ij - expected) / (max_index - expected);
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const auto n = cost.size();
  if (n == 0) return {};
  const auto m = cost.front().size();
  if (m < n) throw ArgumentError("hungarian needs rows <= columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const auto i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const auto j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

std::vector<int> align_labels(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ArgumentError("label sequences differ in length");
  int kt = 0, kp = 0;
  for (int v : truth) kt = std::max(kt, v + 1);
  for (int v : pred) kp = std::max(kp, v + 1);
  const int n = std::max(kt, kp);
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) cost[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])] -= 1.0;
  auto assign = hungarian(cost);
  assign.resize(static_cast<std::size_t>(kp));
  return assign;
}

SegmentationMetrics segmentation_metrics(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ArgumentError("label sequences differ in length");
  SegmentationMetrics out;
  out.adjusted_rand = adjusted_rand_index(truth, pred);
  const auto map = align_labels(truth, pred);
  int kt = 0;
  for (int v : truth) kt = std::max(kt, v + 1);
  double f1_sum = 0.0;
  for (int c = 0; c < kt; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = map[static_cast<std::size_t>(pred[i])] == c;
      const bool t = truth[i] == c;
      if (p && t) ++tp;
      else if (p) ++fp;
      else if (t) ++fn;
    }
    const double den = static_cast<double>(2 * tp + fp + fn);
    f1_sum += den > 0.0 ? 2.0 * static_cast<double>(tp) / den : 0.0;
  }
  out.aligned_macro_f1 = kt > 0 ? f1_sum / kt : 0.0;
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string format_mean_std(const Summary& s) {
  auto trim = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string out = buf;
    if (out.rfind("0.", 0) == 0) out.erase(0, 1);
    else if (out.rfind("-0.", 0) == 0) out.erase(1, 1);
    return out;
  };
  return trim(s.mean) + "(" + trim(s.stddev) + ")";
}

}  // namespace themes::metrics
