#include "themes/report.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "themes/errors.hpp"

namespace themes::metrics {

using nlohmann::json;

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"acc", "rec", "prec", "f1", "auc", "jaccard", "adjusted_rand", "aligned_macro_f1"};
  return names;
}

std::optional<double> metric_value(const RunRecord& r, const std::string& name) {
  const auto& c = r.classification;
  if (name == "acc") return c.accuracy;
  if (name == "rec") return c.recall;
  if (name == "prec") return c.precision;
  if (name == "f1") return c.f1;
  if (name == "auc") return c.auc;
  if (name == "jaccard") return c.jaccard;
  if (name == "adjusted_rand") return r.segmentation ? std::optional(r.segmentation->adjusted_rand) : std::nullopt;
  if (name == "aligned_macro_f1") return r.segmentation ? std::optional(r.segmentation->aligned_macro_f1) : std::nullopt;
  throw ArgumentError("unknown metric " + name);
}

std::optional<Summary> EvalReport::get(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m.summary;
  return std::nullopt;
}

std::vector<EvalReport> aggregate(const std::vector<RunRecord>& runs) {
  std::vector<EvalReport> out;
  std::vector<std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.method == r.method; });
    if (it == out.end()) {
      out.push_back({r.method, {}, {}});
      groups.emplace_back();
      it = out.end() - 1;
    }
    it->seeds.push_back(r.seed);
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& name : metric_names()) {
      std::vector<double> values;
      for (const auto* r : groups[i])
        if (const auto v = metric_value(*r, name)) values.push_back(*v);
      out[i].metrics.push_back({name, values.empty() ? std::nullopt : std::optional(summarize(values))});
    }
  }
  return out;
}

std::string run_record_to_json(const RunRecord& r) {
  json j = {{"kind", "run_metrics"}, {"schema_version", 1}, {"method", r.method}, {"seed", r.seed}};
  for (const auto& name : metric_names()) {
    const auto v = metric_value(r, name);
    j[name] = v ? json(*v) : json(nullptr);
  }
  return j.dump(1) + "\n";
}

RunRecord run_record_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("kind", std::string{}) != "run_metrics") throw FormatError("not a run metrics document", 0);
    RunRecord r;
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    auto& c = r.classification;
    c.accuracy = j.at("acc").get<double>();
    c.recall = j.at("rec").get<double>();
    c.precision = j.at("prec").get<double>();
    c.f1 = j.at("f1").get<double>();
    if (!j.at("auc").is_null()) c.auc = j.at("auc").get<double>();
    c.jaccard = j.at("jaccard").get<double>();
    if (!j.at("adjusted_rand").is_null())
      r.segmentation = SegmentationMetrics{j.at("adjusted_rand").get<double>(), j.at("aligned_macro_f1").get<double>()};
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run metrics: ") + e.what(), 0);
  }
}

std::string report_csv(const std::vector<EvalReport>& reports) {
  std::string out = "method,runs";
  for (const auto& n : metric_names()) out += "," + n;
  out += "\n";
  for (const auto& r : reports) {
    out += r.method + "," + std::to_string(r.seeds.size());
    for (const auto& m : r.metrics) out += "," + (m.summary ? format_mean_std(*m.summary) : std::string{});
    out += "\n";
  }
  return out;
}

std::string report_json(const std::vector<EvalReport>& reports, const std::vector<RunRecord>& runs) {
  json methods = json::array();
  for (const auto& r : reports) {
    json metrics = json::object();
    for (const auto& m : r.metrics)
      metrics[m.name] = m.summary ? json{{"mean", m.summary->mean}, {"std", m.summary->stddev}, {"count", m.summary->count},
                                         {"formatted", format_mean_std(*m.summary)}}
                                  : json(nullptr);
    methods.push_back({{"method", r.method}, {"seeds", r.seeds}, {"metrics", metrics}});
  }
  json raw = json::array();
  for (const auto& r : runs) raw.push_back(json::parse(run_record_to_json(r)));
  json j = {{"kind", "report"}, {"schema_version", 1}, {"methods", methods}, {"runs", raw}};
  return j.dump(1) + "\n";
}

std::string report_svg(const std::vector<EvalReport>& reports) {
  const std::vector<std::string> shown{"acc", "rec", "prec", "f1", "auc", "jaccard"};
  static const char* colors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};
  const double bar = 12.0, gap = 18.0, left = 50.0, top = 20.0, height = 200.0;
  const double group = bar * static_cast<double>(reports.size()) + gap;
  const double width = left + group * static_cast<double>(shown.size()) + 160.0;
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" font-size=\"11\">\n",
                width, top + height + 40.0);
  out += buf;
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = top + height * (1.0 - tick / 4.0);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/><text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                  left, y, width - 160.0, y, left - 4.0, y + 4.0, tick / 4.0);
    out += buf;
  }
  for (std::size_t mi = 0; mi < shown.size(); ++mi) {
    const double x0 = left + gap / 2.0 + group * static_cast<double>(mi);
    for (std::size_t ri = 0; ri < reports.size(); ++ri) {
      const auto s = reports[ri].get(shown[mi]);
      const double v = s ? std::clamp(s->mean, 0.0, 1.0) : 0.0;
      std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\"/>\n",
                    x0 + bar * static_cast<double>(ri), top + height * (1.0 - v), bar - 1.0, height * v, colors[ri % 8]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n",
                  x0 + bar * static_cast<double>(reports.size()) / 2.0, top + height + 16.0, shown[mi].c_str());
    out += buf;
  }
  for (std::size_t ri = 0; ri < reports.size(); ++ri) {
    const double y = top + 14.0 * static_cast<double>(ri);
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>", width - 150.0, y, colors[ri % 8]);
    out += buf;
    out += "<text x=\"" + std::to_string(static_cast<int>(width - 135.0)) + "\" y=\"" + std::to_string(static_cast<int>(y + 9.0)) +
           "\">";
    for (char ch : reports[ri].method) out += ch == '&' ? std::string("&amp;") : std::string(1, ch);
    out += "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace themes::metrics
