#include "themes/trajdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "themes/errors.hpp"
#include "themes/random.hpp"

namespace themes {

namespace {

struct Row {
  std::string traj;
  double t = 0.0;
  std::vector<double> x;
  int a = 0;
  std::size_t line = 0;
};

Dataset assemble(std::vector<Row> rows, std::vector<std::string> feature_names, int action_count) {
  if (rows.empty()) throw ValidationError("dataset is empty");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> groups;
  const std::size_t m = rows.front().x.size();
  int max_action = 0;
  for (auto& r : rows) {
    if (r.x.size() != m)
      throw ValidationError("ragged state dimension at line " + std::to_string(r.line) + ": expected " +
                            std::to_string(m) + ", got " + std::to_string(r.x.size()));
    if (r.a < 0) throw ValidationError("negative action at line " + std::to_string(r.line));
    max_action = std::max(max_action, r.a);
    auto [it, inserted] = groups.try_emplace(r.traj);
    if (inserted) order.push_back(r.traj);
    it->second.push_back(std::move(r));
  }
  if (m == 0) throw ValidationError("state vectors are empty");

  Dataset d;
  d.action_count = action_count > 0 ? action_count : std::max(2, max_action + 1);
  if (max_action >= d.action_count)
    throw ValidationError("action id " + std::to_string(max_action) + " exceeds action count " +
                          std::to_string(d.action_count));
  if (feature_names.empty())
    for (std::size_t j = 0; j < m; ++j) feature_names.push_back("x" + std::to_string(j));
  d.feature_names = std::move(feature_names);

  for (const auto& id : order) {
    auto& g = groups[id];
    std::stable_sort(g.begin(), g.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    Trajectory tr;
    tr.id = id;
    tr.states.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) tr.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[i].x[j];
      tr.actions.push_back(g[i].a);
      tr.timestamps.push_back(g[i].t);
    }
    validate(tr);
    d.trajectories.push_back(std::move(tr));
  }
  return d;
}

double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("cannot parse number '" + std::string(s) + "'", line);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void validate(const Trajectory& traj) {
  const auto n = traj.actions.size();
  if (n == 0) throw ValidationError("trajectory '" + traj.id + "' is empty");
  if (static_cast<std::size_t>(traj.states.rows()) != n || traj.timestamps.size() != n)
    throw ValidationError("trajectory '" + traj.id + "' has misaligned states/actions/timestamps");
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(traj.timestamps[t]) || traj.timestamps[t] < 0.0)
      throw ValidationError("trajectory '" + traj.id + "' has an invalid timestamp");
    if (t > 0 && !(traj.timestamps[t] > traj.timestamps[t - 1]))
      throw ValidationError("non-increasing timestamps in trajectory '" + traj.id + "'");
  }
  if (!traj.states.allFinite()) throw ValidationError("trajectory '" + traj.id + "' has non-finite states");
}

void validate(const Dataset& dataset) {
  if (dataset.trajectories.empty()) throw ValidationError("dataset is empty");
  const auto m = dataset.dim();
  for (const auto& tr : dataset.trajectories) {
    validate(tr);
    if (tr.dim() != m) throw ValidationError("ragged state dimension in trajectory '" + tr.id + "'");
    for (int a : tr.actions)
      if (a < 0 || a >= dataset.action_count)
        throw ValidationError("action out of range in trajectory '" + tr.id + "'");
  }
}

std::size_t Dataset::total_steps() const noexcept {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

Matrix stack_window_matrix(const Trajectory& traj, int window) {
  if (window < 1) throw ArgumentError("window size must be >= 1");
  const auto T = traj.states.rows();
  const auto m = traj.states.cols();
  Matrix out(T, m * window);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < window; ++j) {
      const Eigen::Index src = std::max<Eigen::Index>(0, t - (window - 1) + j);
      out.block(t, j * m, 1, m) = traj.states.row(src);
    }
  }
  return out;
}

std::vector<StackedWindow> stack_windows(const Trajectory& traj, int window) {
  const Matrix rows = stack_window_matrix(traj, window);
  std::vector<StackedWindow> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index t = 0; t < rows.rows(); ++t)
    out.push_back({rows.row(t).transpose(), traj.id, static_cast<std::size_t>(t), t < window - 1});
  return out;
}

DataFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DataFormat::kCsv;
  return DataFormat::kJsonl;
}

Dataset parse_jsonl(std::istream& in, int action_count) {
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    try {
      Row r;
      r.traj = j.at("traj").get<std::string>();
      r.t = j.at("t").get<double>();
      r.x = j.at("x").get<std::vector<double>>();
      r.a = j.at("a").get<int>();
      r.line = lineno;
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("missing or mistyped field: ") + e.what(), lineno);
    }
  }
  return assemble(std::move(rows), {}, action_count);
}

Dataset parse_csv(std::istream& in, int action_count) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing header", 1);
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header.front() != "traj" || header[1] != "t" || header.back() != "a")
    throw FormatError("header must be traj,t,x0..x{m-1},a", 1);
  std::vector<std::string> features(header.begin() + 2, header.end() - 1);

  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()),
                        lineno);
    Row r;
    r.traj = cells[0];
    r.t = parse_double(cells[1], lineno);
    for (std::size_t j = 2; j + 1 < cells.size(); ++j) r.x.push_back(parse_double(cells[j], lineno));
    const double a = parse_double(cells.back(), lineno);
    if (a != std::floor(a)) throw FormatError("action must be an integer", lineno);
    r.a = static_cast<int>(a);
    r.line = lineno;
    rows.push_back(std::move(r));
  }
  return assemble(std::move(rows), std::move(features), action_count);
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format, int action_count) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
  return format == DataFormat::kCsv ? parse_csv(in, action_count) : parse_jsonl(in, action_count);
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  for (const auto& tr : dataset.trajectories) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      buf.str("");
      buf << "{\"traj\":" << nlohmann::json(tr.id).dump() << ",\"t\":" << tr.timestamps[t] << ",\"x\":[";
      for (Eigen::Index j = 0; j < tr.dim(); ++j) {
        if (j) buf << ',';
        buf << tr.states(static_cast<Eigen::Index>(t), j);
      }
      buf << "],\"a\":" << tr.actions[t] << "}\n";
      out << buf.str();
    }
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset '" + path.string() + "'");
  write_jsonl(dataset, out);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  const auto n = dataset.size();
  if (n < 2) throw ArgumentError("split requires at least 2 trajectories");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test_fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {0x5b1u}));
  rng.shuffle(idx);
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;

  Dataset train{{}, dataset.feature_names, dataset.action_count};
  Dataset test{{}, dataset.feature_names, dataset.action_count};
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).trajectories.push_back(dataset.trajectories[i]);
  return {std::move(train), std::move(test)};
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace themes
