#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace themes {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One demonstration: per-timestep state, discrete action and timestamp (hours).
// States are stored row-wise (T x m).
struct Trajectory {
  std::string id;
  Matrix states;
  std::vector<int> actions;
  std::vector<double> timestamps;

  [[nodiscard]] std::size_t length() const noexcept { return actions.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return states.cols(); }

  // Gap to the previous timestamp; undefined for t == 0.
  [[nodiscard]] double gap(std::size_t t) const { return timestamps[t] - timestamps[t - 1]; }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.id == b.id && a.states.rows() == b.states.rows() && a.states.cols() == b.states.cols() &&
           a.states == b.states && a.actions == b.actions && a.timestamps == b.timestamps;
  }
};

// Throws ValidationError if the trajectory violates its invariants.
void validate(const Trajectory& traj);

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::vector<std::string> feature_names;
  int action_count = 0;

  [[nodiscard]] std::size_t size() const noexcept { return trajectories.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept {
    return trajectories.empty() ? 0 : trajectories.front().dim();
  }
  [[nodiscard]] std::size_t total_steps() const noexcept;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

void validate(const Dataset& dataset);

struct StackedWindow {
  Vector vector;  // [x_{t-w+1}; ...; x_t], oldest first
  std::string trajectory_id;
  std::size_t end_index = 0;
  bool padded = false;
};

// One window per timestep; windows before the first full window repeat the
// first state as left padding and are flagged.
std::vector<StackedWindow> stack_windows(const Trajectory& traj, int window);

// Same windows as rows of a T x (m*window) matrix.
Matrix stack_window_matrix(const Trajectory& traj, int window);

enum class DataFormat { kJsonl, kCsv };

DataFormat format_from_path(const std::filesystem::path& path);

// Rows are grouped by trajectory id (in order of first appearance) and sorted
// by timestamp. action_count of 0 means "infer": max(2, max action + 1).
Dataset load_dataset(const std::filesystem::path& path, DataFormat format, int action_count = 0);
Dataset parse_jsonl(std::istream& in, int action_count = 0);
Dataset parse_csv(std::istream& in, int action_count = 0);

// Canonical JSONL, 17 significant digits so doubles round-trip exactly.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void write_jsonl(const Dataset& dataset, std::ostream& out);

// Splits by whole trajectory. The test side gets round(N * test_fraction)
// trajectories, clamped to [1, N-1].
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// FNV-1a over the raw bytes of a file, as 16 hex digits.
std::string hash_file(const std::filesystem::path& path);

}  // namespace themes
