#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "themes/pipeline.hpp"
#include "themes/synthgen.hpp"

namespace themes::io {

inline constexpr int kSchemaVersion = 1;

// Policy JSON: layer shapes with row-major weight arrays.
std::string policy_to_json(const edm::PolicyNet& net);
edm::PolicyNet policy_from_json(const std::string& text);

// The whole fitted model as one JSON document. Output is a pure function of
// the model, so equal models serialize to identical bytes.
std::string model_to_json(const ThemesModel& model);
ThemesModel model_from_json(const std::string& text);

void save_model(const ThemesModel& model, const std::filesystem::path& dir);  // dir/model.json
ThemesModel load_model(const std::filesystem::path& dir);

struct LabeledTruth {
  std::vector<std::string> trajectory_ids;
  synthgen::GroundTruth truth;

  // Regime labels of the named trajectories, concatenated in the given order.
  [[nodiscard]] std::vector<int> regime_labels_for(const Dataset& data) const;
};

std::string ground_truth_to_json(const synthgen::GroundTruth& truth, const Dataset& data,
                                 const synthgen::GeneratorConfig& config);
LabeledTruth ground_truth_from_json(const std::string& text);

// One line per timestep: {"traj", "t", "label", "p": [...]}.
std::string predictions_to_jsonl(const Prediction& pred, const Dataset& data);

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temporary file, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace themes::io
