#include "themes/serialize.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "themes/errors.hpp"
#include "themes/tglasso.hpp"

namespace themes::io {

using nlohmann::json;

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Matrix mat_from(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != cols) throw FormatError("ragged matrix", 0);
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(i, c));
  return out;
}

Matrix from_row_major(const json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw FormatError("weight array does not match its shape", 0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = v[static_cast<std::size_t>(i * cols + c)];
  return m;
}

void check_schema(const json& j, const std::string& kind) {
  if (!j.is_object() || j.value("kind", std::string{}) != kind) throw FormatError("not a " + kind + " document", 0);
  if (j.value("schema_version", 0) != kSchemaVersion)
    throw FormatError("unsupported " + kind + " schema version", 0);
}

json policy_json(const edm::PolicyNet& net) {
  json layers = json::array();
  layers.push_back({{"shape", {net.w1.rows(), net.w1.cols()}}, {"weights", row_major(net.w1)}, {"bias", vec_json(net.b1)},
                    {"activation", "tanh"}});
  layers.push_back({{"shape", {net.w2.rows(), net.w2.cols()}}, {"weights", row_major(net.w2)}, {"bias", vec_json(net.b2)},
                    {"activation", "softmax"}});
  return {{"kind", "policy"},
          {"schema_version", kSchemaVersion},
          {"input_shift", vec_json(net.input_shift)},
          {"input_scale", vec_json(net.input_scale)},
          {"layers", layers}};
}

edm::PolicyNet policy_from(const json& j) {
  check_schema(j, "policy");
  const auto& layers = j.at("layers");
  if (layers.size() != 2) throw FormatError("policy must have two layers", 0);
  edm::PolicyNet net;
  auto layer = [&](std::size_t i, Matrix& w, Vector& b) {
    const auto shape = layers[i].at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw FormatError("layer shape must have two entries", 0);
    w = from_row_major(layers[i].at("weights"), shape[0], shape[1]);
    b = vec_from(layers[i].at("bias"));
    if (b.size() != shape[0]) throw FormatError("bias does not match layer shape", 0);
  };
  layer(0, net.w1, net.b1);
  layer(1, net.w2, net.b2);
  net.input_shift = vec_from(j.at("input_shift"));
  net.input_scale = vec_from(j.at("input_scale"));
  if (net.w2.cols() != net.w1.rows() || net.input_shift.size() != net.w1.cols() || net.input_scale.size() != net.w1.cols())
    throw FormatError("policy layer shapes are inconsistent", 0);
  return net;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

template <typename F>
auto guarded(F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed document: ") + e.what(), 0);
  }
}

std::string weighting_name(Weighting w) {
  return w == Weighting::kClusterPolicy ? "cluster_policy" : "causal_posterior";
}

}  // namespace

std::string policy_to_json(const edm::PolicyNet& net) { return policy_json(net).dump(1); }

edm::PolicyNet policy_from_json(const std::string& text) {
  return guarded([&] { return policy_from(parse(text)); });
}

std::string model_to_json(const ThemesModel& model) {
  json clusters = json::array();
  for (const auto& c : model.clusters) {
    json blocks = json::array();
    for (int l = 0; l < model.window; ++l) blocks.push_back(mat_json(tglasso::lag_block(c.precision, model.m, l)));
    clusters.push_back({{"mean", vec_json(c.mean)}, {"lag_blocks", blocks}});
  }
  const auto& phi = model.penalty.phi;
  json penalty = {{"beta", model.penalty.beta},
                  {"floor_ratio", model.penalty.floor_ratio},
                  {"cap_ratio", model.penalty.cap_ratio},
                  {"scale", model.penalty.scale == rmtticc::DensityScale::kRaw ? "raw" : "mode"},
                  {"phi", {{"mean", {phi.mean(0), phi.mean(1)}}, {"cov", mat_json(phi.cov)}}}};
  json policies = json::array();
  for (const auto& p : model.mixture.policies) policies.push_back(policy_json(p));
  json diagnostics = json::array();
  for (const auto& d : model.diagnostics)
    diagnostics.push_back({{"ticc_objective", d.ticc_objective},
                           {"ticc_iterations", d.ticc_iterations},
                           {"mixture_log_likelihood", d.mixture_log_likelihood},
                           {"em_iterations", d.em_iterations},
                           {"regulator_log_likelihood", d.regulator_log_likelihood},
                           {"label_changes", d.label_changes},
                           {"assignment_changes", d.assignment_changes}});
  json bic = json::array();
  for (std::size_t i = 0; i < model.bic_candidates.size(); ++i)
    bic.push_back({{"clusters", model.bic_candidates[i]},
                   {"score", model.bic_scores[i] ? json(*model.bic_scores[i]) : json(nullptr)}});
  json j = {{"kind", "themes_model"},
            {"schema_version", kSchemaVersion},
            {"window", model.window},
            {"m", model.m},
            {"action_count", model.action_count},
            {"clusters", clusters},
            {"penalty", penalty},
            {"segmentation", {{"trajectory_ids", model.trajectory_ids}, {"labels", model.segmentation.labels}}},
            {"mixture",
             {{"components", model.mixture.components},
              {"priors", vec_json(model.mixture.priors)},
              {"responsibilities", mat_json(model.mixture.responsibilities)},
              {"policies", policies}}},
            {"regulator",
             {{"table", mat_json(model.regulator.table)},
              {"temperature", model.regulator.temperature},
              {"discount", model.regulator.discount}}},
            {"weighting", weighting_name(model.weighting)},
            {"diagnostics", diagnostics},
            {"bic", bic}};
  return j.dump(1) + "\n";
}

ThemesModel model_from_json(const std::string& text) {
  return guarded([&] {
    const json j = parse(text);
    check_schema(j, "themes_model");
    ThemesModel model;
    model.window = j.at("window").get<int>();
    model.m = j.at("m").get<int>();
    model.action_count = j.at("action_count").get<int>();
    if (model.window < 1 || model.m < 1 || model.action_count < 2) throw FormatError("invalid model dimensions", 0);
    for (const auto& c : j.at("clusters")) {
      std::vector<Matrix> blocks;
      for (const auto& b : c.at("lag_blocks")) blocks.push_back(mat_from(b));
      if (static_cast<int>(blocks.size()) != model.window) throw FormatError("lag block count does not match window", 0);
      for (const auto& b : blocks)
        if (b.rows() != model.m || b.cols() != model.m) throw FormatError("lag block has the wrong shape", 0);
      Vector mean = vec_from(c.at("mean"));
      if (mean.size() != model.m * model.window) throw FormatError("cluster mean has the wrong length", 0);
      model.clusters.push_back(rmtticc::ClusterModel::make(std::move(mean), tglasso::assemble_block_toeplitz(blocks)));
    }
    const auto& p = j.at("penalty");
    model.penalty.beta = p.at("beta").get<double>();
    model.penalty.floor_ratio = p.at("floor_ratio").get<double>();
    model.penalty.cap_ratio = p.at("cap_ratio").get<double>();
    model.penalty.scale = p.at("scale").get<std::string>() == "raw" ? rmtticc::DensityScale::kRaw
                                                                     : rmtticc::DensityScale::kModeNormalized;
    const auto pm = p.at("phi").at("mean").get<std::vector<double>>();
    if (pm.size() != 2) throw FormatError("regulator density mean must have two entries", 0);
    model.penalty.phi.mean = Eigen::Vector2d(pm[0], pm[1]);
    model.penalty.phi.cov = mat_from(p.at("phi").at("cov"));
    model.trajectory_ids = j.at("segmentation").at("trajectory_ids").get<std::vector<std::string>>();
    model.segmentation =
        rmtticc::Segmentation::from_labels(j.at("segmentation").at("labels").get<std::vector<std::vector<int>>>());
    const auto& mx = j.at("mixture");
    model.mixture.components = mx.at("components").get<int>();
    model.mixture.priors = vec_from(mx.at("priors"));
    model.mixture.responsibilities = mat_from(mx.at("responsibilities"), model.mixture.components);
    for (const auto& pol : mx.at("policies")) model.mixture.policies.push_back(policy_from(pol));
    if (static_cast<int>(model.mixture.policies.size()) != model.mixture.components ||
        model.mixture.priors.size() != model.mixture.components)
      throw FormatError("mixture component counts disagree", 0);
    for (const auto& pol : model.mixture.policies)
      if (pol.input_dim() != model.m || pol.actions() != model.action_count)
        throw FormatError("policy shape does not match the model", 0);
    const auto& r = j.at("regulator");
    model.regulator.table = mat_from(r.at("table"), model.mixture.components);
    model.regulator.temperature = r.at("temperature").get<double>();
    model.regulator.discount = r.at("discount").get<double>();
    model.weighting = j.at("weighting").get<std::string>() == "cluster_policy" ? Weighting::kClusterPolicy
                                                                                 : Weighting::kCausalPosterior;
    for (const auto& d : j.at("diagnostics")) {
      IterationDiagnostics x;
      x.ticc_objective = d.at("ticc_objective").get<double>();
      x.ticc_iterations = d.at("ticc_iterations").get<int>();
      x.mixture_log_likelihood = d.at("mixture_log_likelihood").get<double>();
      x.em_iterations = d.at("em_iterations").get<int>();
      x.regulator_log_likelihood = d.at("regulator_log_likelihood").get<double>();
      x.label_changes = d.at("label_changes").get<std::size_t>();
      x.assignment_changes = d.at("assignment_changes").get<std::size_t>();
      model.diagnostics.push_back(x);
    }
    for (const auto& b : j.at("bic")) {
      model.bic_candidates.push_back(b.at("clusters").get<int>());
      model.bic_scores.push_back(b.at("score").is_null() ? std::nullopt : std::optional(b.at("score").get<double>()));
    }
    return model;
  });
}

void save_model(const ThemesModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "model.json", model_to_json(model));
}

ThemesModel load_model(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / "model.json" : dir;
  return model_from_json(read_file(path));
}

std::vector<int> LabeledTruth::regime_labels_for(const Dataset& data) const {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < trajectory_ids.size(); ++i) index[trajectory_ids[i]] = i;
  std::vector<int> out;
  for (const auto& tr : data.trajectories) {
    const auto it = index.find(tr.id);
    if (it == index.end()) throw ArgumentError("trajectory " + tr.id + " is not in the ground truth");
    const auto& labels = truth.regime_labels[it->second];
    if (labels.size() != tr.length()) throw ArgumentError("ground truth length differs for trajectory " + tr.id);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

std::string ground_truth_to_json(const synthgen::GroundTruth& truth, const Dataset& data,
                                 const synthgen::GeneratorConfig& config) {
  json ids = json::array();
  for (const auto& tr : data.trajectories) ids.push_back(tr.id);
  json segments = json::array();
  for (const auto& segs : truth.segments) {
    json row = json::array();
    for (const auto& s : segs) row.push_back({{"start", s.start}, {"end", s.end}, {"regime", s.regime}, {"policy", s.policy}});
    segments.push_back(row);
  }
  json means = json::array(), precisions = json::array(), policies = json::array();
  for (const auto& mu : truth.means) means.push_back(vec_json(mu));
  for (const auto& p : truth.precisions) precisions.push_back(mat_json(p));
  for (const auto& p : truth.policies) policies.push_back({{"weights", mat_json(p.weights)}, {"bias", vec_json(p.bias)}});
  json cfg = {{"regimes", config.regimes},
              {"policies", config.policies},
              {"m", config.m},
              {"action_count", config.action_count},
              {"window", config.window},
              {"trajectories", config.trajectories},
              {"mean_trajectory_length", config.mean_trajectory_length},
              {"mean_segment_length", config.mean_segment_length},
              {"timestamp_rates", config.timestamp_rates},
              {"sparsity", config.sparsity},
              {"mean_separation", config.mean_separation},
              {"policy_scale", config.policy_scale},
              {"seed", config.seed}};
  json j = {{"kind", "ground_truth"},
            {"schema_version", kSchemaVersion},
            {"generator", cfg},
            {"trajectory_ids", ids},
            {"regime_labels", truth.regime_labels},
            {"segments", segments},
            {"regime_to_policy", truth.regime_to_policy},
            {"means", means},
            {"precisions", precisions},
            {"policies", policies},
            {"regime_transitions", mat_json(truth.regime_transitions)}};
  return j.dump(1) + "\n";
}

LabeledTruth ground_truth_from_json(const std::string& text) {
  return guarded([&] {
    const json j = parse(text);
    check_schema(j, "ground_truth");
    LabeledTruth out;
    out.trajectory_ids = j.at("trajectory_ids").get<std::vector<std::string>>();
    auto& t = out.truth;
    t.regime_labels = j.at("regime_labels").get<std::vector<std::vector<int>>>();
    if (t.regime_labels.size() != out.trajectory_ids.size()) throw FormatError("ground truth label count mismatch", 0);
    for (const auto& row : j.at("segments")) {
      std::vector<synthgen::Segment> segs;
      for (const auto& s : row)
        segs.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(), s.at("regime").get<int>(),
                        s.at("policy").get<int>()});
      t.segments.push_back(std::move(segs));
    }
    t.regime_to_policy = j.at("regime_to_policy").get<std::vector<int>>();
    for (const auto& mu : j.at("means")) t.means.push_back(vec_from(mu));
    for (const auto& p : j.at("precisions")) t.precisions.push_back(mat_from(p));
    for (const auto& p : j.at("policies")) t.policies.push_back({mat_from(p.at("weights")), vec_from(p.at("bias"))});
    t.regime_transitions = mat_from(j.at("regime_transitions"));
    return out;
  });
}

std::string predictions_to_jsonl(const Prediction& pred, const Dataset& data) {
  std::string out;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& tr = data.trajectories[n];
    for (std::size_t t = 0; t < tr.length(); ++t) {
      json row = {{"traj", tr.id},
                  {"t", tr.timestamps[t]},
                  {"label", pred.labels[n][t]},
                  {"p", vec_json(pred.probabilities[n].row(static_cast<Eigen::Index>(t)).transpose())}};
      out += row.dump() + "\n";
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ArgumentError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace themes::io
