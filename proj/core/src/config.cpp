#include "themes/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "themes/errors.hpp"

namespace themes {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ArgumentError("cannot format number");
  return std::string(buf, end);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ConfigurationError("invalid value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigurationError("invalid value '" + text + "' for " + key + " (expected true or false)");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw ConfigurationError("empty list for " + key);
  return out;
}

template <typename T, typename Field>
ConfigKey number_key(std::string name, std::string help, Field field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [field](const ThemesConfig& c) {
    const T v = field(c);
    if constexpr (std::is_floating_point_v<T>) return format_double(v);
    else return std::to_string(v);
  };
  k.set = [field, name](ThemesConfig& c, const std::string& text) { field(c) = parse_number<T>(name, text); };
  return k;
}

template <typename Field>
ConfigKey bool_key(std::string name, std::string help, Field field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [field](const ThemesConfig& c) { return std::string(field(c) ? "true" : "false"); };
  k.set = [field, name](ThemesConfig& c, const std::string& text) { field(c) = parse_bool(name, text); };
  return k;
}

#define THEMES_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> keys;
  keys.push_back(number_key<int>("clusters", "cluster count K; 0 selects K by BIC", THEMES_FIELD(clusters)));
  {
    ConfigKey k;
    k.name = "cluster_candidates";
    k.help = "comma-separated K values tried when clusters = 0";
    k.get = [](const ThemesConfig& c) {
      std::string s;
      for (std::size_t i = 0; i < c.cluster_candidates.size(); ++i)
        s += (i ? "," : "") + std::to_string(c.cluster_candidates[i]);
      return s;
    };
    k.set = [](ThemesConfig& c, const std::string& t) { c.cluster_candidates = parse_int_list("cluster_candidates", t); };
    keys.push_back(std::move(k));
  }
  keys.push_back(number_key<int>("window", "stacked window size", THEMES_FIELD(window)));
  keys.push_back(number_key<double>("lambda", "sparsity penalty of the precision estimates", THEMES_FIELD(lambda)));
  keys.push_back(number_key<double>("beta", "label-switch penalty weight", THEMES_FIELD(beta)));
  {
    ConfigKey k;
    k.name = "density_scale";
    k.help = "switch penalty scaling: mode or raw";
    k.get = [](const ThemesConfig& c) {
      return std::string(c.density_scale == rmtticc::DensityScale::kRaw ? "raw" : "mode");
    };
    k.set = [](ThemesConfig& c, const std::string& t) {
      const auto v = trim(t);
      if (v == "mode") c.density_scale = rmtticc::DensityScale::kModeNormalized;
      else if (v == "raw") c.density_scale = rmtticc::DensityScale::kRaw;
      else throw ConfigurationError("invalid value '" + t + "' for density_scale (expected mode or raw)");
    };
    keys.push_back(std::move(k));
  }
  keys.push_back(number_key<int>("components", "policy count G; 0 selects G up to max_components", THEMES_FIELD(components)));
  keys.push_back(number_key<int>("max_components", "largest G tried when components = 0", THEMES_FIELD(max_components)));
  keys.push_back(number_key<int>("outer_iters", "cap on outer iterations", THEMES_FIELD(outer_iters)));
  keys.push_back(bool_key("skip_regulator", "stop after one pass with unit rewards", THEMES_FIELD(skip_regulator)));
  keys.push_back(number_key<double>("admm_rho", "ADMM penalty parameter", THEMES_FIELD(admm.penalty_rho)));
  keys.push_back(number_key<int>("admm_max_iters", "ADMM iteration cap", THEMES_FIELD(admm.max_iters)));
  keys.push_back(number_key<double>("admm_abs_tol", "ADMM absolute tolerance", THEMES_FIELD(admm.abs_tol)));
  keys.push_back(number_key<double>("admm_rel_tol", "ADMM relative tolerance", THEMES_FIELD(admm.rel_tol)));
  keys.push_back(number_key<int>("ticc_max_iters", "segmentation EM iteration cap", THEMES_FIELD(ticc_max_iters)));
  keys.push_back(number_key<double>("ticc_rel_tol", "segmentation EM relative tolerance", THEMES_FIELD(ticc_rel_tol)));
  keys.push_back(number_key<int>("kmeans_iters", "Lloyd iterations of the initial clustering", THEMES_FIELD(kmeans_iters)));
  keys.push_back(number_key<int>("ticc_restarts", "independent segmentation initializations", THEMES_FIELD(ticc_restarts)));
  keys.push_back(number_key<int>("em_max_iters", "policy-mixture EM iteration cap", THEMES_FIELD(em_max_iters)));
  keys.push_back(number_key<double>("em_rel_tol", "policy-mixture EM relative tolerance", THEMES_FIELD(em_rel_tol)));
  keys.push_back(number_key<int>("em_refine_epochs", "training epochs per warm-started M-step", THEMES_FIELD(em_refine_epochs)));
  keys.push_back(bool_key("em_hard", "one-hot responsibilities", THEMES_FIELD(em_hard)));
  keys.push_back(number_key<int>("edm_hidden", "policy network hidden units", THEMES_FIELD(edm.hidden)));
  keys.push_back(number_key<double>("edm_alpha", "occupancy loss weight", THEMES_FIELD(edm.alpha)));
  keys.push_back(number_key<int>("edm_sgld_steps", "Langevin steps per negative batch", THEMES_FIELD(edm.sgld_steps)));
  keys.push_back(number_key<double>("edm_sgld_step_size", "Langevin step size", THEMES_FIELD(edm.sgld_step_size)));
  keys.push_back(number_key<double>("edm_sgld_noise_scale", "Langevin noise scale", THEMES_FIELD(edm.sgld_noise_scale)));
  keys.push_back(number_key<int>("edm_replay_buffer_size", "persistent negative buffer size", THEMES_FIELD(edm.replay_buffer_size)));
  keys.push_back(number_key<double>("edm_reinit_prob", "buffer re-initialization probability", THEMES_FIELD(edm.reinit_prob)));
  keys.push_back(number_key<double>("edm_learning_rate", "Adam learning rate", THEMES_FIELD(edm.learning_rate)));
  keys.push_back(number_key<int>("edm_epochs", "training epochs", THEMES_FIELD(edm.epochs)));
  keys.push_back(number_key<int>("edm_batch_size", "demonstration mini-batch size", THEMES_FIELD(edm.batch_size)));
  keys.push_back(number_key<int>("edm_negative_batch_size", "negative samples per mini-batch", THEMES_FIELD(edm.negative_batch_size)));
  keys.push_back(number_key<double>("edm_gamma", "occupancy discount", THEMES_FIELD(edm.gamma)));
  keys.push_back(number_key<int>("mlirl_steps", "regulator gradient steps", THEMES_FIELD(mlirl.steps)));
  keys.push_back(number_key<double>("mlirl_learning_rate", "regulator learning rate", THEMES_FIELD(mlirl.learning_rate)));
  keys.push_back(number_key<double>("mlirl_discount", "high-level discount", THEMES_FIELD(mlirl.discount)));
  keys.push_back(number_key<double>("mlirl_temperature", "Boltzmann temperature", THEMES_FIELD(mlirl.temperature)));
  keys.push_back(number_key<int>("mlirl_sweeps", "value-iteration sweeps", THEMES_FIELD(mlirl.sweeps)));
  keys.push_back(number_key<double>("mlirl_vi_tol", "value-iteration early-stop tolerance", THEMES_FIELD(mlirl.vi_tol)));
  keys.push_back(number_key<std::uint64_t>("seed", "master seed", THEMES_FIELD(seed)));
  return keys;
}

#undef THEMES_FIELD

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

void set_config_value(ThemesConfig& config, const std::string& key, const std::string& value) {
  const auto* k = find_config_key(key);
  if (!k) throw ConfigurationError("unknown config key '" + key + "'");
  k->set(config, value);
}

ThemesConfig parse_config(std::istream& in, ThemesConfig base) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key = value", no);
    const auto key = trim(line.substr(0, eq));
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const ConfigurationError& e) {
      throw ConfigurationError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  return base;
}

ThemesConfig load_config(const std::string& path, ThemesConfig base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

std::string format_config(const ThemesConfig& config, bool with_help) {
  std::string out;
  for (const auto& k : config_keys()) {
    if (with_help) out += "# " + k.help + "\n";
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace themes
