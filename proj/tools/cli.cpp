#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <exception>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "themes/config.hpp"
#include "themes/errors.hpp"
#include "themes/pipeline.hpp"
#include "themes/report.hpp"
#include "themes/serialize.hpp"
#include "themes/synthgen.hpp"
#include "themes/version.hpp"

namespace themes::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw ArgumentError("run directory " + dir.string() + " is locked by another process (" + path_.string() + ")");
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json module_versions() {
  json v = json::object();
  for (const char* m : {"trajdata", "synthgen", "tglasso", "rmtticc", "edm", "emedm", "hireward", "themes", "metrics", "cli"})
    v[m] = kVersion;
  return v;
}

// Manifest of one run directory, rewritten atomically at every stage.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command) : dir_(std::move(dir)) {
    doc_ = {{"kind", "run_manifest"},
            {"schema_version", io::kSchemaVersion},
            {"command", std::move(command)},
            {"module_versions", module_versions()},
            {"timestamps", {{"started", now_utc()}}},
            {"outputs", json::array()}};
  }

  json& operator[](const std::string& key) { return doc_[key]; }

  void stage(const std::string& name) {
    doc_["stage"] = name;
    doc_["timestamps"][name] = now_utc();
    write();
  }

  void output(const std::string& file) {
    doc_["outputs"].push_back(file);
    write();
  }

  void write() const { io::write_file_atomic(dir_ / "manifest.json", doc_.dump(1) + "\n"); }

 private:
  fs::path dir_;
  json doc_;
};

json config_json(const ThemesConfig& c) {
  json j = json::object();
  for (const auto& k : config_keys()) j[k.name] = k.get(c);
  return j;
}

Dataset load_data(const fs::path& path, int action_count = 0) {
  if (!fs::exists(path)) throw ArgumentError("dataset not found: " + path.string());
  try {
    return load_dataset(path, format_from_path(path), action_count);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.line());
  } catch (const InputError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Config file (optional) overlaid with the per-key flags that were given.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key = value config file");
    for (const auto& k : config_keys()) options[k.name] = app->add_option("--" + k.name, values[k.name], k.help)->group("Config overrides");
  }

  [[nodiscard]] ThemesConfig resolve() const {
    ThemesConfig c = file.empty() ? ThemesConfig{} : load_config(file);
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) set_config_value(c, name, values.at(name));
    c.validate();
    return c;
  }
};

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  }
}

// The innermost error of a nested chain decides the exit code.
int classify(const std::exception& e) {
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return classify(inner);
  }
  if (dynamic_cast<const InputError*>(&e)) return 1;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 1;
  return 2;
}

int cmd_generate(const std::string& preset, std::uint64_t seed, double test_fraction, const fs::path& out) {
  if (preset != "default") throw ArgumentError("unknown preset '" + preset + "' (available: default)");
  RunLock lock(out);
  Manifest manifest(out, "generate");
  const auto cfg = synthgen::default_preset(seed);
  manifest["seeds"] = {{"seed", seed}};
  manifest["preset"] = preset;
  manifest.stage("generating");
  const auto [data, truth] = synthgen::generate(cfg);
  save_dataset(data, out / "data.jsonl");
  manifest.output("data.jsonl");
  io::write_file_atomic(out / "ground_truth.json", io::ground_truth_to_json(truth, data, cfg));
  manifest.output("ground_truth.json");
  const auto [train, test] = split_dataset(data, test_fraction, seed);
  save_dataset(train, out / "train.jsonl");
  manifest.output("train.jsonl");
  save_dataset(test, out / "test.jsonl");
  manifest.output("test.jsonl");
  manifest["dataset"] = {{"path", "data.jsonl"}, {"hash", hash_file(out / "data.jsonl")}};
  manifest.stage("finished");
  std::cerr << "generated " << data.size() << " trajectories (" << train.size() << " train, " << test.size()
            << " test) in " << out.string() << "\n";
  return 0;
}

int cmd_fit(const std::string& method, const fs::path& data_path, const ConfigFlags& flags, const fs::path& out) {
  const auto ablation = parse_ablation(method);
  const auto config = flags.resolve();
  const auto data = load_data(data_path);
  RunLock lock(out);
  Manifest manifest(out, method == "THEMES" ? "fit" : "ablate");
  manifest["method"] = method;
  manifest["config"] = config_json(config);
  manifest["dataset"] = {{"path", fs::absolute(data_path).string()}, {"hash", hash_file(data_path)}};
  manifest["seeds"] = {{"seed", config.seed}, {"edm_seed", edm_seed(config)}};
  io::write_file_atomic(out / "config.txt", format_config(config));
  manifest.output("config.txt");
  manifest.stage("fitting");
  const auto model = run_ablation(ablation, data, config);
  io::save_model(model, out);
  manifest.output("model.json");
  manifest["result"] = {{"clusters", model.cluster_count()},
                        {"components", model.component_count()},
                        {"outer_iterations", model.diagnostics.size()}};
  manifest.stage("finished");
  std::cerr << method << ": K=" << model.cluster_count() << " G=" << model.component_count() << " after "
            << model.diagnostics.size() << " outer iteration(s); model written to " << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_predict(const fs::path& model_dir, const fs::path& data_path, const fs::path& out) {
  const auto model = io::load_model(model_dir);
  const auto data = load_data(data_path, model.action_count);
  const auto pred = predict_actions(model, data);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_file_atomic(out, io::predictions_to_jsonl(pred, data));
  std::cerr << "wrote predictions for " << data.total_steps() << " timesteps to " << out.string() << "\n";
  return 0;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what(), 0);
  }
}

int cmd_evaluate(const fs::path& model_dir, const fs::path& data_path, const std::string& truth_path, fs::path out) {
  const auto model = io::load_model(model_dir);
  const auto data = load_data(data_path, model.action_count);
  if (model.action_count != 2) throw ArgumentError("evaluation metrics need binary actions");
  std::string method = "THEMES";
  std::uint64_t seed = 0;
  if (fs::exists(model_dir / "manifest.json")) {
    const auto m = read_json(model_dir / "manifest.json");
    method = m.value("method", method);
    if (m.contains("seeds")) seed = m["seeds"].value("seed", std::uint64_t{0});
  }
  const auto pred = predict_actions(model, data);
  std::vector<int> y, labels;
  std::vector<double> p;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& tr = data.trajectories[n];
    for (std::size_t t = 0; t < tr.length(); ++t) {
      y.push_back(tr.actions[t]);
      p.push_back(pred.probabilities[n](static_cast<Eigen::Index>(t), 1));
    }
    labels.insert(labels.end(), pred.labels[n].begin(), pred.labels[n].end());
  }
  metrics::RunRecord record{method, seed, metrics::classification_metrics(y, p), std::nullopt};
  if (!truth_path.empty()) {
    const auto truth = io::ground_truth_from_json(io::read_file(truth_path));
    record.segmentation = metrics::segmentation_metrics(truth.regime_labels_for(data), labels);
  }
  if (out.empty()) out = model_dir / "metrics.json";
  io::write_file_atomic(out, metrics::run_record_to_json(record));
  std::cout << metrics::report_csv(metrics::aggregate({record}));
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out, bool svg) {
  std::vector<metrics::RunRecord> records;
  for (const auto& r : runs) {
    const fs::path path = fs::is_directory(r) ? fs::path(r) / "metrics.json" : fs::path(r);
    if (!fs::exists(path)) throw ArgumentError("no metrics found at " + path.string() + " (run evaluate first)");
    records.push_back(metrics::run_record_from_json(io::read_file(path)));
  }
  const auto reports = metrics::aggregate(records);
  const auto csv = metrics::report_csv(reports);
  std::cout << csv;
  if (!out.empty()) {
    fs::create_directories(out);
    io::write_file_atomic(fs::path(out) / "report.csv", csv);
    io::write_file_atomic(fs::path(out) / "report.json", metrics::report_json(reports, records));
    if (svg) io::write_file_atomic(fs::path(out) / "report.svg", metrics::report_svg(reports));
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"THEMES: time-aware segmentation, policy mixtures and a reward regulator for offline apprenticeship learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string preset = "default";
  std::uint64_t gen_seed = 1;
  double test_fraction = 0.2;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic benchmark dataset with ground truth");
  gen->alias("synthgen");
  gen->add_option("--preset", preset, "generator preset")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--test-fraction", test_fraction, "share of trajectories held out")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string fit_data, fit_out;
  ConfigFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "fit the full pipeline");
  fit_cmd->add_option("--data", fit_data, "training dataset (.jsonl or .csv)")->required();
  fit_cmd->add_option("--out", fit_out, "run directory")->required();
  fit_flags.attach(fit_cmd);

  std::string abl_name, abl_data, abl_out;
  ConfigFlags abl_flags;
  auto* abl = app.add_subcommand("ablate", "fit one ablation: EDM, EM-EDM, MT-TICC&EDM, THEMES_0 or THEMES");
  abl->add_option("--name", abl_name, "ablation name")->required();
  abl->add_option("--data", abl_data, "training dataset")->required();
  abl->add_option("--out", abl_out, "run directory")->required();
  abl_flags.attach(abl);

  std::string pred_model, pred_data, pred_out;
  auto* pred = app.add_subcommand("predict", "per-timestep action probabilities for a dataset");
  pred->add_option("--model", pred_model, "run directory or model.json")->required();
  pred->add_option("--data", pred_data, "dataset")->required();
  pred->add_option("--out", pred_out, "predictions JSONL")->required();

  std::string ev_model, ev_data, ev_truth, ev_out;
  auto* ev = app.add_subcommand("evaluate", "classification (and segmentation) metrics on a dataset");
  ev->add_option("--model", ev_model, "run directory")->required();
  ev->add_option("--data", ev_data, "dataset")->required();
  ev->add_option("--truth", ev_truth, "ground_truth.json for segmentation metrics");
  ev->add_option("--out", ev_out, "metrics file (default: <model>/metrics.json)");

  std::vector<std::string> rep_runs;
  std::string rep_out;
  bool rep_svg = false;
  auto* rep = app.add_subcommand("report", "aggregate evaluated runs into CSV and JSON");
  rep->add_option("--runs", rep_runs, "run directories or metrics files")->required();
  rep->add_option("--out", rep_out, "directory for report.csv, report.json and report.svg");
  rep->add_flag("--svg", rep_svg, "also write a bar chart");

  bool defaults = false;
  ConfigFlags cfg_flags;
  auto* cfg = app.add_subcommand("config", "print configuration");
  cfg->add_flag("--defaults", defaults, "print every key with its default value");
  cfg_flags.attach(cfg);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 1;
  }

  try {
    if (*gen) return cmd_generate(preset, gen_seed, test_fraction, gen_out);
    if (*fit_cmd) return cmd_fit("THEMES", fit_data, fit_flags, fit_out);
    if (*abl) return cmd_fit(abl_name, abl_data, abl_flags, abl_out);
    if (*pred) return cmd_predict(pred_model, pred_data, pred_out);
    if (*ev) return cmd_evaluate(ev_model, ev_data, ev_truth, ev_out);
    if (*rep) return cmd_report(rep_runs, rep_out, rep_svg);
    if (*cfg) {
      std::cout << format_config(defaults ? ThemesConfig{} : cfg_flags.resolve(), defaults);
      return 0;
    }
  } catch (const std::exception& e) {
    print_nested(e);
    return classify(e);
  }
  return 1;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace themes::cli
