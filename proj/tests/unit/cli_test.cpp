#include <gtest/gtest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "themes/config.hpp"
#include "themes/serialize.hpp"

namespace fs = std::filesystem;
using themes::cli::run;

namespace {

// Captures stdout and stderr for the lifetime of the object.
struct Capture {
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  ~Capture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

const std::vector<std::string> kFast = {"--clusters", "3", "--outer_iters", "2", "--em_max_iters", "3",
                                        "--edm_epochs", "2", "--edm_hidden", "8", "--mlirl_steps", "10"};

std::vector<std::string> with_fast(std::vector<std::string> args) {
  args.insert(args.end(), kFast.begin(), kFast.end());
  return args;
}

}  // namespace

TEST(Cli, EndToEnd) {
  const auto dir = testutil::temp_dir("cli_e2e");
  const auto d = dir / "data";
  {
    Capture c;
    ASSERT_EQ(run({"themes", "generate", "--preset", "default", "--seed", "3", "--out", d.string()}), 0) << c.err.str();
  }
  for (const char* f : {"data.jsonl", "train.jsonl", "test.jsonl", "ground_truth.json"}) EXPECT_TRUE(fs::exists(d / f)) << f;

  const auto run1 = dir / "run1";
  const auto run2 = dir / "run2";
  for (const auto& r : {run1, run2}) {
    Capture c;
    ASSERT_EQ(run(with_fast({"themes", "fit", "--data", (d / "train.jsonl").string(), "--out", r.string()})), 0) << c.err.str();
  }
  EXPECT_EQ(themes::io::read_file(run1 / "model.json"), themes::io::read_file(run2 / "model.json"));
  EXPECT_TRUE(fs::exists(run1 / "manifest.json"));
  EXPECT_FALSE(fs::exists(run1 / ".lock"));

  {
    Capture c;
    ASSERT_EQ(run({"themes", "predict", "--model", run1.string(), "--data", (d / "test.jsonl").string(), "--out",
                   (dir / "pred.jsonl").string()}),
              0)
        << c.err.str();
  }
  EXPECT_GT(fs::file_size(dir / "pred.jsonl"), 0u);

  for (const auto& r : {run1, run2}) {
    Capture c;
    ASSERT_EQ(run({"themes", "evaluate", "--model", r.string(), "--data", (d / "test.jsonl").string(), "--truth",
                   (d / "ground_truth.json").string()}),
              0)
        << c.err.str();
    EXPECT_NE(c.out.str().find("f1"), std::string::npos);
  }
  EXPECT_EQ(themes::io::read_file(run1 / "metrics.json"), themes::io::read_file(run2 / "metrics.json"));

  {
    Capture c;
    ASSERT_EQ(run({"themes", "report", "--runs", run1.string(), run2.string(), "--out", (dir / "rep").string(), "--svg"}), 0)
        << c.err.str();
  }
  for (const char* f : {"report.csv", "report.json", "report.svg"}) EXPECT_TRUE(fs::exists(dir / "rep" / f)) << f;

  {
    Capture c;
    ASSERT_EQ(run(with_fast({"themes", "ablate", "--name", "EDM", "--data", (d / "train.jsonl").string(), "--out",
                             (dir / "edm").string()})),
              0)
        << c.err.str();
  }
  EXPECT_EQ(themes::io::load_model(dir / "edm").component_count(), 1);
}

TEST(Cli, DefaultsReproduceResolvedConfig) {
  const auto dir = testutil::temp_dir("cli_config");
  std::string defaults;
  {
    Capture c;
    ASSERT_EQ(run({"themes", "config", "--defaults"}), 0);
    defaults = c.out.str();
  }
  std::ofstream(dir / "c.cfg") << defaults;
  Capture c;
  ASSERT_EQ(run({"themes", "config", "--config", (dir / "c.cfg").string()}), 0) << c.err.str();
  std::istringstream ia(defaults), ib(c.out.str());
  EXPECT_EQ(themes::format_config(themes::parse_config(ia)), themes::format_config(themes::parse_config(ib)));
}

TEST(Cli, MissingDatasetNamesPath) {
  const auto dir = testutil::temp_dir("cli_missing");
  const std::string bogus = (dir / "does_not_exist.jsonl").string();
  Capture c;
  EXPECT_EQ(run({"themes", "fit", "--data", bogus, "--out", (dir / "r").string()}), 1);
  EXPECT_NE(c.err.str().find(bogus), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  Capture c;
  EXPECT_EQ(run({"themes", "fit", "--bogus-flag"}), 1);
  EXPECT_EQ(run({"themes", "ablate", "--name", "nope", "--data", "x.jsonl", "--out", "y"}), 1);
  EXPECT_FALSE(c.err.str().empty());
}

TEST(Cli, LockPreventsConcurrentRuns) {
  const auto dir = testutil::temp_dir("cli_lock");
  {
    themes::cli::RunLock lock(dir);
    EXPECT_THROW(themes::cli::RunLock second(dir), themes::ArgumentError);
  }
  EXPECT_NO_THROW(themes::cli::RunLock again(dir));
}
