#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "themes/config.hpp"
#include "themes/errors.hpp"

using namespace themes;

TEST(Config, DefaultsRoundTrip) {
  const ThemesConfig defaults;
  std::istringstream in(format_config(defaults, true));
  const auto back = parse_config(in);
  EXPECT_EQ(format_config(back), format_config(defaults));
}

TEST(Config, EveryKeyRoundTripsAValue) {
  ThemesConfig c;
  set_config_value(c, "lambda", "0.00123");
  set_config_value(c, "cluster_candidates", "3, 5,8");
  set_config_value(c, "density_scale", "raw");
  set_config_value(c, "em_hard", "true");
  set_config_value(c, "seed", "18446744073709551615");
  set_config_value(c, "edm_learning_rate", "0.1");
  EXPECT_EQ(c.lambda, 0.00123);
  EXPECT_EQ(c.cluster_candidates, (std::vector<int>{3, 5, 8}));
  EXPECT_EQ(c.density_scale, rmtticc::DensityScale::kRaw);
  EXPECT_TRUE(c.em_hard);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.edm.learning_rate, 0.1);
  std::istringstream in(format_config(c));
  EXPECT_EQ(format_config(parse_config(in)), format_config(c));

  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
    EXPECT_EQ(find_config_key(k.name), &k);
  }
  EXPECT_EQ(find_config_key("nope"), nullptr);
}

TEST(Config, DoublesFormatShortestExact) {
  for (double v : {0.1, 1e-5, 3.0, 0.95, 1.0 / 3.0}) {
    ThemesConfig c;
    set_config_value(c, "beta", format_double(v));
    EXPECT_EQ(c.beta, v);
  }
  EXPECT_EQ(format_double(1e-5), "1e-05");
}

TEST(Config, CommentsAndBlankLines) {
  std::istringstream in("# comment\n\n  window = 3  # trailing\nbeta=0.5\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.window, 3);
  EXPECT_EQ(c.beta, 0.5);
}

TEST(Config, ErrorsCarryLineNumbers) {
  std::istringstream syntax("window = 2\nbroken line\n");
  try {
    parse_config(syntax);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream unknown("\nfoo = 1\n");
  try {
    parse_config(unknown);
    FAIL();
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad("window = two\n");
  EXPECT_THROW(parse_config(bad), ConfigurationError);
  EXPECT_THROW(load_config("/nonexistent/themes.cfg"), InputError);
}
