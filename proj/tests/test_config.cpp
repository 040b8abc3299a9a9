#include <gtest/gtest.h>

#include "support.hpp"

using namespace armac3;

TEST(ConfigFile, DefaultsMatchTableValues) {
  Settings s;
  EXPECT_EQ(s.run.alpha, 0.5);
  EXPECT_EQ(s.run.lambda_con, 0.3);
  EXPECT_EQ(s.run.lr, 1e-4);
  EXPECT_EQ(s.run.weight_decay, 1e-4);
  EXPECT_EQ(s.run.step_size, 200);
  EXPECT_EQ(s.run.lr_gamma, 0.5);
  EXPECT_EQ(s.run.labeled_fraction, 0.10);
  EXPECT_EQ(s.n_runs, 10);
  EXPECT_EQ(s.n_folds, 20);
  EXPECT_EQ(s.bins, 20);
}

TEST(ConfigFile, ParsesKeysCommentsAndEnums) {
  Settings s;
  apply_config_text(s,
                    "# comment line\n"
                    "alpha = 0.8   # trailing comment\n"
                    "\n"
                    "activation=selu\n"
                    "mode = semi\n"
                    "struct_mode = mincut\n"
                    "modularity_convention = doubled\n"
                    "self_loops = true\n"
                    "seed = 12\n"
                    "features = data/x.csv\n");
  EXPECT_EQ(s.run.alpha, 0.8);
  EXPECT_EQ(s.run.activation, Activation::selu);
  EXPECT_EQ(s.run.mode, TrainMode::semi);
  EXPECT_EQ(s.run.struct_mode, StructMode::mincut);
  EXPECT_EQ(s.run.modularity_convention, ModularityConvention::doubled);
  EXPECT_TRUE(s.run.self_loops);
  EXPECT_EQ(s.run.seed, 12u);
  EXPECT_EQ(s.features, "data/x.csv");
}

TEST(ConfigFile, UnknownKeyIsAnError) {
  Settings s;
  try {
    apply_config_text(s, "alpha = 0.5\nlamda_con = 0.3\n", "cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cfg:2"), std::string::npos);
    EXPECT_NE(msg.find("lamda_con"), std::string::npos);
  }
}

TEST(ConfigFile, BadValuesAndSyntax) {
  Settings s;
  EXPECT_THROW(apply_config_text(s, "alpha = high\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "epochs = 1.5\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "seed = -1\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "activation = tanh\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "just some words\n"), ConfigError);
}

TEST(ConfigFile, LaterValuesOverrideEarlier) {
  Settings s;
  apply_config_text(s, "epochs = 10\n");
  set_config_value(s, "epochs", "3");
  EXPECT_EQ(s.run.epochs, 3);
}

TEST(ConfigEcho, RoundTripsAndOmitsOutputPaths) {
  Settings s;
  s.run.alpha = 0.1 + 0.2;  // not exactly representable as a short decimal
  s.run.beta = 1.0 / 3.0;
  s.checkpoint = "/tmp/a.ckpt";
  s.report_out = "/tmp/r.csv";
  s.features = "x.csv";
  const std::string echo = config_echo(s);
  EXPECT_EQ(echo.find("\ncheckpoint ="), std::string::npos);
  EXPECT_NE(echo.find("checkpoint_every = 0"), std::string::npos);
  EXPECT_EQ(echo.find("report_out ="), std::string::npos);
  EXPECT_NE(echo.find("features = x.csv"), std::string::npos);
  Settings back;
  apply_config_text(back, echo);
  EXPECT_EQ(back.run.alpha, s.run.alpha);
  EXPECT_EQ(back.run.beta, s.run.beta);
  EXPECT_EQ(config_echo(back), echo);
}

TEST(ConfigEcho, EveryKeyIsListedOnce) {
  std::set<std::string> names;
  for (const auto& k : config_keys()) EXPECT_TRUE(names.insert(k.name).second) << k.name;
  EXPECT_TRUE(names.count("lambda_struct"));
  EXPECT_TRUE(names.count("ema_momentum"));
  EXPECT_TRUE(names.count("positive_class"));
}
