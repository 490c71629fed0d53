#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "hycot/errors.hpp"
#include "hycot/run_config.hpp"
#include "test_util.hpp"

using namespace hycot;

TEST(RunConfig, DefaultsMatchLibraryDefaults) {
  const RunConfig rc;
  EXPECT_EQ(rc.model, ModelConfig{});
  EXPECT_EQ(rc.train.epochs, TrainConfig{}.epochs);
  EXPECT_EQ(rc.train.reduction, 64u);
}

TEST(RunConfig, SettingKeysAreUniqueAndAllApplicable) {
  std::set<std::string_view> seen;
  for (const auto& k : setting_keys()) {
    EXPECT_TRUE(seen.insert(k.key).second) << k.key;
    EXPECT_FALSE(k.help.empty()) << k.key;
  }
  EXPECT_TRUE(seen.count("gamma"));
  EXPECT_TRUE(seen.count("r"));
}

TEST(RunConfig, ApplySettingParsesEachType) {
  RunConfig rc;
  apply_setting(rc, "gamma", "13");
  apply_setting(rc, "lr", "2.5e-4");
  apply_setting(rc, "bias", "off");
  apply_setting(rc, "r", "16");
  apply_setting(rc, "bands", "40");
  apply_setting(rc, "size", "9");
  apply_setting(rc, "out", "/tmp/somewhere");
  EXPECT_EQ(rc.model.latent_channels, 13u);
  EXPECT_EQ(rc.train.lr, 2.5e-4);
  EXPECT_FALSE(rc.model.use_bias);
  EXPECT_EQ(rc.train.reduction, 16u);
  EXPECT_EQ(rc.model.bands, 40u);
  EXPECT_EQ(rc.synth.bands, 40u);
  EXPECT_EQ(rc.synth.height, 9u);
  EXPECT_EQ(rc.synth.width, 9u);
  EXPECT_EQ(rc.out, "/tmp/somewhere");
  apply_setting(rc, "bias", "yes");
  EXPECT_TRUE(rc.model.use_bias);
}

TEST(RunConfig, ApplySettingRejectsBadInput) {
  RunConfig rc;
  EXPECT_THROW(apply_setting(rc, "nonsense", "1"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "gamma", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "gamma", "3x"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "gamma", ""), ConfigError);
  EXPECT_THROW(apply_setting(rc, "lr", "fast"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "bias", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "gamma", "99999999999"), ConfigError);
}

TEST(RunConfig, ParseTextHandlesCommentsAndBlanks) {
  const auto kv = parse_config_text("# model\n\ngamma = 7\n  lr=0.01  # fast\nbias= true\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"gamma", "7"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"lr", "0.01"}));
  EXPECT_EQ(kv[2], (std::pair<std::string, std::string>{"bias", "true"}));
  EXPECT_THROW(parse_config_text("gamma 7\n"), ConfigError);
  EXPECT_THROW(parse_config_text(" = 7\n"), ConfigError);
}

TEST(RunConfig, ConfigFileAppliesAndReportsPath) {
  const auto dir = hycot::testing::temp_dir("runcfg");
  {
    std::ofstream(dir / "good.cfg") << "epochs = 12\nheads = 2\n";
    std::ofstream(dir / "bad.cfg") << "epochs = twelve\n";
  }
  RunConfig rc;
  apply_config_file(rc, dir / "good.cfg");
  EXPECT_EQ(rc.train.epochs, 12u);
  EXPECT_EQ(rc.model.heads, 2u);
  try {
    apply_config_file(rc, dir / "bad.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_config_file(rc, dir / "missing.cfg"), IoError);
}

TEST(RunConfig, DerivedSeedsAreDistinctAndStable) {
  RunConfig a, b;
  a.seed = b.seed = 5;
  a.derive_seeds();
  b.derive_seeds();
  EXPECT_EQ(a.model.seed, b.model.seed);
  EXPECT_EQ(a.model.seed, derive_seed(5, "model"));
  EXPECT_EQ(a.train.seed, derive_seed(5, "train"));
  EXPECT_EQ(a.synth.seed, derive_seed(5, "synth"));
  EXPECT_NE(a.model.seed, a.train.seed);
  EXPECT_NE(a.train.seed, a.synth.seed);
  b.seed = 6;
  b.derive_seeds();
  EXPECT_NE(a.model.seed, b.model.seed);
}

TEST(RunConfig, ResolvedThreads) {
  RunConfig rc;
  rc.threads = 3;
  EXPECT_EQ(rc.resolved_threads(), 3u);
  rc.threads = 0;
  EXPECT_GE(rc.resolved_threads(), 1u);
}
