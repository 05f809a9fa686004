#include <gtest/gtest.h>

#include <fstream>

#include "boneage/config.hpp"
#include "boneage/error.hpp"
#include "temp_dir.hpp"

using namespace boneage;

TEST(Config, EmptyTextGivesDefaults) {
  const PipelineConfig c = parse_config("");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.unet.depth, 3);
  EXPECT_EQ(c.augmentation.variants_per_image(), 48u);
  EXPECT_EQ(c.paths.resolve(c.paths.unet_checkpoint), std::filesystem::path("out/unet.ckpt"));
}

TEST(Config, SectionsAndLists) {
  const PipelineConfig c = parse_config(
      "[unet]\ndepth = 2\nthreshold = 0.3\n"
      "[augmentation]\nrotations = 0, 10, 20\nflips = false\n"
      "[rpn]\nbackbone_channels = 4,8\n"
      "[train_age]\nepochs = 3\nlearning_rate = 0.01\n"
      "[pipeline]\nseed = 7\n");
  EXPECT_EQ(c.unet.depth, 2);
  EXPECT_FLOAT_EQ(c.unet.threshold, 0.3f);
  EXPECT_EQ(c.augmentation.rotations, (std::vector<double>{0, 10, 20}));
  EXPECT_EQ(c.augmentation.flips, (std::vector<bool>{false}));
  EXPECT_EQ(c.augmentation.variants_per_image(), 36u);
  EXPECT_EQ(c.rpn.backbone_channels, (std::vector<int>{4, 8}));
  EXPECT_EQ(c.train_age.epochs, 3);
  EXPECT_FLOAT_EQ(c.train_age.learning_rate, 0.01f);
  EXPECT_EQ(c.seed, 7u);
}

TEST(Config, ErrorsNameTheKey) {
  try {
    parse_config("[unet]\ndepht = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unet.depht"), std::string::npos);
  }
  try {
    parse_config("[unet]\ndepth = two\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unet.depth"), std::string::npos);
  }
  EXPECT_THROW(parse_config("[unet]\ninput_width = 100\n"), ConfigError);
  EXPECT_THROW(parse_config("[phantom]\nnegative_fraction = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[augmentation]\nflips = maybe\n"), ConfigError);
}

TEST(Config, OverridesUseTheSameParser) {
  PipelineConfig c;
  apply_override(c, "train_unet.epochs", "2");
  apply_override(c, "paths.out_dir", "/tmp/x");
  EXPECT_EQ(c.train_unet.epochs, 2);
  EXPECT_EQ(c.paths.resolve(c.paths.age_checkpoint), std::filesystem::path("/tmp/x/age.ckpt"));
  EXPECT_THROW(apply_override(c, "nope.key", "1"), ConfigError);
  EXPECT_THROW(apply_override(c, "unet.depth", "0"), ConfigError);
}

TEST(Config, FormatRoundTrips) {
  PipelineConfig c;
  c.unet.threshold = 0.35f;
  c.augmentation.rotations = {0.0, 7.5};
  c.rpn.box_loss_weight = 4.0f;
  c.seed = 99;
  const PipelineConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.seed, 99u);
}

TEST(Config, KeysAreUnique) {
  auto keys = config_keys();
  const std::size_t n = keys.size();
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(std::unique(keys.begin(), keys.end()) - keys.begin(), static_cast<long>(n));
  EXPECT_NE(std::find(keys.begin(), keys.end(), "age.age_scale"), keys.end());
}

TEST(Config, RelativeOutDirFollowsTheFile) {
  boneage::testing::TempDir dir;
  std::filesystem::create_directories(dir / "conf");
  std::ofstream(dir / "conf" / "run.ini") << "[paths]\nout_dir = results\n";
  const PipelineConfig c = load_config(dir / "conf" / "run.ini");
  EXPECT_EQ(c.paths.out_dir, dir / "conf" / "results");
  EXPECT_THROW(load_config(dir / "missing.ini"), IoError);
}
