#include <gtest/gtest.h>

#include <fstream>

#include "run_command.hpp"
#include "temp_dir.hpp"

using boneage::testing::cli;
using boneage::testing::run_command;
using boneage::testing::shell_quote;
using boneage::testing::TempDir;

TEST(Cli, SelftestReproducesTheTable) {
  const auto r = run_command(cli("selftest"));
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("MAE (months): 2.8000"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("MAPE: 0.0182"), std::string::npos) << r.output;
}

TEST(Cli, EvalWritesReport) {
  TempDir dir;
  std::ofstream(dir / "pred.csv") << "id,months\n1,126\n2,150\n";
  std::ofstream(dir / "labels.csv") << "id,months\n2,150\n1,120\n";
  const auto r = run_command(cli("--out " + shell_quote((dir / "out").string()) + " eval " +
                                 shell_quote((dir / "pred.csv").string()) + " " +
                                 shell_quote((dir / "labels.csv").string())));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("MAE (months): 3.0000"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.csv"));
}

TEST(Cli, EvalIdMismatchExitsWithError) {
  TempDir dir;
  std::ofstream(dir / "pred.csv") << "1,126\n";
  std::ofstream(dir / "labels.csv") << "2,150\n";
  const auto r = run_command(cli("--out " + shell_quote(dir.path().string()) + " eval " +
                                 shell_quote((dir / "pred.csv").string()) + " " +
                                 shell_quote((dir / "labels.csv").string())));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error: eval:"), std::string::npos) << r.output;
}

TEST(Cli, MissingCheckpointNamesTheStage) {
  TempDir dir;
  std::ofstream(dir / "img.pgm") << "P5\n2 2\n255\n" << std::string(4, '\x20');
  const auto r = run_command(cli("--out " + shell_quote((dir / "empty").string()) + " predict " +
                                 shell_quote((dir / "img.pgm").string())));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error: segmentation:"), std::string::npos) << r.output;
}

TEST(Cli, BadOverrideIsAConfigError) {
  const auto r = run_command(cli("--set unet.depth=zero selftest"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error: config:"), std::string::npos) << r.output;
}

TEST(Cli, PhantomAndAugmentCounts) {
  TempDir dir;
  const std::string out = "--out " + shell_quote(dir.path().string()) + " --seed 5 ";
  auto r = run_command(cli(out + "phantom --count 3"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output, "3\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "phantoms" / "0.pgm"));
  EXPECT_TRUE(std::filesystem::exists(dir / "phantoms" / "labels.csv"));
  r = run_command(cli(out + "augment"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output, "576\n");
}

TEST(Cli, UnknownSubcommandFails) {
  EXPECT_NE(run_command(cli("frobnicate")).exit_code, 0);
}
