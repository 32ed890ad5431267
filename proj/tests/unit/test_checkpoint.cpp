#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "madgan/checkpoint.hpp"
#include "madgan/errors.hpp"

namespace madgan {
namespace {

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.step = 42;
  c.seed = 7;
  c.parameters["gen_shared.layer1.weight"] = Tensor::matrix({{0.1, 1.0 / 3.0}, {-2.5e-17, 1e300}});
  c.parameters["gen1.layer3.bias"] = Tensor({1}, std::vector<double>{-0.0});
  OptimizerState s;
  s.step = 5;
  s.options = {1e-4, 0.9, 0.999, 1e-8};
  s.moments["gen1.layer3.bias"] = {Tensor({1}, 0.25), Tensor({1}, 1.0 / 7.0)};
  c.optimizers["generator"] = s;
  c.config_json = R"({"k":1})";
  return c;
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  const Checkpoint c = sample_checkpoint();
  const Checkpoint r = checkpoint_from_json(checkpoint_to_json(c));
  EXPECT_EQ(r.step, 42u);
  EXPECT_EQ(r.seed, 7u);
  EXPECT_EQ(r.parameters, c.parameters);
  ASSERT_EQ(r.optimizers.count("generator"), 1u);
  const auto& s = r.optimizers.at("generator");
  EXPECT_EQ(s.step, 5u);
  EXPECT_EQ(s.options.learning_rate, 1e-4);
  EXPECT_EQ(s.moments.at("gen1.layer3.bias").second, c.optimizers.at("generator").moments.at("gen1.layer3.bias").second);
  EXPECT_EQ(r.config_json, c.config_json);
  EXPECT_EQ(checkpoint_to_json(r), checkpoint_to_json(c));
}

TEST(Checkpoint, DocumentCarriesVersionAndRngState) {
  const std::string text = checkpoint_to_json(sample_checkpoint());
  EXPECT_NE(text.find("\"format_version\""), std::string::npos);
  EXPECT_NE(text.find("splitmix64-chain"), std::string::npos);
}

TEST(Checkpoint, RejectsOtherFormatVersions) {
  std::string text = checkpoint_to_json(sample_checkpoint());
  const auto pos = text.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 18, "\"format_version\":2");
  EXPECT_THROW(checkpoint_from_json(text), ParseError);
  EXPECT_THROW(checkpoint_from_json("{not json"), ParseError);
  EXPECT_THROW(checkpoint_from_json("{}"), ParseError);
}

TEST(Checkpoint, FileRoundTripAndIoErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "madgan-ckpt-test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.json";
  save_checkpoint(sample_checkpoint(), path);
  EXPECT_EQ(load_checkpoint(path).parameters, sample_checkpoint().parameters);
  EXPECT_THROW(load_checkpoint(dir / "missing.json"), IoError);
  EXPECT_THROW(save_checkpoint(sample_checkpoint(), dir / "no-such-dir" / "c.json"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace madgan
