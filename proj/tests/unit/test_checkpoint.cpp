#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "emag/checkpoint.hpp"
#include "fixtures.hpp"

using namespace emag;
using emag::testing::perturb;
using emag::testing::tiny_config;
using emag::testing::tiny_sample;
namespace fs = std::filesystem;

namespace {

std::uint64_t header_length(const std::string& bytes) {
  std::uint64_t n;
  std::memcpy(&n, bytes.data() + 12, sizeof n);
  return n;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  Model m(tiny_config(PrecisionVariant::Diagonal, ConditioningVariant::GlobalScalar));
  perturb(m);
  const auto ckpt = ModelCheckpoint::from_model(m, {{"seed", 3}});
  const std::string bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(bytes.substr(0, 8), "EMAGCKPT");
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.params, m.params());
  EXPECT_EQ(back.config.hash(), m.config().hash());
  EXPECT_EQ(back.provenance["seed"], 3);
  EXPECT_FALSE(back.optimizer.has_value());
  const Model restored = back.to_model();
  const Sample s = tiny_sample();
  EXPECT_EQ(restored.predict(s.ld), m.predict(s.ld));
  EXPECT_EQ(bytes.size(), 20 + header_length(bytes) + 8 * static_cast<std::size_t>(m.params().size()));
}

TEST(Checkpoint, OptimizerStatePersists) {
  Model m(tiny_config());
  AdamState st;
  st.reset(m.params().size());
  st.m.setConstant(0.25);
  st.v.setConstant(0.5);
  st.step = 12;
  const auto back = decode_checkpoint(encode_checkpoint(ModelCheckpoint::from_model(m, {}, &st)));
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 12);
  EXPECT_EQ(back.optimizer->m, st.m);
  EXPECT_EQ(back.optimizer->v, st.v);
}

TEST(Checkpoint, HeaderFields) {
  Model m(tiny_config());
  const std::string bytes = encode_checkpoint(ModelCheckpoint::from_model(m));
  const auto h = nlohmann::json::parse(bytes.substr(20, header_length(bytes)));
  EXPECT_EQ(h["format_version"], 1);
  EXPECT_EQ(h["param_total"], m.params().size());
  EXPECT_EQ(h["param_count"], m.parameter_count());
  EXPECT_EQ(h["config_hash"], m.config().hash());
  EXPECT_EQ(h["montage_hash"], m.config().hd_montage.hash());
  EXPECT_EQ(h["param_sha256"].get<std::string>().size(), 64u);
}

TEST(Checkpoint, CorruptionDetected) {
  Model m(tiny_config());
  perturb(m);
  const std::string bytes = encode_checkpoint(ModelCheckpoint::from_model(m));
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + std::string(8, '\0')), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), FormatError);
  std::string ver = bytes;
  ver[8] = 9;
  EXPECT_THROW(decode_checkpoint(ver), FormatError);
  std::string flipped = bytes;
  flipped[flipped.size() - 1] ^= 0x10;
  EXPECT_THROW(decode_checkpoint(flipped), FormatError);
}

TEST(Checkpoint, HashMismatchOverridableWithForce) {
  Model m(tiny_config());
  std::string bytes = encode_checkpoint(ModelCheckpoint::from_model(m));
  const std::string hash = m.config().hash();
  const auto pos = bytes.find(hash);
  ASSERT_NE(pos, std::string::npos);
  bytes[pos] = bytes[pos] == 'a' ? 'b' : 'a';
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
  EXPECT_NO_THROW(decode_checkpoint(bytes, true));
}

TEST(Checkpoint, FileRoundTrip) {
  Model m(tiny_config());
  perturb(m);
  const fs::path p = fs::temp_directory_path() / ("emag_ckpt_" + std::to_string(::getpid()) + ".ckpt");
  save_checkpoint(ModelCheckpoint::from_model(m), p.string());
  EXPECT_EQ(load_checkpoint(p.string()).params, m.params());
  fs::remove(p);
  EXPECT_THROW(load_checkpoint(p.string()), Error);
}
