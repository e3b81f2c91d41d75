#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "emag/montage.hpp"

using namespace emag;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("emag_montage_" + name)).string();
}

}  // namespace

TEST(Montage, ShippedFileMatchesBuiltIn) {
  const Montage m = load_montage(EMAG_DATA_DIR "/montage_seed62.json");
  EXPECT_EQ(m.size(), 62);
  EXPECT_EQ(m[0].label, "FP1");
  EXPECT_EQ(m.hash(), seed62_montage().hash());
}

TEST(Montage, ElectrodesSitOutsideTheBrainSphere) {
  for (const auto& e : seed62_montage().electrodes()) {
    EXPECT_NEAR(e.position.norm(), 100.0, 1e-9) << e.label;
  }
}

TEST(Montage, ZeroChannelsRejected) {
  const std::string p = tmp_path("empty.json");
  write_file_atomic(p, R"({"name":"x","unit":"mm","electrodes":[]})");
  try {
    load_montage(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("montage has zero channels"), std::string::npos);
  }
}

TEST(Montage, DuplicateLabelRejected) {
  const std::string p = tmp_path("dup.json");
  write_file_atomic(p, R"({"name":"x","unit":"mm","electrodes":[{"label":"CZ","pos":[0,0,1]},{"label":"CZ","pos":[0,1,0]}]})");
  EXPECT_THROW(load_montage(p), ValidationError);
}

TEST(Montage, ParseErrorNamesTheField) {
  const std::string p = tmp_path("bad.json");
  write_file_atomic(p, R"({"name":"x","unit":"mm","electrodes":[{"label":"CZ","pos":[0,"a",1]}]})");
  try {
    load_montage(p);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("pos[1]"), std::string::npos) << e.what();
  }
}

TEST(Montage, SaveLoadRoundTrip) {
  const std::string p = tmp_path("rt.json");
  save_montage(seed62_montage(), p);
  const Montage m = load_montage(p);
  EXPECT_EQ(m.labels(), seed62_montage().labels());
  EXPECT_EQ(m.hash(), seed62_montage().hash());
}

TEST(Subset, NamedInt7) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::named("INT7"));
  ASSERT_EQ(idx.size(), 7u);
  std::set<std::string> got;
  for (int i : idx) got.insert(m[i].label);
  EXPECT_EQ(got, (std::set<std::string>{"FZ", "FC1", "FC2", "CZ", "CP1", "CP2", "PZ"}));
}

TEST(Subset, NamedIdsAreCaseInsensitive) {
  const Montage m = seed62_montage();
  EXPECT_EQ(select_subset(m, SubsetSpec::named("int7")), select_subset(m, SubsetSpec::named("INT7")));
  EXPECT_EQ(canonical_subset_id("hemi-left").value(), "Hemi-Left");
  EXPECT_FALSE(canonical_subset_id("nope").has_value());
}

TEST(Subset, RandomFullSizeIsIdentity) {
  const auto idx = select_subset(seed62_montage(), SubsetSpec::random(0, 62));
  ASSERT_EQ(idx.size(), 62u);
  for (int i = 0; i < 62; ++i) EXPECT_EQ(idx[static_cast<std::size_t>(i)], i);
}

TEST(Subset, RandomIsDeterministic) {
  const Montage m = seed62_montage();
  EXPECT_EQ(select_subset(m, SubsetSpec::random(0, 31)), select_subset(m, SubsetSpec::random(0, 31)));
  EXPECT_NE(select_subset(m, SubsetSpec::random(0, 31)), select_subset(m, SubsetSpec::random(1, 31)));
}

TEST(Subset, RandomPropertiesOverSeedsAndSizes) {
  const Montage m = seed62_montage();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int k : {1, 7, 15, 31, 61, 62}) {
      const auto idx = select_subset(m, SubsetSpec::random(seed, k));
      ASSERT_EQ(static_cast<int>(idx.size()), k);
      EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
      EXPECT_EQ(std::set<int>(idx.begin(), idx.end()).size(), idx.size());
      EXPECT_GE(idx.front(), 0);
      EXPECT_LT(idx.back(), 62);
    }
  }
}

TEST(Subset, NamedLabelAbsentFromMontage) {
  const Montage small("small", {{"FZ", {0, 1, 1}}, {"CZ", {0, 0, 1}}, {"PZ", {0, -1, 1}}});
  EXPECT_THROW(select_subset(small, SubsetSpec::named("INT7")), ValidationError);
}

TEST(Subset, ExplicitLabelsKeepMontageOrder) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::explicit_labels({"PZ", "FZ"}));
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(m[idx[0]].label, "FZ");
  EXPECT_EQ(m[idx[1]].label, "PZ");
  EXPECT_THROW(select_subset(m, SubsetSpec::explicit_labels({"FZ", "XX"})), ValidationError);
}

TEST(Catalog, HasTenEntries) { EXPECT_EQ(named_subset_catalog().size(), 10u); }

TEST(Catalog, VL7) {
  EXPECT_EQ(named_subset_catalog().at("VL7"),
            (std::vector<std::string>{"FP1", "F7", "FT7", "T7", "TP7", "P7", "O1"}));
}

TEST(Catalog, HemiLeftHas31IncludingMidline) {
  const auto& h = named_subset_catalog().at("Hemi-Left");
  EXPECT_EQ(h.size(), 31u);
  for (const char* mid : {"FZ", "CZ", "PZ", "OZ"}) EXPECT_NE(std::find(h.begin(), h.end(), mid), h.end()) << mid;
}

TEST(Catalog, SizesAndMembership) {
  const Montage m = seed62_montage();
  const std::map<std::string, std::size_t> sizes = {{"Hemi-Left", 31}, {"Hemi-Right", 31}, {"V15", 15},
                                                    {"FT15", 15},      {"INT15", 15},      {"VL7", 7},
                                                    {"VR7", 7},        {"VU7", 7},         {"VLw7", 7},
                                                    {"INT7", 7}};
  for (const auto& [id, labels] : named_subset_catalog()) {
    EXPECT_EQ(labels.size(), sizes.at(id)) << id;
    EXPECT_EQ(std::set<std::string>(labels.begin(), labels.end()).size(), labels.size()) << id;
    for (const auto& l : labels) EXPECT_TRUE(m.index_of(l).has_value()) << id << " " << l;
  }
}

TEST(Subset, FactorToCount) {
  EXPECT_EQ(ld_count_for_factor(62, 2), 31);
  EXPECT_EQ(ld_count_for_factor(62, 4), 15);
  EXPECT_EQ(ld_count_for_factor(62, 8), 7);
}
