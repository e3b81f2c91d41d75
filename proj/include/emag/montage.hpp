#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "emag/common.hpp"

namespace emag {

struct Electrode {
  std::string label;
  Vec3 position;  // mm, head-centred
};

/// Ordered electrode set. Order is the canonical channel order of a dataset.
class Montage {
 public:
  Montage() = default;
  Montage(std::string name, std::vector<Electrode> electrodes);

  const std::string& name() const { return name_; }
  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  int size() const { return static_cast<int>(electrodes_.size()); }
  const Electrode& operator[](int i) const { return electrodes_.at(static_cast<std::size_t>(i)); }

  std::vector<std::string> labels() const;
  Positions positions() const;
  /// Case-insensitive label lookup.
  std::optional<int> index_of(const std::string& label) const;
  /// Restricts to the given channel indices, in the given order.
  Montage subset(const std::vector<int>& indices) const;

  /// SHA-256 over labels and positions (positions rounded to 1e-6 mm).
  std::string hash() const;

  nlohmann::json to_json() const;
  static Montage from_json(const nlohmann::json& j);

 private:
  std::string name_;
  std::vector<Electrode> electrodes_;
};

Montage load_montage(const std::string& path);
void save_montage(const Montage& montage, const std::string& path);

/// The 62-channel SEED-order cap on a 100 mm sphere (10-10 placement).
Montage seed62_montage();

struct SubsetSpec {
  enum class Kind { Random, Named, ExplicitLabels };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;             // Random
  std::string id;                     // Named
  std::vector<std::string> labels;    // ExplicitLabels
  int target_count = 0;               // Random; derived for the other kinds

  static SubsetSpec random(std::uint64_t seed, int m);
  static SubsetSpec named(std::string id);
  static SubsetSpec explicit_labels(std::vector<std::string> labels);

  /// Short stable description, e.g. "random:s0:m31" or "named:INT7".
  std::string key() const;
  nlohmann::json to_json() const;
  static SubsetSpec from_json(const nlohmann::json& j);
};

/// Indices into the montage, sorted ascending.
std::vector<int> select_subset(const Montage& montage, const SubsetSpec& spec);

/// The ten named electrode subsets, keyed by their canonical ids.
const std::map<std::string, std::vector<std::string>>& named_subset_catalog();

/// Canonical id for a case-insensitive name ("int7" → "INT7"); nullopt if unknown.
std::optional<std::string> canonical_subset_id(const std::string& id);

/// Number of LD channels for super-resolution factor r on M channels (floor(M/r)).
int ld_count_for_factor(int M, double r);

}  // namespace emag
