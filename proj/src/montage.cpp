#include "emag/montage.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace emag {

using nlohmann::json;

Montage::Montage(std::string name, std::vector<Electrode> electrodes)
    : name_(std::move(name)), electrodes_(std::move(electrodes)) {
  if (electrodes_.empty()) throw ValidationError("montage has zero channels");
  std::set<std::string> seen;
  for (const auto& e : electrodes_) {
    if (e.label.empty()) throw ValidationError("montage electrode with empty label");
    if (!e.position.allFinite())
      throw ValidationError("montage electrode '" + e.label + "' has a non-finite position");
    if (!seen.insert(to_lower_ascii(e.label)).second)
      throw ValidationError("duplicate electrode label '" + e.label + "'");
  }
}

std::vector<std::string> Montage::labels() const {
  std::vector<std::string> out;
  out.reserve(electrodes_.size());
  for (const auto& e : electrodes_) out.push_back(e.label);
  return out;
}

Positions Montage::positions() const {
  Positions p(size(), 3);
  for (int i = 0; i < size(); ++i) p.row(i) = electrodes_[static_cast<std::size_t>(i)].position.transpose();
  return p;
}

std::optional<int> Montage::index_of(const std::string& label) const {
  const std::string key = to_lower_ascii(label);
  for (int i = 0; i < size(); ++i)
    if (to_lower_ascii(electrodes_[static_cast<std::size_t>(i)].label) == key) return i;
  return std::nullopt;
}

Montage Montage::subset(const std::vector<int>& indices) const {
  std::vector<Electrode> picked;
  picked.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= size()) throw ValidationError("subset index out of range: " + std::to_string(i));
    picked.push_back(electrodes_[static_cast<std::size_t>(i)]);
  }
  return Montage(name_ + "-subset", std::move(picked));
}

std::string Montage::hash() const {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed;
  for (const auto& e : electrodes_)
    ss << e.label << ':' << e.position.x() << ',' << e.position.y() << ',' << e.position.z() << ';';
  return sha256_hex(ss.str());
}

json Montage::to_json() const {
  json els = json::array();
  for (const auto& e : electrodes_)
    els.push_back({{"label", e.label}, {"pos", {e.position.x(), e.position.y(), e.position.z()}}});
  return {{"name", name_}, {"unit", "mm"}, {"electrodes", els}};
}

Montage Montage::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("montage: top level must be an object");
  if (j.contains("unit") && j.at("unit") != "mm")
    throw ParseError("montage: unsupported unit " + j.at("unit").dump() + " (expected \"mm\")");
  if (!j.contains("electrodes") || !j.at("electrodes").is_array())
    throw ParseError("montage: missing field 'electrodes' (array)");
  std::vector<Electrode> els;
  const auto& arr = j.at("electrodes");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string where = "montage: electrodes[" + std::to_string(i) + "]";
    if (!e.contains("label") || !e.at("label").is_string())
      throw ParseError(where + ".label missing or not a string");
    if (!e.contains("pos") || !e.at("pos").is_array() || e.at("pos").size() != 3)
      throw ParseError(where + ".pos must be an array of 3 numbers");
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      if (!e.at("pos")[static_cast<std::size_t>(k)].is_number())
        throw ParseError(where + ".pos[" + std::to_string(k) + "] is not a number");
      p[k] = e.at("pos")[static_cast<std::size_t>(k)].get<double>();
    }
    els.push_back({e.at("label").get<std::string>(), p});
  }
  return Montage(j.value("name", std::string("unnamed")), std::move(els));
}

Montage load_montage(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("montage " + path + ": " + e.what());
  }
  return Montage::from_json(j);
}

void save_montage(const Montage& montage, const std::string& path) {
  write_file_atomic(path, montage.to_json().dump(2) + "\n");
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 unit_from_angles(double polar_deg, double azimuth_deg) {
  // azimuth measured from anterior (+y) toward right (+x); polar from vertex (+z).
  const double th = polar_deg * kDeg, ph = azimuth_deg * kDeg;
  return {std::sin(th) * std::sin(ph), std::sin(th) * std::cos(ph), std::cos(th)};
}

Vec3 slerp(const Vec3& a, const Vec3& b, double f) {
  const double omega = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  if (omega < 1e-12) return a;
  return (std::sin((1 - f) * omega) * a + std::sin(f * omega) * b) / std::sin(omega);
}

}  // namespace

Montage seed62_montage() {
  // Electrode "equator" sits 72 deg from the vertex (10% above nasion/inion/preauricular).
  // Row r has its midline point at sagittal offset alpha and its lateral end (digit 7/8)
  // on the equator; digits 1..8 are spaced evenly along the great-circle arc.
  constexpr double kRing = 72.0;
  constexpr double kRadius = 100.0;
  struct Row {
    const char* prefix;
    double alpha;     // signed sagittal angle of the midline point (anterior positive)
    double end_azim;  // azimuth of the digit-7/8 end on the equator
  };
  const Row rows[] = {{"AF", 54, 36},  {"F", 36, 54},    {"FC", 18, 72}, {"C", 0, 90},
                      {"CP", -18, 108}, {"P", -36, 126}, {"PO", -54, 144}};
  auto midline = [](double alpha) {
    return alpha >= 0 ? unit_from_angles(alpha, 0.0) : unit_from_angles(-alpha, 180.0);
  };
  auto row_point = [&](const Row& r, int digit) -> Vec3 {
    if (digit == 0) return midline(r.alpha);
    const bool right = digit % 2 == 0;
    const int k = right ? digit / 2 : (digit + 1) / 2;
    const Vec3 end = unit_from_angles(kRing, right ? r.end_azim : -r.end_azim);
    return slerp(midline(r.alpha), end, k / 4.0);
  };
  auto find_row = [&](const std::string& p) -> const Row& {
    for (const auto& r : rows)
      if (p == r.prefix) return r;
    throw Error("seed62: unknown row " + p);
  };

  const char* order[] = {"FP1", "FPZ", "FP2", "AF3", "AF4", "F7",  "F5",  "F3",  "F1",  "FZ",  "F2",
                         "F4",  "F6",  "F8",  "FT7", "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6",
                         "FT8", "T7",  "C5",  "C3",  "C1",  "CZ",  "C2",  "C4",  "C6",  "T8",  "TP7",
                         "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8", "P7",  "P5",  "P3",
                         "P1",  "PZ",  "P2",  "P4",  "P6",  "P8",  "PO7", "PO5", "PO3", "POZ", "PO4",
                         "PO6", "PO8", "CB1", "O1",  "OZ",  "O2",  "CB2"};
  std::vector<Electrode> els;
  for (const char* raw : order) {
    const std::string label = raw;
    Vec3 u;
    if (label == "FP1") u = unit_from_angles(kRing, -18);
    else if (label == "FPZ") u = unit_from_angles(kRing, 0);
    else if (label == "FP2") u = unit_from_angles(kRing, 18);
    else if (label == "O1") u = unit_from_angles(kRing, -162);
    else if (label == "OZ") u = unit_from_angles(kRing, 180);
    else if (label == "O2") u = unit_from_angles(kRing, 162);
    else if (label == "CB1") u = unit_from_angles(100, -150);
    else if (label == "CB2") u = unit_from_angles(100, 150);
    else if (label == "T7") u = row_point(find_row("C"), 7);
    else if (label == "T8") u = row_point(find_row("C"), 8);
    else if (label == "FT7") u = row_point(find_row("FC"), 7);
    else if (label == "FT8") u = row_point(find_row("FC"), 8);
    else if (label == "TP7") u = row_point(find_row("CP"), 7);
    else if (label == "TP8") u = row_point(find_row("CP"), 8);
    else {
      const std::size_t split = label.find_first_of("Z123456789");
      const std::string prefix = label.substr(0, split);
      const char d = label[split];
      u = row_point(find_row(prefix), d == 'Z' ? 0 : d - '0');
    }
    els.push_back({label, kRadius * u});
  }
  return Montage("seed62", std::move(els));
}

SubsetSpec SubsetSpec::random(std::uint64_t seed, int m) {
  SubsetSpec s;
  s.kind = Kind::Random;
  s.seed = seed;
  s.target_count = m;
  return s;
}

SubsetSpec SubsetSpec::named(std::string id) {
  SubsetSpec s;
  s.kind = Kind::Named;
  s.id = std::move(id);
  return s;
}

SubsetSpec SubsetSpec::explicit_labels(std::vector<std::string> labels) {
  SubsetSpec s;
  s.kind = Kind::ExplicitLabels;
  s.target_count = static_cast<int>(labels.size());
  s.labels = std::move(labels);
  return s;
}

std::string SubsetSpec::key() const {
  switch (kind) {
    case Kind::Random:
      return "random:s" + std::to_string(seed) + ":m" + std::to_string(target_count);
    case Kind::Named:
      return "named:" + canonical_subset_id(id).value_or(id);
    case Kind::ExplicitLabels: {
      std::string joined;
      for (const auto& l : labels) joined += l + ",";
      return "labels:" + sha256_hex(joined).substr(0, 12);
    }
  }
  return "?";
}

json SubsetSpec::to_json() const {
  switch (kind) {
    case Kind::Random:
      return {{"kind", "random"}, {"seed", seed}, {"m", target_count}};
    case Kind::Named:
      return {{"kind", "named"}, {"id", canonical_subset_id(id).value_or(id)}};
    case Kind::ExplicitLabels:
      return {{"kind", "labels"}, {"labels", labels}};
  }
  return {};
}

SubsetSpec SubsetSpec::from_json(const json& j) {
  const std::string kind = j.value("kind", std::string("random"));
  if (kind == "random") return random(j.value("seed", std::uint64_t{0}), j.value("m", 0));
  if (kind == "named") {
    if (!j.contains("id")) throw ParseError("subset spec: named subset needs 'id'");
    return named(j.at("id").get<std::string>());
  }
  if (kind == "labels") {
    if (!j.contains("labels")) throw ParseError("subset spec: 'labels' missing");
    return explicit_labels(j.at("labels").get<std::vector<std::string>>());
  }
  throw ParseError("subset spec: unknown kind '" + kind + "'");
}

const std::map<std::string, std::vector<std::string>>& named_subset_catalog() {
  static const std::map<std::string, std::vector<std::string>> catalog = {
      {"Hemi-Left",
       {"FP1", "AF3", "F7", "F5", "F3", "F1", "FT7", "FC5", "FC3", "FC1", "T7",
        "C5",  "C3",  "C1", "TP7", "CP5", "CP3", "CP1", "P7", "P5", "P3", "P1",
        "PO7", "PO5", "PO3", "CB1", "O1", "FZ", "CZ", "PZ", "OZ"}},
      {"Hemi-Right",
       {"FP2", "AF4", "F8", "F6", "F4", "F2", "FT8", "FC6", "FC4", "FC2", "T8",
        "C6",  "C4",  "C2", "TP8", "CP6", "CP4", "CP2", "P8", "P6", "P4", "P2",
        "PO8", "PO6", "PO4", "CB2", "O2", "FZ", "CZ", "PZ", "OZ"}},
      {"V15",
       {"FP1", "FP2", "F7", "F8", "FT7", "FT8", "T7", "T8", "TP7", "TP8", "P7", "P8", "PO7", "O1",
        "O2"}},
      {"FT15",
       {"FP1", "FP2", "F3", "F4", "F7", "F8", "FC5", "FC6", "FT7", "FT8", "T7", "T8", "TP7", "TP8",
        "P7"}},
      {"INT15",
       {"AF3", "AF4", "F1", "F2", "FZ", "FC1", "FC2", "C1", "C2", "CZ", "CP1", "CP2", "P1", "P2",
        "PZ"}},
      {"VL7", {"FP1", "F7", "FT7", "T7", "TP7", "P7", "O1"}},
      {"VR7", {"FP2", "F8", "FT8", "T8", "TP8", "P8", "O2"}},
      {"VU7", {"FP1", "FP2", "F7", "F8", "FT7", "FT8", "T7"}},
      {"VLw7", {"TP7", "TP8", "P7", "P8", "PO7", "O1", "O2"}},
      {"INT7", {"FZ", "FC1", "FC2", "CZ", "CP1", "CP2", "PZ"}},
  };
  return catalog;
}

std::optional<std::string> canonical_subset_id(const std::string& id) {
  const std::string key = to_lower_ascii(id);
  for (const auto& [name, _] : named_subset_catalog())
    if (to_lower_ascii(name) == key) return name;
  return std::nullopt;
}

int ld_count_for_factor(int M, double r) {
  require(r > 1.0, "super-resolution factor must exceed 1");
  return std::max(1, static_cast<int>(std::floor(M / r + 1e-9)));
}

namespace {

std::vector<int> indices_for_labels(const Montage& montage, const std::vector<std::string>& labels,
                                    const std::string& context) {
  std::vector<int> idx;
  std::set<int> seen;
  for (const auto& l : labels) {
    auto i = montage.index_of(l);
    if (!i) throw ValidationError(context + ": label '" + l + "' not in montage '" + montage.name() + "'");
    if (!seen.insert(*i).second) throw ValidationError(context + ": label '" + l + "' listed twice");
    idx.push_back(*i);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<int> select_subset(const Montage& montage, const SubsetSpec& spec) {
  const int M = montage.size();
  switch (spec.kind) {
    case SubsetSpec::Kind::Random: {
      const int m = spec.target_count;
      if (m < 1 || m > M)
        throw ValidationError("random subset size " + std::to_string(m) + " outside [1, " +
                              std::to_string(M) + "]");
      // Partial Fisher-Yates on a stream keyed by the seed and the montage content.
      const std::string h = montage.hash();
      Rng rng(mix_seed(spec.seed, std::stoull(h.substr(0, 15), nullptr, 16),
                       static_cast<std::uint64_t>(m)));
      std::vector<int> perm(static_cast<std::size_t>(M));
      for (int i = 0; i < M; ++i) perm[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < m; ++i) {
        const auto j = static_cast<int>(i + rng.below(static_cast<std::uint64_t>(M - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      }
      std::vector<int> out(perm.begin(), perm.begin() + m);
      std::sort(out.begin(), out.end());
      return out;
    }
    case SubsetSpec::Kind::Named: {
      const auto id = canonical_subset_id(spec.id);
      if (!id) throw ValidationError("unknown named subset '" + spec.id + "'");
      return indices_for_labels(montage, named_subset_catalog().at(*id), "named subset " + *id);
    }
    case SubsetSpec::Kind::ExplicitLabels:
      if (spec.labels.empty()) throw ValidationError("explicit subset is empty");
      return indices_for_labels(montage, spec.labels, "explicit subset");
  }
  throw ValidationError("unknown subset kind");
}

}  // namespace emag
