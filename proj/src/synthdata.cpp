#include "emag/synthdata.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

namespace emag {

using nlohmann::json;
namespace fs = std::filesystem;

json PlantedSource::to_json() const {
  return {{"position", {position.x(), position.y(), position.z()}},
          {"log_diag", chol.log_diag},
          {"offdiag", chol.offdiag},
          {"temporal_center", temporal_center},
          {"envelope", envelope == EnvelopeKind::Sine ? "sine" : "burst"},
          {"freq_hz", freq_hz},
          {"width", width},
          {"peak", peak}};
}

PlantedSource PlantedSource::from_json(const json& j) {
  PlantedSource s;
  try {
    const auto p = j.at("position").get<std::vector<double>>();
    if (p.size() != 3) throw ParseError("source: position needs 3 entries");
    s.position = Vec3(p[0], p[1], p[2]);
    if (j.contains("log_diag")) s.chol.log_diag = j.at("log_diag").get<std::array<double, 4>>();
    if (j.contains("offdiag")) s.chol.offdiag = j.at("offdiag").get<std::array<double, 6>>();
    s.temporal_center = j.value("temporal_center", 0.5);
    const std::string env = j.value("envelope", std::string("sine"));
    if (env == "sine") s.envelope = EnvelopeKind::Sine;
    else if (env == "burst") s.envelope = EnvelopeKind::Burst;
    else throw ParseError("source: unknown envelope '" + env + "'");
    s.freq_hz = j.value("freq_hz", 6.0);
    s.width = j.value("width", 0.1);
    s.peak = j.value("peak", 1.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("source: ") + e.what());
  }
  return s;
}

void SynthSpec::validate() const {
  require(sources >= 1 || !layouts.empty(), "synth: need at least one source");
  require(noise_sigma >= 0.0, "synth: noise_sigma must be >= 0");
  require(timesteps >= 1 && trials >= 1 && subjects >= 1 && rate_hz > 0.0, "synth: sizes must be positive");
  require(layouts.empty() || static_cast<int>(layouts.size()) == subjects,
          "synth: explicit layouts must be given for every subject");
  for (const auto& layout : layouts)
    for (const auto& s : layout)
      if (s.position.norm() > brain_radius_mm)
        throw ValidationError("synth: source at radius " + std::to_string(s.position.norm()) +
                              " mm lies outside the " + std::to_string(brain_radius_mm) + " mm brain sphere");
}

json SynthSpec::to_json() const {
  json lay = json::array();
  for (const auto& l : layouts) {
    json a = json::array();
    for (const auto& s : l) a.push_back(s.to_json());
    lay.push_back(a);
  }
  return {{"sources", sources},
          {"noise_sigma", noise_sigma},
          {"timesteps", timesteps},
          {"rate_hz", rate_hz},
          {"trials", trials},
          {"subjects", subjects},
          {"seed", seed},
          {"brain_radius_mm", brain_radius_mm},
          {"calibrate_power", calibrate_power},
          {"randomize_trials", randomize_trials},
          {"layouts", lay},
          {"montage", montage.to_json()}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("synth spec: expected an object");
  SynthSpec s;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "sources") s.sources = v.get<int>();
      else if (k == "noise_sigma") s.noise_sigma = v.get<double>();
      else if (k == "timesteps") s.timesteps = v.get<int>();
      else if (k == "rate_hz") s.rate_hz = v.get<double>();
      else if (k == "trials") s.trials = v.get<int>();
      else if (k == "subjects") s.subjects = v.get<int>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "brain_radius_mm") s.brain_radius_mm = v.get<double>();
      else if (k == "calibrate_power") s.calibrate_power = v.get<bool>();
      else if (k == "randomize_trials") s.randomize_trials = v.get<bool>();
      else if (k == "layouts") {
        for (const auto& l : v) {
          std::vector<PlantedSource> layout;
          for (const auto& src : l) layout.push_back(PlantedSource::from_json(src));
          s.layouts.push_back(std::move(layout));
        }
      } else if (k == "montage") {
        if (v.is_string()) {
          if (to_lower_ascii(v.get<std::string>()) != "seed62")
            throw ParseError("synth spec: unknown built-in montage " + v.dump());
          s.montage = seed62_montage();
        } else {
          s.montage = Montage::from_json(v);
        }
      } else if (k == "$comment") {
      } else throw ParseError("synth spec: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

const SubjectData& Dataset::subject(const std::string& id) const {
  for (const auto& s : subjects)
    if (s.id == id) return s;
  throw ValidationError("dataset has no subject '" + id + "'");
}

GaussianField planted_field(const std::vector<PlantedSource>& sources) {
  GaussianField f;
  const int K = static_cast<int>(sources.size());
  f.anchors.resize(K, 3);
  f.per_point = 1;
  f.variant = PrecisionVariant::Full;
  for (int k = 0; k < K; ++k) {
    const auto& s = sources[static_cast<std::size_t>(k)];
    f.anchors.row(k) = s.position.transpose();
    GaussianComponent c;
    c.grid_index = k;
    c.amplitude = s.peak;
    c.temporal_center = s.temporal_center;
    c.chol = s.chol;
    f.components.push_back(c);
  }
  return f;
}

Mat planted_amplitudes(const std::vector<PlantedSource>& sources, int T, double rate_hz, bool randomize, Rng& rng) {
  const int K = static_cast<int>(sources.size());
  Mat a(K, T);
  for (int k = 0; k < K; ++k) {
    const auto& s = sources[static_cast<std::size_t>(k)];
    if (s.envelope == EnvelopeKind::Sine) {
      const double phase = randomize ? rng.uniform(0.0, 2.0 * std::numbers::pi) : std::numbers::pi / 2;
      for (int t = 0; t < T; ++t)
        a(k, t) = s.peak * std::sin(2.0 * std::numbers::pi * s.freq_hz * t / rate_hz + phase);
    } else {
      const double centre = randomize ? rng.uniform(0.2, 0.8) : s.temporal_center;
      const double sign = randomize ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : 1.0;
      for (int t = 0; t < T; ++t) {
        const double u = (normalized_time(t, T) - centre) / s.width;
        a(k, t) = sign * s.peak * std::exp(-0.5 * u * u);
      }
    }
  }
  return a;
}

std::vector<PlantedSource> random_layout(int k, double brain_radius_mm, Rng& rng) {
  std::vector<PlantedSource> out;
  for (int i = 0; i < k; ++i) {
    PlantedSource s;
    Vec3 dir;
    do {
      dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (dir.norm() < 1e-6 || dir.z() / dir.norm() < 0.05);
    const double radius = std::min(rng.uniform(50.0, 75.0), brain_radius_mm);
    s.position = radius * dir.normalized();

    // Spatial covariance R diag(s^2) R^T with a random rotation; broad in time.
    Eigen::Vector4d qv(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const Eigen::Matrix3d R = Eigen::Quaterniond(qv.normalized()).toRotationMatrix();
    const Eigen::Vector3d sd(rng.uniform(25.0, 40.0), rng.uniform(25.0, 40.0), rng.uniform(25.0, 40.0));
    const Eigen::Matrix3d cov = R * sd.cwiseAbs2().asDiagonal() * R.transpose();
    Eigen::Matrix4d prec = Eigen::Matrix4d::Zero();
    prec.topLeftCorner<3, 3>() = cov.inverse();
    prec(3, 3) = 1.0;
    const Eigen::Matrix4d L = prec.llt().matrixL();
    for (int d = 0; d < 4; ++d) s.chol.log_diag[static_cast<std::size_t>(d)] = std::log(L(d, d));
    s.chol.offdiag = {L(1, 0), L(2, 0), L(2, 1), L(3, 0), L(3, 1), L(3, 2)};
    s.temporal_center = rng.uniform(0.3, 0.7);
    s.envelope = i % 2 == 0 ? EnvelopeKind::Sine : EnvelopeKind::Burst;
    s.freq_hz = rng.uniform(2.0, 12.0);
    s.width = rng.uniform(0.05, 0.15);
    s.peak = 1.0;
    out.push_back(s);
  }
  return out;
}

namespace {
std::string subject_id(int s) { return "S" + std::to_string(s + 1); }
}  // namespace

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.montage = spec.montage;
  ds.rate_hz = spec.rate_hz;
  const Positions electrodes = spec.montage.positions();
  const int T = spec.timesteps;
  for (int s = 0; s < spec.subjects; ++s) {
    SubjectData sub;
    sub.id = subject_id(s);
    if (spec.layouts.empty()) {
      Rng lr(mix_seed(spec.seed, 0x4c41594f, static_cast<std::uint64_t>(s)));
      sub.truth = random_layout(spec.sources, spec.brain_radius_mm, lr);
    } else {
      sub.truth = spec.layouts[static_cast<std::size_t>(s)];
    }
    auto trial_rng = [&](int k) {
      return Rng(mix_seed(spec.seed, static_cast<std::uint64_t>(s) + 1, static_cast<std::uint64_t>(k)));
    };
    if (spec.calibrate_power) {
      const GaussianField f = planted_field(sub.truth);
      double power = 0.0;
      for (int k = 0; k < spec.trials; ++k) {
        Rng rng = trial_rng(k);
        power += render(f, electrodes, planted_amplitudes(sub.truth, T, spec.rate_hz, spec.randomize_trials, rng))
                     .squaredNorm();
      }
      power /= static_cast<double>(spec.trials) * electrodes.rows() * T;
      if (!(power > 0.0)) throw NumericError("synth: planted sources are invisible from the montage");
      for (auto& src : sub.truth) src.peak /= std::sqrt(power);
    }
    const GaussianField field = planted_field(sub.truth);
    for (int k = 0; k < spec.trials; ++k) {
      Rng rng = trial_rng(k);
      const Mat a = planted_amplitudes(sub.truth, T, spec.rate_hz, spec.randomize_trials, rng);
      EegRecording rec;
      rec.data = render(field, electrodes, a);
      if (spec.noise_sigma > 0.0)
        for (Eigen::Index j = 0; j < rec.data.rows(); ++j)
          for (Eigen::Index t = 0; t < rec.data.cols(); ++t) rec.data(j, t) += spec.noise_sigma * rng.normal();
      rec.rate_hz = spec.rate_hz;
      rec.labels = spec.montage.labels();
      rec.subject = sub.id;
      rec.trial = k;
      sub.trials.push_back(std::move(rec));
    }
    ds.subjects.push_back(std::move(sub));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json subjects = json::array();
  json truth = json::object();
  for (const auto& sub : ds.subjects) {
    fs::create_directories(fs::path(dir) / sub.id);
    json files = json::array();
    for (const auto& rec : sub.trials) {
      char name[32];
      std::snprintf(name, sizeof name, "trial_%04d.eegd", rec.trial);
      const std::string rel = sub.id + "/" + name;
      write_eegd(rec, (fs::path(dir) / rel).string());
      files.push_back(rel);
    }
    subjects.push_back({{"id", sub.id}, {"trials", files}});
    if (!sub.truth.empty()) {
      json src = json::array();
      for (const auto& s : sub.truth) src.push_back(s.to_json());
      truth[sub.id] = src;
    }
  }
  const json manifest = {{"format", "emag-dataset"}, {"version", 1},          {"rate_hz", ds.rate_hz},
                         {"montage", ds.montage.to_json()}, {"subjects", subjects}};
  write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  if (!truth.empty()) write_file_atomic((fs::path(dir) / "truth.json").string(), truth.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file((root / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw ParseError(dir + "/manifest.json: " + e.what());
  }
  Dataset ds;
  json truth = json::object();
  if (fs::exists(root / "truth.json")) truth = json::parse(read_file((root / "truth.json").string()));
  try {
    ds.montage = Montage::from_json(manifest.at("montage"));
    ds.rate_hz = manifest.at("rate_hz").get<double>();
    for (const auto& s : manifest.at("subjects")) {
      SubjectData sub;
      sub.id = s.at("id").get<std::string>();
      for (const auto& f : s.at("trials")) {
        EegRecording rec = read_eegd((root / f.get<std::string>()).string());
        if (rec.labels != ds.montage.labels())
          throw FormatError(f.get<std::string>() + ": channel labels differ from the dataset montage");
        sub.trials.push_back(std::move(rec));
      }
      if (truth.contains(sub.id))
        for (const auto& src : truth.at(sub.id)) sub.truth.push_back(PlantedSource::from_json(src));
      ds.subjects.push_back(std::move(sub));
    }
  } catch (const json::exception& e) {
    throw ParseError(dir + "/manifest.json: " + e.what());
  }
  return ds;
}

json DatasetManifest::to_json() const {
  return {{"split", split},
          {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"std", std::vector<double>(std.data(), std.data() + std.size())},
          {"seed", seed},
          {"n_train", n_train},
          {"n_val", n_val},
          {"n_test", n_test}};
}

std::string DatasetManifest::hash() const { return sha256_hex(to_json().dump()); }

DatasetManifest split_and_normalize(std::vector<EegRecording>& trials, std::uint64_t seed) {
  const int n = static_cast<int>(trials.size());
  if (n < 5) throw ValidationError("split: need at least 5 trials, got " + std::to_string(n));
  const auto M = trials.front().data.rows();
  for (const auto& t : trials)
    require(t.data.rows() == M, "split: trials have different channel counts");

  DatasetManifest man;
  man.seed = seed;
  man.n_test = static_cast<int>(std::lround(0.2 * n));
  man.n_val = std::max(1, static_cast<int>(std::lround(0.1 * n)));
  man.n_train = n - man.n_test - man.n_val;
  require(man.n_train >= 1, "split: no trials left for training");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x53504c54));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  man.split.assign(static_cast<std::size_t>(n), "");
  for (int i = 0; i < n; ++i) {
    const char* tag = i < man.n_train ? "train" : (i < man.n_train + man.n_val ? "val" : "test");
    man.split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = tag;
  }

  man.mean = Vec::Zero(M);
  man.std = Vec::Zero(M);
  double count = 0.0;
  for (int i = 0; i < n; ++i) {
    if (man.split[static_cast<std::size_t>(i)] != "train") continue;
    man.mean += trials[static_cast<std::size_t>(i)].data.rowwise().sum();
    count += static_cast<double>(trials[static_cast<std::size_t>(i)].data.cols());
  }
  man.mean /= count;
  for (int i = 0; i < n; ++i) {
    if (man.split[static_cast<std::size_t>(i)] != "train") continue;
    const Mat c = trials[static_cast<std::size_t>(i)].data.colwise() - man.mean;
    man.std += c.cwiseAbs2().rowwise().sum();
  }
  man.std = (man.std / count).cwiseSqrt();
  for (Eigen::Index j = 0; j < M; ++j)
    if (!(man.std[j] > 0.0))
      throw NumericError("split: channel " + std::to_string(j) + " has zero variance on the training split");
  const Vec inv = man.std.cwiseInverse();
  for (int i = 0; i < n; ++i) {
    auto& rec = trials[static_cast<std::size_t>(i)];
    rec.data = ((rec.data.colwise() - man.mean).array().colwise() * inv.array()).matrix();
    rec.split = man.split[static_cast<std::size_t>(i)];
  }
  return man;
}

EegRecording make_ld(const EegRecording& rec, const std::vector<int>& indices) {
  EegRecording out;
  out.data.resize(static_cast<Eigen::Index>(indices.size()), rec.data.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int i = indices[k];
    if (i < 0 || i >= rec.channels()) throw ValidationError("make_ld: channel index " + std::to_string(i) + " out of range");
    out.data.row(static_cast<Eigen::Index>(k)) = rec.data.row(i);
    if (!rec.labels.empty()) out.labels.push_back(rec.labels[static_cast<std::size_t>(i)]);
  }
  out.rate_hz = rec.rate_hz;
  out.subject = rec.subject;
  out.trial = rec.trial;
  out.split = rec.split;
  return out;
}

}  // namespace emag
