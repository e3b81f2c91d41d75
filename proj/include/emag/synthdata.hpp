#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "emag/eegd.hpp"
#include "emag/gaussfield.hpp"
#include "emag/montage.hpp"

namespace emag {

enum class EnvelopeKind { Sine, Burst };

/// One planted source: an anisotropic 4D Gaussian with a time-varying amplitude.
struct PlantedSource {
  Vec3 position = Vec3::Zero();  // mm
  CholeskyFactor chol;
  double temporal_center = 0.5;
  EnvelopeKind envelope = EnvelopeKind::Sine;
  double freq_hz = 6.0;     // Sine
  double width = 0.1;       // Burst, normalised time
  double peak = 1.0;

  nlohmann::json to_json() const;
  static PlantedSource from_json(const nlohmann::json& j);
};

struct SynthSpec {
  int sources = 5;
  double noise_sigma = 0.1;
  int timesteps = 400;
  double rate_hz = 200.0;
  int trials = 40;
  int subjects = 3;
  std::uint64_t seed = 0;
  double brain_radius_mm = 90.0;
  /// Scale peaks so the clean signal has unit mean power per subject.
  bool calibrate_power = true;
  /// Random per-trial phase / burst timing; off gives identical envelopes on every trial.
  bool randomize_trials = true;
  /// Explicit per-subject layouts; random layouts are drawn when empty.
  std::vector<std::vector<PlantedSource>> layouts;
  Montage montage = seed62_montage();

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected; "montage" may be "seed62" or an inline montage object.
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SubjectData {
  std::string id;
  std::vector<EegRecording> trials;  // HD, channel order of the dataset montage
  std::vector<PlantedSource> truth;  // empty for non-synthetic data
};

struct Dataset {
  Montage montage;
  double rate_hz = 0.0;
  std::vector<SubjectData> subjects;

  const SubjectData& subject(const std::string& id) const;
};

/// Field holding one component per planted source (centres at the source positions).
GaussianField planted_field(const std::vector<PlantedSource>& sources);
/// Envelope values (sources x T) for one trial of a subject.
Mat planted_amplitudes(const std::vector<PlantedSource>& sources, int T, double rate_hz, bool randomize, Rng& rng);
/// Random layout of k sources inside the brain sphere.
std::vector<PlantedSource> random_layout(int k, double brain_radius_mm, Rng& rng);

Dataset generate(const SynthSpec& spec);

/// dir/manifest.json, dir/truth.json, dir/<subject>/trial_NNNN.eegd.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

struct DatasetManifest {
  std::vector<std::string> split;  // per trial
  Vec mean, std;                   // per channel, train split only
  std::uint64_t seed = 0;
  int n_train = 0, n_val = 0, n_test = 0;

  nlohmann::json to_json() const;
  std::string hash() const;
};

/// Shuffles with `seed` and assigns 70/10/20 train/val/test, then z-scores every trial per
/// channel with train-split statistics. Modifies the trials in place.
DatasetManifest split_and_normalize(std::vector<EegRecording>& trials, std::uint64_t seed);

/// Row selection in index order.
EegRecording make_ld(const EegRecording& rec, const std::vector<int>& indices);

}  // namespace emag
