#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "emag/baselines.hpp"
#include "emag/braingrid.hpp"
#include "emag/conditioning.hpp"
#include "emag/gaussfield.hpp"
#include "emag/montage.hpp"

namespace emag {

enum class ForwardVariant {
  Gaussian,       // Gaussian-field rendering
  DirectMlp,      // encoder -> MLP -> HD channels, no source layer
  LearnedLinear,  // X = W a with a free M x N_total matrix
};

std::string to_string(ForwardVariant v);
ForwardVariant forward_variant_from_string(const std::string& s);

struct ModelConfig {
  GridSpec grid;
  int per_point = 3;
  PrecisionVariant precision = PrecisionVariant::Full;
  ConditioningVariant conditioning = ConditioningVariant::PerGridPoint;
  ForwardVariant forward = ForwardVariant::Gaussian;
  int features = 32;
  int hidden = 64;
  int direct_hidden = 0;  // 0: sized for parameter parity with the Gaussian model
  SplineConfig spline;
  std::uint64_t init_seed = 0;
  double init_spatial_std_mm = 15.0;
  double init_temporal_std = 0.1;
  double init_mu_max = 0.5;
  Montage hd_montage;
  std::vector<std::string> ld_labels;

  nlohmann::json to_json() const;
  /// Unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
  /// SHA-256 of the canonical JSON.
  std::string hash() const;
};

/// One named block of the flat parameter vector (row-major rows x cols).
struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  Eigen::Index rows = 0, cols = 0;
  bool regularized = false;
  Eigen::Index size() const { return rows * cols; }
};

class ParamLayout {
 public:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols, bool regularized = false);
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const ParamGroup* find(const std::string& name) const;
  const ParamGroup& at(const std::string& name) const;
  std::size_t total() const { return total_; }
  /// Group owning flat index i.
  const ParamGroup& group_of(std::size_t i) const;
  nlohmann::json to_json() const;

 private:
  std::vector<ParamGroup> groups_;
  std::size_t total_ = 0;
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const BrainGrid& grid() const { return grid_; }
  const ParamLayout& layout() const { return layout_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  /// 1 for learnable entries, 0 for entries fixed by the variant.
  const Vec& mask() const { return mask_; }

  int grid_points() const { return grid_.size(); }
  int components() const { return grid_.size() * cfg_.per_point; }
  int hd_channels() const { return cfg_.hd_montage.size(); }
  int ld_channels() const { return static_cast<int>(cfg_.ld_labels.size()); }
  int encoder_width() const;
  int direct_hidden() const { return direct_hidden_; }
  /// Learnable scalar count (masked entries excluded).
  long parameter_count() const;
  const std::vector<int>& ld_indices() const { return ld_indices_; }
  Positions ld_positions() const;

  void initialize(std::uint64_t seed);

  /// Map into the parameter vector for a group.
  ConstMatMap group(const std::string& name) const;
  MatMap group(const std::string& name);

  /// Geometry of the current parameters as a field (Gaussian forward only).
  GaussianField field() const;
  FieldView field_view() const;

  /// Delta w for each timestep (N or 1 rows); zeros for static conditioning.
  Mat modulation(const Mat& X_ld) const;
  Mat amplitudes(const Mat& X_ld) const;

  /// Prediction on the training HD montage.
  Mat predict(const Mat& X_ld) const;
  /// Prediction on arbitrary electrodes (Gaussian forward only).
  Mat predict(const Mat& X_ld, const Positions& electrodes) const;

  /// Mean squared error against target; adds dMSE/dparams into *grad when given.
  double mse(const Mat& X_ld, const Mat& target, int chunk_T, Vec* grad) const;

 private:
  ModelConfig cfg_;
  BrainGrid grid_;
  ParamLayout layout_;
  Vec params_, mask_;
  Positions anchor_centers_;  // N_total x 3
  std::vector<int> ld_indices_;
  Mat spline_;  // M x m, PreInterpolated only
  int direct_hidden_ = 0;

  Mat encoder_input(const Mat& X_ld) const;
  TemporalEncoder encoder() const;
  ModulationMlp mlp() const;
  void check_ld(const Mat& X_ld) const;
};

/// Parameter count of the Gaussian/per-grid-point model with cfg's sizes.
long gaussian_parameter_count(const ModelConfig& cfg);

}  // namespace emag
