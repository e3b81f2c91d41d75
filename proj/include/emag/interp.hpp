#pragma once

#include <vector>

#include "json.hpp"

#include "emag/model.hpp"

namespace emag {

struct ComponentScore {
  int component = 0;
  double score = 0.0;
  int rank = 0;  // 0 = highest score
};

enum class ScoreMode {
  Energy,         // mean of (w + delta w)^2 over trials and window
  BaseAmplitude,  // |w| alone
};

/// Scores sorted by descending score (ties broken by component index).
std::vector<ComponentScore> score_components(const Model& model, const std::vector<Mat>& ld_trials, int t_begin,
                                             int t_end, ScoreMode mode = ScoreMode::Energy);

struct SourceValidationReport {
  double d1 = 0.0;        // mm, nearest of the top-K centres, averaged over truth points
  double d_mean_k = 0.0;  // mm, mean over the top-K centres, averaged over truth points
  double d_chance = 0.0;  // mm, mean distance of random grid points
  double p = 0.0;         // Pr[d_rand <= d1], averaged over truth points
  int k = 0;
  int n_chance_samples = 0;
  std::vector<double> d1_per_truth;
  nlohmann::json to_json() const;
};

/// `centers` holds one row per component (the rows indexed by scores[i].component).
SourceValidationReport validate_sources(const std::vector<ComponentScore>& scores, const Positions& centers,
                                        const Positions& truth, const Positions& grid_points, int k,
                                        int n_samples = 5000, std::uint64_t seed = 0);

struct ComponentAnisotropy {
  double log10_condition = 0.0;
  Vec3 spatial_std = Vec3::Zero();  // mm
  double temporal_std = 0.0;        // normalised time; NaN when the variant has no temporal axis
};

struct AnisotropyStats {
  std::vector<ComponentAnisotropy> components;
  std::string csv() const;
  nlohmann::json summary() const;
};

/// Marginal covariance of one factor: (L L^T)^-1.
Eigen::Matrix4d covariance(const CholeskyFactor& chol);
ComponentAnisotropy component_anisotropy(const CholeskyFactor& chol, PrecisionVariant variant, double log_sigma = 0.0);
AnisotropyStats anisotropy_stats(const GaussianField& field);

}  // namespace emag
