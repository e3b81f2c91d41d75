#pragma once

#include <string>

#include "json.hpp"

#include "emag/common.hpp"
#include "emag/conditioning.hpp"
#include "emag/gaussfield.hpp"

namespace emag {

/// Perrin spherical-spline settings.
struct SplineConfig {
  int order = 4;
  double lambda = 1e-5;
  int n_terms = 50;

  nlohmann::json to_json() const;
  static SplineConfig from_json(const nlohmann::json& j);
};

/// g(x) = 1/(4 pi) sum_{n=1..n_terms} (2n+1) / (n^m (n+1)^m) P_n(x).
double spline_kernel(double cos_angle, const SplineConfig& cfg);

/// Linear map from LD values to HD values (hd x ld), fixed by the electrode geometry.
/// Positions are projected radially onto the unit sphere.
Mat spline_matrix(const Positions& ld_positions, const Positions& hd_positions, const SplineConfig& cfg);

Mat spline_upsample(const Mat& X_ld, const Positions& ld_positions, const Positions& hd_positions,
                    const SplineConfig& cfg);

/// Electrode-space MLP: encoder -> relu(W1 h + b1) -> W2 z + b2.
struct DirectMlp {
  ConstMatMap W1;  // hidden x d_f
  ConstVecMap b1;
  ConstMatMap W2;  // M x hidden
  ConstVecMap b2;
};

Mat direct_mlp_forward(const Mat& X_ld, const TemporalEncoder& enc, const DirectMlp& mlp);

/// Smallest hidden width whose direct-MLP parameter count reaches `target`.
int direct_mlp_hidden_for(long target, long ld_width, long features, long hd_width);

Mat learned_linear_forward(const Mat& amplitudes, const Mat& W);

/// render() with a(t) = w for every t.
Mat static_template_forward(const GaussianField& field, const Positions& electrodes, int T);

}  // namespace emag
