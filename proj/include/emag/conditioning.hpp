#pragma once

#include <string>

#include "emag/common.hpp"

namespace emag {

enum class ConditioningVariant {
  PerGridPoint,     // one adjustment per grid point, shared by its G slots
  GlobalScalar,     // one adjustment broadcast to every grid point
  None,             // static amplitudes
  PreInterpolated,  // encoder sees the spline-upsampled HD signal
};

std::string to_string(ConditioningVariant v);
ConditioningVariant conditioning_variant_from_string(const std::string& s);

using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

/// Kernel-size-1 temporal encoder: h_t = relu(W x_t + b).
struct TemporalEncoder {
  ConstMatMap W;  // d_f x in
  ConstVecMap b;  // d_f
};

/// Delta w(t) = W2 relu(W1 h_t + b1) + b2.
struct ModulationMlp {
  ConstMatMap W1;  // hidden x d_f
  ConstVecMap b1;  // hidden
  ConstMatMap W2;  // out x hidden
  ConstVecMap b2;  // out
};

struct EncoderGrad {
  MatMap W;
  VecMap b;
};

struct MlpGrad {
  MatMap W1;
  VecMap b1;
  MatMap W2;
  VecMap b2;
};

inline long encoder_param_count(long in, long features) { return in * features + features; }
inline long mlp_param_count(long features, long hidden, long out) {
  return features * hidden + hidden + hidden * out + out;
}

Vec encode(const TemporalEncoder& enc, const Vec& x);
Vec modulate(const ModulationMlp& mlp, const Vec& h);

/// Column-wise encode over a whole chunk: X (in x T) -> H (d_f x T).
Mat encode_batch(const TemporalEncoder& enc, const Mat& X);
/// H (d_f x T) -> Delta (out x T); the post-relu hidden activations go to `hidden` when given.
Mat modulate_batch(const ModulationMlp& mlp, const Mat& H, Mat* hidden = nullptr);

/// a[(i,g), t] = w[(i,g)] + delta[i, t]  (delta row 0 for every i when it has a single row).
Mat expand_amplitudes(const Vec& w, const Mat& delta, int per_point);
/// Sums dL/da over the G slots of each grid point (or over everything for a one-row delta).
Mat reduce_amplitude_grad(const Mat& grad_a, int per_point, int delta_rows);

/// Backward through modulate_batch. Accumulates into g and returns dL/dH.
Mat modulate_backward(const ModulationMlp& mlp, const Mat& H, const Mat& hidden, const Mat& grad_delta,
                      MlpGrad& g);
/// Backward through encode_batch. Accumulates into g.
void encode_backward(const Mat& X, const Mat& H, const Mat& grad_H, EncoderGrad& g);

/// Full amplitude path for one trial. X is the encoder input (already upsampled for
/// PreInterpolated); ignored for None.
Mat amplitudes(const Vec& w, int per_point, const TemporalEncoder& enc, const ModulationMlp& mlp,
               const Mat& X, ConditioningVariant variant);

}  // namespace emag
