#include "emag/conditioning.hpp"

namespace emag {

std::string to_string(ConditioningVariant v) {
  switch (v) {
    case ConditioningVariant::PerGridPoint: return "per-grid-point";
    case ConditioningVariant::GlobalScalar: return "global-scalar";
    case ConditioningVariant::None: return "none";
    case ConditioningVariant::PreInterpolated: return "pre-interpolated";
  }
  return "?";
}

ConditioningVariant conditioning_variant_from_string(const std::string& s) {
  const std::string k = to_lower_ascii(s);
  if (k == "per-grid-point" || k == "pergridpoint") return ConditioningVariant::PerGridPoint;
  if (k == "global-scalar" || k == "global") return ConditioningVariant::GlobalScalar;
  if (k == "none" || k == "static") return ConditioningVariant::None;
  if (k == "pre-interpolated" || k == "preinterpolated") return ConditioningVariant::PreInterpolated;
  throw ParseError("unknown conditioning variant '" + s + "'");
}

Vec encode(const TemporalEncoder& enc, const Vec& x) {
  require(x.size() == enc.W.cols(), "encode: input has " + std::to_string(x.size()) + " channels, encoder expects " +
                                        std::to_string(enc.W.cols()));
  require(x.allFinite(), "encode: input must be finite");
  return (enc.W * x + enc.b).cwiseMax(0.0);
}

Vec modulate(const ModulationMlp& mlp, const Vec& h) {
  require(h.size() == mlp.W1.cols(), "modulate: feature length mismatch");
  const Vec z = (mlp.W1 * h + mlp.b1).cwiseMax(0.0);
  return mlp.W2 * z + mlp.b2;
}

Mat encode_batch(const TemporalEncoder& enc, const Mat& X) {
  require(X.rows() == enc.W.cols(), "encode: input has " + std::to_string(X.rows()) + " channels, encoder expects " +
                                        std::to_string(enc.W.cols()));
  Mat H = enc.W * X;
  H.colwise() += enc.b;
  return H.cwiseMax(0.0);
}

Mat modulate_batch(const ModulationMlp& mlp, const Mat& H, Mat* hidden) {
  require(H.rows() == mlp.W1.cols(), "modulate: feature length mismatch");
  Mat Z = mlp.W1 * H;
  Z.colwise() += mlp.b1;
  Z = Z.cwiseMax(0.0);
  Mat out = mlp.W2 * Z;
  out.colwise() += mlp.b2;
  if (hidden) *hidden = std::move(Z);
  return out;
}

Mat expand_amplitudes(const Vec& w, const Mat& delta, int per_point) {
  const auto N = w.size();
  const auto T = delta.cols();
  Mat a(N, T);
  if (delta.rows() == 1) {
    for (Eigen::Index n = 0; n < N; ++n) a.row(n) = delta.row(0).array() + w[n];
    return a;
  }
  require(delta.rows() * per_point == N, "amplitudes: modulation width does not match the grid");
  for (Eigen::Index n = 0; n < N; ++n) a.row(n) = delta.row(n / per_point).array() + w[n];
  return a;
}

Mat reduce_amplitude_grad(const Mat& grad_a, int per_point, int delta_rows) {
  if (delta_rows == 1) return grad_a.colwise().sum();
  Mat g = Mat::Zero(delta_rows, grad_a.cols());
  for (Eigen::Index n = 0; n < grad_a.rows(); ++n) g.row(n / per_point) += grad_a.row(n);
  return g;
}

Mat modulate_backward(const ModulationMlp& mlp, const Mat& H, const Mat& hidden, const Mat& grad_delta,
                      MlpGrad& g) {
  g.W2.noalias() += grad_delta * hidden.transpose();
  g.b2 += grad_delta.rowwise().sum();
  Mat dZ = mlp.W2.transpose() * grad_delta;
  dZ = (hidden.array() > 0.0).select(dZ, 0.0);
  g.W1.noalias() += dZ * H.transpose();
  g.b1 += dZ.rowwise().sum();
  Mat dH = mlp.W1.transpose() * dZ;
  return (H.array() > 0.0).select(dH, 0.0);
}

void encode_backward(const Mat& X, const Mat& H, const Mat& grad_H, EncoderGrad& g) {
  // grad_H is already masked by the relu when it comes from modulate_backward; mask again for callers that pass raw grads.
  const Mat d = (H.array() > 0.0).select(grad_H, 0.0);
  g.W.noalias() += d * X.transpose();
  g.b += d.rowwise().sum();
}

Mat amplitudes(const Vec& w, int per_point, const TemporalEncoder& enc, const ModulationMlp& mlp, const Mat& X,
               ConditioningVariant variant) {
  require(X.allFinite(), "amplitudes: LD input must be finite");
  if (variant == ConditioningVariant::None) return expand_amplitudes(w, Mat::Zero(1, X.cols()), per_point);
  const Mat H = encode_batch(enc, X);
  return expand_amplitudes(w, modulate_batch(mlp, H), per_point);
}

}  // namespace emag
