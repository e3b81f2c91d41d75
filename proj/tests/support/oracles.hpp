#pragma once

#include <cmath>

#include "emag/gaussfield.hpp"

namespace emag::testing {

/// Straight-line reference: builds L entry by entry and evaluates ||L^T d||^2.
inline double oracle_q(const GaussianComponent& c, PrecisionVariant v, const Vec3& delta, double tau) {
  if (v == PrecisionVariant::Isotropic) return (delta.squaredNorm() + tau * tau) / std::exp(2.0 * c.log_sigma);
  const auto& l = c.chol.log_diag;
  auto o = c.chol.offdiag;
  const bool keep_spatial = v == PrecisionVariant::Full || v == PrecisionVariant::SpatialOnlyCoupling ||
                            v == PrecisionVariant::Spatial3x3;
  const bool keep_temporal = v == PrecisionVariant::Full || v == PrecisionVariant::TemporalOnlyCoupling;
  if (!keep_spatial) o[0] = o[1] = o[2] = 0.0;
  if (!keep_temporal) o[3] = o[4] = o[5] = 0.0;
  Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
  L(0, 0) = std::exp(l[0]);
  L(1, 0) = o[0];
  L(1, 1) = std::exp(l[1]);
  L(2, 0) = o[1];
  L(2, 1) = o[2];
  L(2, 2) = std::exp(l[2]);
  L(3, 0) = o[3];
  L(3, 1) = o[4];
  L(3, 2) = o[5];
  L(3, 3) = std::exp(l[3]);
  if (v == PrecisionVariant::Spatial3x3) {
    const Eigen::Matrix3d L3 = L.topLeftCorner<3, 3>();
    return (L3.transpose() * delta).squaredNorm();
  }
  const Eigen::Vector4d d(delta.x(), delta.y(), delta.z(), tau);
  return (L.transpose() * d).squaredNorm();
}

/// X[j,t] = sum_n a[n,t] exp(-q/2) by a triple loop.
inline Mat oracle_render(const GaussianField& f, const Positions& e, const Mat& a, PrecisionVariant v) {
  const int T = static_cast<int>(a.cols());
  const Positions centers = f.centers();
  Mat X = Mat::Zero(e.rows(), T);
  for (Eigen::Index j = 0; j < e.rows(); ++j)
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < f.size(); ++n) {
        const auto& c = f.components[static_cast<std::size_t>(n)];
        const double tn = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
        const Vec3 delta = e.row(j).transpose() - centers.row(n).transpose();
        X(j, t) += a(n, t) * std::exp(-0.5 * oracle_q(c, v, delta, tn - c.temporal_center));
      }
  return X;
}

/// Random field with one component per anchor.
inline GaussianField random_field(Rng& r, int N, double spread, double chol_scale,
                                  PrecisionVariant v = PrecisionVariant::Full) {
  GaussianField f;
  f.anchors = Positions(N, 3);
  f.per_point = 1;
  f.variant = v;
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < 3; ++k) f.anchors(n, k) = spread * r.normal();
    GaussianComponent c;
    c.grid_index = n;
    for (auto& x : c.chol.log_diag) x = chol_scale * r.normal();
    for (auto& x : c.chol.offdiag) x = chol_scale * r.normal();
    c.temporal_center = r.uniform();
    c.log_sigma = 0.3 * r.normal();
    c.amplitude = r.normal();
    f.components.push_back(c);
  }
  return f;
}

inline Mat random_mat(Rng& r, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (auto& v : m.reshaped()) v = scale * r.normal();
  return m;
}

}  // namespace emag::testing
