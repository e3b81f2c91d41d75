#include "emag/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace emag {

using nlohmann::json;

std::vector<ComponentScore> score_components(const Model& model, const std::vector<Mat>& ld_trials, int t_begin,
                                             int t_end, ScoreMode mode) {
  require(t_end > t_begin, "score: empty window [" + std::to_string(t_begin) + ", " + std::to_string(t_end) + ")");
  const int N = model.components();
  const Vec w = model.group("w");
  Vec s = Vec::Zero(N);
  if (mode == ScoreMode::BaseAmplitude) {
    s = w.cwiseAbs();
  } else {
    require(!ld_trials.empty(), "score: no trials");
    double count = 0.0;
    for (const auto& X : ld_trials) {
      require(t_begin >= 0 && t_end <= X.cols(), "score: window outside the trial");
      const Mat a = model.amplitudes(X);
      s += a.middleCols(t_begin, t_end - t_begin).cwiseAbs2().rowwise().sum();
      count += t_end - t_begin;
    }
    s /= count;
  }
  std::vector<ComponentScore> out(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) out[static_cast<std::size_t>(n)] = {n, s[n], 0};
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i);
  return out;
}

json SourceValidationReport::to_json() const {
  return {{"d1_mm", d1},          {"d_mean_k_mm", d_mean_k}, {"d_chance_mm", d_chance},
          {"p", p},               {"k", k},                  {"n_chance_samples", n_chance_samples},
          {"d1_per_truth_mm", d1_per_truth}};
}

SourceValidationReport validate_sources(const std::vector<ComponentScore>& scores, const Positions& centers,
                                        const Positions& truth, const Positions& grid_points, int k, int n_samples,
                                        std::uint64_t seed) {
  require(truth.rows() >= 1, "validate: no truth positions");
  require(k >= 1 && k <= static_cast<int>(scores.size()), "validate: K must be in [1, number of components]");
  require(grid_points.rows() >= 1 && n_samples >= 1, "validate: need grid points and chance samples");
  SourceValidationReport rep;
  rep.k = k;
  rep.n_chance_samples = n_samples;
  Rng rng(mix_seed(seed, 0x4348414e));
  std::vector<Eigen::Index> draws(static_cast<std::size_t>(n_samples));
  for (auto& d : draws) d = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(grid_points.rows())));

  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    double d1 = std::numeric_limits<double>::infinity(), dsum = 0.0;
    for (int r = 0; r < k; ++r) {
      const double d = (centers.row(scores[static_cast<std::size_t>(r)].component) - truth.row(i)).norm();
      d1 = std::min(d1, d);
      dsum += d;
    }
    double chance = 0.0;
    long closer = 0;
    for (auto g : draws) {
      const double d = (grid_points.row(g) - truth.row(i)).norm();
      chance += d;
      if (d <= d1) ++closer;
    }
    rep.d1_per_truth.push_back(d1);
    rep.d1 += d1;
    rep.d_mean_k += dsum / k;
    rep.d_chance += chance / n_samples;
    rep.p += static_cast<double>(closer) / n_samples;
  }
  const double n = static_cast<double>(truth.rows());
  rep.d1 /= n;
  rep.d_mean_k /= n;
  rep.d_chance /= n;
  rep.p /= n;
  return rep;
}

Eigen::Matrix4d covariance(const CholeskyFactor& chol) { return precision_matrix(chol).inverse(); }

ComponentAnisotropy component_anisotropy(const CholeskyFactor& chol, PrecisionVariant variant, double log_sigma) {
  ComponentAnisotropy a;
  if (variant == PrecisionVariant::Isotropic) {
    const double s = std::exp(log_sigma);
    a.spatial_std = Vec3::Constant(s);
    a.temporal_std = s;
    return a;
  }
  CholeskyFactor c = chol;
  const auto mask = offdiag_mask(variant);
  for (int k = 0; k < 6; ++k)
    if (!mask[static_cast<std::size_t>(k)]) c.offdiag[static_cast<std::size_t>(k)] = 0.0;
  Eigen::Matrix3d spatial;
  if (uses_temporal_axis(variant)) {
    const Eigen::Matrix4d cov = covariance(c);
    spatial = cov.topLeftCorner<3, 3>();
    a.temporal_std = std::sqrt(cov(3, 3));
  } else {
    spatial = precision_matrix(c).topLeftCorner<3, 3>().inverse();
    a.temporal_std = std::numeric_limits<double>::quiet_NaN();
  }
  if (!spatial.allFinite()) throw NumericError("anisotropy: non-finite covariance");
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(spatial);
  const auto ev = es.eigenvalues();
  a.log10_condition = std::log10(ev.maxCoeff() / ev.minCoeff());
  a.spatial_std = spatial.diagonal().cwiseSqrt();
  return a;
}

AnisotropyStats anisotropy_stats(const GaussianField& field) {
  AnisotropyStats st;
  for (const auto& c : field.components) st.components.push_back(component_anisotropy(c.chol, field.variant, c.log_sigma));
  return st;
}

std::string AnisotropyStats::csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "component,log10_condition,std_x_mm,std_y_mm,std_z_mm,temporal_std\n";
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    out << i << ',' << c.log10_condition << ',' << c.spatial_std.x() << ',' << c.spatial_std.y() << ','
        << c.spatial_std.z() << ',' << c.temporal_std << '\n';
  }
  return out.str();
}

json AnisotropyStats::summary() const {
  std::vector<double> cond, sstd, tstd;
  for (const auto& c : components) {
    cond.push_back(c.log10_condition);
    for (int k = 0; k < 3; ++k) sstd.push_back(c.spatial_std[k]);
    if (std::isfinite(c.temporal_std)) tstd.push_back(c.temporal_std);
  }
  auto median = [](std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  return {{"components", components.size()},
          {"median_log10_condition", median(cond)},
          {"median_spatial_std_mm", median(sstd)},
          {"median_temporal_std", median(tstd)}};
}

}  // namespace emag
