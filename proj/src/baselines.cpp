#include "emag/baselines.hpp"

#include <cmath>
#include <numbers>

namespace emag {

nlohmann::json SplineConfig::to_json() const {
  return {{"order", order}, {"lambda", lambda}, {"n_terms", n_terms}};
}

SplineConfig SplineConfig::from_json(const nlohmann::json& j) {
  SplineConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "order") c.order = v.get<int>();
    else if (k == "lambda") c.lambda = v.get<double>();
    else if (k == "n_terms") c.n_terms = v.get<int>();
    else throw ParseError("spline config: unknown key '" + k + "'");
  }
  require(c.order >= 2 && c.lambda >= 0.0 && c.n_terms >= 7, "spline config: need order >= 2, lambda >= 0, n_terms >= 7");
  return c;
}

double spline_kernel(double x, const SplineConfig& cfg) {
  double p_prev = 1.0, p = x, sum = 0.0;
  for (int n = 1; n <= cfg.n_terms; ++n) {
    if (n > 1) {
      const double next = ((2.0 * n - 1.0) * x * p - (n - 1.0) * p_prev) / n;
      p_prev = p;
      p = next;
    }
    const double coef = (2.0 * n + 1.0) / std::pow(static_cast<double>(n) * (n + 1.0), cfg.order);
    const double term = coef * p;
    sum += term;
    if (std::abs(coef) < 1e-12) break;
  }
  return sum / (4.0 * std::numbers::pi);
}

namespace {
Positions to_unit_sphere(const Positions& p, const char* what) {
  Positions u(p.rows(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double r = p.row(i).norm();
    if (!(r > 0.0) || !std::isfinite(r))
      throw ValidationError(std::string("spline: ") + what + " position " + std::to_string(i) +
                            " cannot be projected to the sphere");
    u.row(i) = p.row(i) / r;
  }
  return u;
}
}  // namespace

Mat spline_matrix(const Positions& ld_positions, const Positions& hd_positions, const SplineConfig& cfg) {
  const auto m = ld_positions.rows();
  require(m >= 3, "spline: need at least 3 LD electrodes");
  const Positions L = to_unit_sphere(ld_positions, "LD");
  const Positions H = to_unit_sphere(hd_positions, "HD");
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = i + 1; k < m; ++k)
      if ((L.row(i) - L.row(k)).norm() < 1e-9)
        throw NumericError("spline: LD electrodes " + std::to_string(i) + " and " + std::to_string(k) +
                           " coincide on the sphere; the system is singular");

  // [G + lambda I, 1; 1^T, 0] [c; c0] = [v; 0]
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < m; ++k)
      K(i, k) = spline_kernel(std::clamp(L.row(i).dot(L.row(k)), -1.0, 1.0), cfg);
    K(i, i) += cfg.lambda;
    K(i, m) = 1.0;
    K(m, i) = 1.0;
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m + 1, m);
  rhs.topRows(m).setIdentity();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw NumericError("spline: singular interpolation system");
  const Eigen::MatrixXd coef = lu.solve(rhs);  // (m+1) x m

  Eigen::MatrixXd E(H.rows(), m + 1);
  for (Eigen::Index j = 0; j < H.rows(); ++j) {
    for (Eigen::Index i = 0; i < m; ++i) E(j, i) = spline_kernel(std::clamp(H.row(j).dot(L.row(i)), -1.0, 1.0), cfg);
    E(j, m) = 1.0;
  }
  return E * coef;
}

Mat spline_upsample(const Mat& X_ld, const Positions& ld_positions, const Positions& hd_positions,
                    const SplineConfig& cfg) {
  require(X_ld.rows() == ld_positions.rows(), "spline: LD data has " + std::to_string(X_ld.rows()) +
                                                  " channels but " + std::to_string(ld_positions.rows()) +
                                                  " positions");
  return spline_matrix(ld_positions, hd_positions, cfg) * X_ld;
}

Mat direct_mlp_forward(const Mat& X_ld, const TemporalEncoder& enc, const DirectMlp& mlp) {
  const Mat H = encode_batch(enc, X_ld);
  require(H.rows() == mlp.W1.cols(), "direct MLP: feature width mismatch");
  Mat Z = mlp.W1 * H;
  Z.colwise() += mlp.b1;
  Z = Z.cwiseMax(0.0);
  Mat out = mlp.W2 * Z;
  out.colwise() += mlp.b2;
  return out;
}

int direct_mlp_hidden_for(long target, long ld_width, long features, long hd_width) {
  const long fixed = encoder_param_count(ld_width, features) + hd_width;
  const long per_unit = features + 1 + hd_width;
  if (target <= fixed) return 1;
  return static_cast<int>((target - fixed + per_unit - 1) / per_unit);
}

Mat learned_linear_forward(const Mat& amplitudes, const Mat& W) {
  require(W.cols() == amplitudes.rows(), "learned linear: W has " + std::to_string(W.cols()) +
                                             " columns, amplitudes have " + std::to_string(amplitudes.rows()) +
                                             " rows");
  return W * amplitudes;
}

Mat static_template_forward(const GaussianField& field, const Positions& electrodes, int T) {
  require(T >= 1, "static template: T must be >= 1");
  const Vec w = field.base_amplitudes();
  return render(field, electrodes, w.replicate(1, T));
}

}  // namespace emag
