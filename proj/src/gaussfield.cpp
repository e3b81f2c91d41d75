#include "emag/gaussfield.hpp"

#include <algorithm>
#include <cmath>

namespace emag {

namespace {
constexpr double kExpFloor = -745.0;  // exp() below this is treated as exactly zero
constexpr double kRecLow = -700.0;
constexpr double kRecHigh = 40.0;

inline double guarded_exp(double arg) { return arg < kExpFloor ? 0.0 : std::exp(arg); }
}  // namespace

std::string to_string(PrecisionVariant v) {
  switch (v) {
    case PrecisionVariant::Full: return "full";
    case PrecisionVariant::Spatial3x3: return "spatial3x3";
    case PrecisionVariant::Diagonal: return "diagonal";
    case PrecisionVariant::SpatialOnlyCoupling: return "spatial-coupling";
    case PrecisionVariant::TemporalOnlyCoupling: return "temporal-coupling";
    case PrecisionVariant::Isotropic: return "isotropic";
  }
  return "?";
}

PrecisionVariant precision_variant_from_string(const std::string& s) {
  const std::string k = to_lower_ascii(s);
  if (k == "full") return PrecisionVariant::Full;
  if (k == "spatial3x3" || k == "3x3") return PrecisionVariant::Spatial3x3;
  if (k == "diagonal" || k == "diag") return PrecisionVariant::Diagonal;
  if (k == "spatial-coupling") return PrecisionVariant::SpatialOnlyCoupling;
  if (k == "temporal-coupling") return PrecisionVariant::TemporalOnlyCoupling;
  if (k == "isotropic") return PrecisionVariant::Isotropic;
  throw ParseError("unknown precision variant '" + s + "'");
}

std::array<bool, 6> offdiag_mask(PrecisionVariant v) {
  switch (v) {
    case PrecisionVariant::Full: return {true, true, true, true, true, true};
    case PrecisionVariant::Spatial3x3:
    case PrecisionVariant::SpatialOnlyCoupling: return {true, true, true, false, false, false};
    case PrecisionVariant::TemporalOnlyCoupling: return {false, false, false, true, true, true};
    case PrecisionVariant::Diagonal:
    case PrecisionVariant::Isotropic: return {false, false, false, false, false, false};
  }
  return {};
}

bool uses_temporal_axis(PrecisionVariant v) { return v != PrecisionVariant::Spatial3x3; }

Eigen::Matrix4d CholeskyFactor::lower() const {
  Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 4; ++i) L(i, i) = std::exp(log_diag[static_cast<std::size_t>(i)]);
  L(1, 0) = offdiag[0];
  L(2, 0) = offdiag[1];
  L(2, 1) = offdiag[2];
  L(3, 0) = offdiag[3];
  L(3, 1) = offdiag[4];
  L(3, 2) = offdiag[5];
  return L;
}

Eigen::Matrix4d precision_matrix(const CholeskyFactor& chol) {
  const Eigen::Matrix4d L = chol.lower();
  return L * L.transpose();
}

double mahalanobis_naive(const CholeskyFactor& chol, const Eigen::Vector4d& d) {
  return (chol.lower().transpose() * d).squaredNorm();
}

Positions GaussianField::centers() const {
  if (free_centers.rows() > 0) return free_centers;
  Positions c(size(), 3);
  for (int n = 0; n < size(); ++n) c.row(n) = anchors.row(components[static_cast<std::size_t>(n)].grid_index);
  return c;
}

Vec GaussianField::base_amplitudes() const {
  Vec w(size());
  for (int n = 0; n < size(); ++n) w[n] = components[static_cast<std::size_t>(n)].amplitude;
  return w;
}

FieldArrays FieldArrays::from_field(const GaussianField& field) {
  FieldArrays a;
  const int N = field.size();
  a.centers = field.centers();
  a.log_diag.resize(N, 4);
  a.offdiag.resize(N, 6);
  a.temporal_center.resize(N);
  a.log_sigma.resize(N);
  for (int n = 0; n < N; ++n) {
    const auto& c = field.components[static_cast<std::size_t>(n)];
    for (int k = 0; k < 4; ++k) a.log_diag(n, k) = c.chol.log_diag[static_cast<std::size_t>(k)];
    for (int k = 0; k < 6; ++k) a.offdiag(n, k) = c.chol.offdiag[static_cast<std::size_t>(k)];
    a.temporal_center[n] = c.temporal_center;
    a.log_sigma[n] = c.log_sigma;
  }
  a.variant = field.variant;
  return a;
}

FieldView FieldArrays::view() const {
  FieldView v;
  v.count = static_cast<int>(temporal_center.size());
  v.centers = {centers.data(), static_cast<std::size_t>(centers.size())};
  v.log_diag = {log_diag.data(), static_cast<std::size_t>(log_diag.size())};
  v.offdiag = {offdiag.data(), static_cast<std::size_t>(offdiag.size())};
  v.temporal_center = {temporal_center.data(), static_cast<std::size_t>(temporal_center.size())};
  v.log_sigma = {log_sigma.data(), static_cast<std::size_t>(log_sigma.size())};
  v.variant = variant;
  return v;
}

PrecomputeTables precompute_tables(const FieldView& f, const Positions& electrodes) {
  const int N = f.count;
  const auto M = electrodes.rows();
  require(static_cast<int>(f.centers.size()) == 3 * N, "precompute_tables: centre array size mismatch");
  require(electrodes.allFinite(), "precompute_tables: electrode positions must be finite");
  PrecomputeTables t{Mat(M, N), Mat(M, N), Vec(N)};
  const auto mask = offdiag_mask(f.variant);
  const bool temporal = uses_temporal_axis(f.variant);

  if (f.variant == PrecisionVariant::Isotropic) {
    require(static_cast<int>(f.log_sigma.size()) == N, "precompute_tables: log_sigma size mismatch");
    for (int n = 0; n < N; ++n) {
      const double s = std::exp(-2.0 * f.log_sigma[static_cast<std::size_t>(n)]);
      t.D[n] = s;
      for (Eigen::Index j = 0; j < M; ++j) {
        const double dx = electrodes(j, 0) - f.centers[3 * n];
        const double dy = electrodes(j, 1) - f.centers[3 * n + 1];
        const double dz = electrodes(j, 2) - f.centers[3 * n + 2];
        t.A(j, n) = (dx * dx + dy * dy + dz * dz) * s;
        t.C(j, n) = 0.0;
      }
    }
    return t;
  }

  for (int n = 0; n < N; ++n) {
    const double* ld = &f.log_diag[4 * static_cast<std::size_t>(n)];
    const double* od = &f.offdiag[6 * static_cast<std::size_t>(n)];
    const double d0 = std::exp(ld[0]), d1 = std::exp(ld[1]), d2 = std::exp(ld[2]), d3 = std::exp(ld[3]);
    double c[6];
    for (int k = 0; k < 6; ++k) c[k] = mask[static_cast<std::size_t>(k)] ? od[k] : 0.0;
    t.D[n] = temporal ? c[3] * c[3] + c[4] * c[4] + c[5] * c[5] + d3 * d3 : 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
      const double dx = electrodes(j, 0) - f.centers[3 * n];
      const double dy = electrodes(j, 1) - f.centers[3 * n + 1];
      const double dz = electrodes(j, 2) - f.centers[3 * n + 2];
      const double z0 = d0 * dx + c[0] * dy + c[1] * dz;
      const double z1 = d1 * dy + c[2] * dz;
      const double z2 = d2 * dz;
      t.A(j, n) = z0 * z0 + z1 * z1 + z2 * z2;
      t.C(j, n) = temporal ? z0 * c[3] + z1 * c[4] + z2 * c[5] : 0.0;
    }
  }
  return t;
}

PrecomputeTables precompute_tables(const GaussianField& field, const Positions& electrodes) {
  const FieldArrays arrays = FieldArrays::from_field(field);
  return precompute_tables(arrays.view(), electrodes);
}

void TableGrads::reset(Eigen::Index electrodes, Eigen::Index components) {
  dA = Mat::Zero(electrodes, components);
  dC = Mat::Zero(electrodes, components);
  dD = Vec::Zero(components);
}

void precompute_tables_backward(const FieldView& f, const Positions& electrodes, const TableGrads& g,
                                const FieldGradSinks& sinks) {
  const int N = f.count;
  const auto M = electrodes.rows();
  const bool want_centers = !sinks.centers.empty();

  if (f.variant == PrecisionVariant::Isotropic) {
    for (int n = 0; n < N; ++n) {
      const double s = std::exp(-2.0 * f.log_sigma[static_cast<std::size_t>(n)]);
      // dA/dlogsigma = -2A, dD/dlogsigma = -2D.
      double acc = -2.0 * s * g.dD[n];
      double gc[3] = {0, 0, 0};
      for (Eigen::Index j = 0; j < M; ++j) {
        const double dx = electrodes(j, 0) - f.centers[3 * n];
        const double dy = electrodes(j, 1) - f.centers[3 * n + 1];
        const double dz = electrodes(j, 2) - f.centers[3 * n + 2];
        const double r2 = dx * dx + dy * dy + dz * dz;
        acc += -2.0 * r2 * s * g.dA(j, n);
        gc[0] -= 2.0 * s * dx * g.dA(j, n);
        gc[1] -= 2.0 * s * dy * g.dA(j, n);
        gc[2] -= 2.0 * s * dz * g.dA(j, n);
      }
      if (!sinks.log_sigma.empty()) sinks.log_sigma[static_cast<std::size_t>(n)] += acc;
      if (want_centers)
        for (int k = 0; k < 3; ++k) sinks.centers[3 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] += gc[k];
    }
    return;
  }

  const auto mask = offdiag_mask(f.variant);
  const bool temporal = uses_temporal_axis(f.variant);
  for (int n = 0; n < N; ++n) {
    const double* ld = &f.log_diag[4 * static_cast<std::size_t>(n)];
    const double* od = &f.offdiag[6 * static_cast<std::size_t>(n)];
    const double d[4] = {std::exp(ld[0]), std::exp(ld[1]), std::exp(ld[2]), std::exp(ld[3])};
    double c[6];
    for (int k = 0; k < 6; ++k) c[k] = mask[static_cast<std::size_t>(k)] ? od[k] : 0.0;
    double gd[4] = {0, 0, 0, 0};
    double gcoef[6] = {0, 0, 0, 0, 0, 0};
    double gcen[3] = {0, 0, 0};
    for (Eigen::Index j = 0; j < M; ++j) {
      const double dx = electrodes(j, 0) - f.centers[3 * n];
      const double dy = electrodes(j, 1) - f.centers[3 * n + 1];
      const double dz = electrodes(j, 2) - f.centers[3 * n + 2];
      const double z0 = d[0] * dx + c[0] * dy + c[1] * dz;
      const double z1 = d[1] * dy + c[2] * dz;
      const double z2 = d[2] * dz;
      const double ga = g.dA(j, n);
      const double gcc = temporal ? g.dC(j, n) : 0.0;
      const double gz0 = 2.0 * z0 * ga + c[3] * gcc;
      const double gz1 = 2.0 * z1 * ga + c[4] * gcc;
      const double gz2 = 2.0 * z2 * ga + c[5] * gcc;
      gcoef[3] += z0 * gcc;
      gcoef[4] += z1 * gcc;
      gcoef[5] += z2 * gcc;
      gd[0] += gz0 * dx;
      gcoef[0] += gz0 * dy;
      gcoef[1] += gz0 * dz;
      gd[1] += gz1 * dy;
      gcoef[2] += gz1 * dz;
      gd[2] += gz2 * dz;
      // delta = e - centre, so d/dcentre = -d/ddelta.
      gcen[0] -= gz0 * d[0];
      gcen[1] -= gz0 * c[0] + gz1 * d[1];
      gcen[2] -= gz0 * c[1] + gz1 * c[2] + gz2 * d[2];
    }
    if (temporal) {
      const double gD = g.dD[n];
      gd[3] += 2.0 * d[3] * gD;
      gcoef[3] += 2.0 * c[3] * gD;
      gcoef[4] += 2.0 * c[4] * gD;
      gcoef[5] += 2.0 * c[5] * gD;
    }
    if (!sinks.log_diag.empty())
      for (int k = 0; k < 4; ++k) sinks.log_diag[4 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] += gd[k] * d[k];
    if (!sinks.offdiag.empty())
      for (int k = 0; k < 6; ++k)
        if (mask[static_cast<std::size_t>(k)]) sinks.offdiag[6 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] += gcoef[k];
    if (want_centers)
      for (int k = 0; k < 3; ++k) sinks.centers[3 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] += gcen[k];
  }
}

Vec temporal_center_grad(const PrecomputeTables& tables, const TableGrads& grads) {
  // q = A + 2 tau C + tau^2 D with tau = s - mu:
  // dL/dmu = -2 sum_j C dA - D sum_j dC   (dC already carries the 2 tau factor).
  const auto N = tables.D.size();
  Vec g(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    double cross = 0.0, sumdc = 0.0;
    for (Eigen::Index j = 0; j < tables.A.rows(); ++j) {
      cross += tables.C(j, n) * grads.dA(j, n);
      sumdc += grads.dC(j, n);
    }
    g[n] = -2.0 * cross - tables.D[n] * sumdc;
  }
  return g;
}

Renderer::Renderer(const PrecomputeTables& tables, std::span<const double> temporal_center, int timesteps)
    : M_(static_cast<int>(tables.A.rows())),
      N_(static_cast<int>(tables.A.cols())),
      T_(timesteps),
      groups_((M_ + kLanes - 1) / kLanes),
      mu_(temporal_center.begin(), temporal_center.end()),
      D_(tables.D.data(), tables.D.data() + tables.D.size()) {
  require(T_ >= 1, "render: T must be >= 1");
  require(static_cast<int>(mu_.size()) == N_, "render: temporal centre count mismatch");
  require(tables.C.rows() == M_ && tables.C.cols() == N_ && tables.D.size() == N_,
          "render: inconsistent precompute tables");
  const std::size_t total = static_cast<std::size_t>(groups_) * static_cast<std::size_t>(N_) * kLanes;
  L0_.assign(total, 0.0);
  S1_.assign(total, 0.0);
  U_.assign(total, 1.0);
  mode_.assign(total, kDead);
  direct_.resize(static_cast<std::size_t>(groups_));
  const double inv = T_ > 1 ? 1.0 / static_cast<double>(T_ - 1) : 0.0;
  for (int g = 0; g < groups_; ++g) {
    for (int n = 0; n < N_; ++n) {
      for (int lane = 0; lane < kLanes; ++lane) {
        const int j = g * kLanes + lane;
        if (j >= M_) continue;
        const double A = tables.A(j, n), C = tables.C(j, n);
        const double l0 = -0.5 * A + mu_[static_cast<std::size_t>(n)] * C;
        const double s1 = -C * inv;
        const double l1 = l0 + s1 * static_cast<double>(T_ - 1);
        const double lo = std::min(l0, l1), hi = std::max(l0, l1);
        const std::size_t k = idx(g, n, lane);
        if (!std::isfinite(A) || !std::isfinite(C)) throw NumericError("render: non-finite exponent table");
        if (hi < kExpFloor) {
          mode_[k] = kDead;
        } else if (lo >= kRecLow && hi <= kRecHigh) {
          mode_[k] = kRec;
          L0_[k] = l0;
          S1_[k] = s1;
          U_[k] = std::exp(s1);
        } else {
          mode_[k] = kDirect;
          direct_[static_cast<std::size_t>(g)].push_back({lane, n, A, C});
        }
      }
    }
  }
}

std::array<long, 3> Renderer::path_counts() const {
  std::array<long, 3> c{0, 0, 0};
  for (int g = 0; g < groups_; ++g)
    for (int n = 0; n < N_; ++n)
      for (int lane = 0; lane < kLanes; ++lane)
        if (g * kLanes + lane < M_) ++c[mode_[idx(g, n, lane)]];
  return c;
}

Mat Renderer::forward(const Mat& amp, int t0) const {
  const int Tc = static_cast<int>(amp.cols());
  require(amp.rows() == N_, "render: amplitude rows (" + std::to_string(amp.rows()) +
                                ") != component count (" + std::to_string(N_) + ")");
  require(t0 >= 0 && t0 + Tc <= T_, "render: chunk outside trial");
  require(amp.allFinite(), "render: amplitudes must be finite");
  Mat out = Mat::Zero(M_, Tc);
  if (Tc == 0) return out;

  // ta[t][n] = exp(-tau^2 D / 2) * a[n, t]
  std::vector<double> ta(static_cast<std::size_t>(Tc) * static_cast<std::size_t>(N_));
  for (int t = 0; t < Tc; ++t) {
    const double s = normalized_time(t0 + t, T_);
    for (int n = 0; n < N_; ++n) {
      const double tau = s - mu_[static_cast<std::size_t>(n)];
      ta[static_cast<std::size_t>(t) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(n)] =
          guarded_exp(-0.5 * tau * tau * D_[static_cast<std::size_t>(n)]) * amp(n, t);
    }
  }

  const int first_block = t0 / kBlock;
  const int last_block = (t0 + Tc - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (int g = 0; g < groups_; ++g) {
    std::vector<double> P(static_cast<std::size_t>(N_) * kLanes);
    const double* U = &U_[idx(g, 0, 0)];
    for (int b = first_block; b <= last_block; ++b) {
      const int tb = b * kBlock;
      for (int n = 0; n < N_; ++n)
        for (int lane = 0; lane < kLanes; ++lane) {
          const std::size_t k = idx(g, n, lane);
          P[static_cast<std::size_t>(n) * kLanes + static_cast<std::size_t>(lane)] =
              mode_[k] == kRec ? std::exp(L0_[k] + static_cast<double>(tb) * S1_[k]) : 0.0;
        }
      const int te = std::min(tb + kBlock, t0 + Tc);
      for (int t = tb; t < te; ++t) {
        if (t >= t0) {
          const double* row = &ta[static_cast<std::size_t>(t - t0) * static_cast<std::size_t>(N_)];
          double acc[kLanes] = {};
          for (int n = 0; n < N_; ++n) {
            const double* p = &P[static_cast<std::size_t>(n) * kLanes];
            const double v = row[n];
            for (int lane = 0; lane < kLanes; ++lane) acc[lane] += p[lane] * v;
          }
          for (int lane = 0; lane < kLanes; ++lane) {
            const int j = g * kLanes + lane;
            if (j < M_) out(j, t - t0) = acc[lane];
          }
        }
        double* p = P.data();
        for (std::size_t k = 0; k < static_cast<std::size_t>(N_) * kLanes; ++k) p[k] *= U[k];
      }
    }
    for (const auto& dp : direct_[static_cast<std::size_t>(g)]) {
      const int j = g * kLanes + dp.lane;
      const double mu = mu_[static_cast<std::size_t>(dp.n)], D = D_[static_cast<std::size_t>(dp.n)];
      for (int t = 0; t < Tc; ++t) {
        const double tau = normalized_time(t0 + t, T_) - mu;
        out(j, t) += amp(dp.n, t) * guarded_exp(-0.5 * (dp.A + 2.0 * tau * dp.C + tau * tau * D));
      }
    }
  }
  return out;
}

void Renderer::backward(const Mat& amp, int t0, const Mat& grad_out, TableGrads& grads,
                        Mat& grad_amp) const {
  const int Tc = static_cast<int>(amp.cols());
  require(amp.rows() == N_ && grad_out.rows() == M_ && grad_out.cols() == Tc,
          "render backward: shape mismatch");
  require(grads.dA.rows() == M_ && grads.dA.cols() == N_, "render backward: gradient buffers not sized");
  grad_amp = Mat::Zero(N_, Tc);
  if (Tc == 0) return;
  const std::size_t NT = static_cast<std::size_t>(Tc) * static_cast<std::size_t>(N_);
  // Per (t, n): temporal factor, -a*TF/2, 2 tau, tau^2.
  std::vector<double> tf(NT), ha(NT), tau2(NT), tausq(NT), ga(NT, 0.0);
  for (int t = 0; t < Tc; ++t) {
    const double s = normalized_time(t0 + t, T_);
    for (int n = 0; n < N_; ++n) {
      const std::size_t k = static_cast<std::size_t>(t) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(n);
      const double tau = s - mu_[static_cast<std::size_t>(n)];
      tf[k] = guarded_exp(-0.5 * tau * tau * D_[static_cast<std::size_t>(n)]);
      ha[k] = -0.5 * tf[k] * amp(n, t);
      tau2[k] = 2.0 * tau;
      tausq[k] = tau * tau;
    }
  }
  std::vector<double> dD(static_cast<std::size_t>(N_), 0.0);
  std::vector<double> P(static_cast<std::size_t>(N_) * kLanes), dA(P.size()), dC(P.size());
  const int first_block = t0 / kBlock;
  const int last_block = (t0 + Tc - 1) / kBlock;

  for (int g = 0; g < groups_; ++g) {
    std::fill(dA.begin(), dA.end(), 0.0);
    std::fill(dC.begin(), dC.end(), 0.0);
    const double* U = &U_[idx(g, 0, 0)];
    for (int b = first_block; b <= last_block; ++b) {
      const int tb = b * kBlock;
      for (int n = 0; n < N_; ++n)
        for (int lane = 0; lane < kLanes; ++lane) {
          const std::size_t k = idx(g, n, lane);
          P[static_cast<std::size_t>(n) * kLanes + static_cast<std::size_t>(lane)] =
              mode_[k] == kRec ? std::exp(L0_[k] + static_cast<double>(tb) * S1_[k]) : 0.0;
        }
      const int te = std::min(tb + kBlock, t0 + Tc);
      for (int t = tb; t < te; ++t) {
        if (t >= t0) {
          const int tc = t - t0;
          double G[kLanes];
          for (int lane = 0; lane < kLanes; ++lane) {
            const int j = g * kLanes + lane;
            G[lane] = j < M_ ? grad_out(j, tc) : 0.0;
          }
          const std::size_t off = static_cast<std::size_t>(tc) * static_cast<std::size_t>(N_);
          for (int n = 0; n < N_; ++n) {
            double* p = &P[static_cast<std::size_t>(n) * kLanes];
            double* pa = &dA[static_cast<std::size_t>(n) * kLanes];
            double* pc = &dC[static_cast<std::size_t>(n) * kLanes];
            const double h = ha[off + static_cast<std::size_t>(n)];
            const double w2 = tau2[off + static_cast<std::size_t>(n)];
            double sgp = 0.0, sgq = 0.0;
            for (int lane = 0; lane < kLanes; ++lane) {
              const double gp = G[lane] * p[lane];
              const double gq = gp * h;
              pa[lane] += gq;
              pc[lane] += gq * w2;
              sgp += gp;
              sgq += gq;
            }
            ga[off + static_cast<std::size_t>(n)] += sgp * tf[off + static_cast<std::size_t>(n)];
            dD[static_cast<std::size_t>(n)] += sgq * tausq[off + static_cast<std::size_t>(n)];
          }
        }
        double* p = P.data();
        for (std::size_t k = 0; k < static_cast<std::size_t>(N_) * kLanes; ++k) p[k] *= U[k];
      }
    }
    for (int n = 0; n < N_; ++n)
      for (int lane = 0; lane < kLanes; ++lane) {
        const int j = g * kLanes + lane;
        if (j >= M_) continue;
        grads.dA(j, n) += dA[static_cast<std::size_t>(n) * kLanes + static_cast<std::size_t>(lane)];
        grads.dC(j, n) += dC[static_cast<std::size_t>(n) * kLanes + static_cast<std::size_t>(lane)];
      }
    for (const auto& dp : direct_[static_cast<std::size_t>(g)]) {
      const int j = g * kLanes + dp.lane;
      const double mu = mu_[static_cast<std::size_t>(dp.n)], D = D_[static_cast<std::size_t>(dp.n)];
      double sa = 0.0, sc = 0.0, sd = 0.0;
      for (int tc = 0; tc < Tc; ++tc) {
        const double tau = normalized_time(t0 + tc, T_) - mu;
        const double K = guarded_exp(-0.5 * (dp.A + 2.0 * tau * dp.C + tau * tau * D));
        const double e = grad_out(j, tc) * K;
        ga[static_cast<std::size_t>(tc) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(dp.n)] += e;
        const double gq = -0.5 * amp(dp.n, tc) * e;
        sa += gq;
        sc += 2.0 * tau * gq;
        sd += tau * tau * gq;
      }
      grads.dA(j, dp.n) += sa;
      grads.dC(j, dp.n) += sc;
      dD[static_cast<std::size_t>(dp.n)] += sd;
    }
  }
  for (int n = 0; n < N_; ++n) grads.dD[n] += dD[static_cast<std::size_t>(n)];
  for (int t = 0; t < Tc; ++t)
    for (int n = 0; n < N_; ++n) grad_amp(n, t) = ga[static_cast<std::size_t>(t) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(n)];
}

Mat render(const GaussianField& field, const Positions& electrodes, const Mat& amplitudes) {
  require(amplitudes.rows() == field.size(),
          "render: amplitudes have " + std::to_string(amplitudes.rows()) + " rows, field has " +
              std::to_string(field.size()) + " components");
  require(amplitudes.cols() >= 1, "render: T must be >= 1");
  const FieldArrays arrays = FieldArrays::from_field(field);
  const PrecomputeTables tables = precompute_tables(arrays.view(), electrodes);
  const Renderer r(tables, arrays.view().temporal_center, static_cast<int>(amplitudes.cols()));
  return r.forward(amplitudes, 0);
}

Mat render_variant(GaussianField field, const Positions& electrodes, const Mat& amplitudes,
                   PrecisionVariant variant) {
  field.variant = variant;
  return render(field, electrodes, amplitudes);
}

Mat kernel_weights(const PrecomputeTables& tables, std::span<const double> mu, int t, int T) {
  const auto M = tables.A.rows(), N = tables.A.cols();
  Mat K(M, N);
  const double s = normalized_time(t, T);
  for (Eigen::Index j = 0; j < M; ++j)
    for (Eigen::Index n = 0; n < N; ++n) {
      const double tau = s - mu[static_cast<std::size_t>(n)];
      K(j, n) = guarded_exp(-0.5 * (tables.A(j, n) + 2.0 * tau * tables.C(j, n) + tau * tau * tables.D[n]));
    }
  return K;
}

}  // namespace emag
