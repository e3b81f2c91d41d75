#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "emag/common.hpp"

namespace emag {

/// Shape family of the per-component precision. Everything except Full is an ablation.
enum class PrecisionVariant {
  Full,                  // 4x4 Cholesky, all six couplings
  Spatial3x3,            // temporal axis dropped from the exponent
  Diagonal,              // c == 0
  SpatialOnlyCoupling,   // c3..c5 == 0
  TemporalOnlyCoupling,  // c0..c2 == 0
  Isotropic,             // one width sigma shared by all four axes
};

std::string to_string(PrecisionVariant v);
PrecisionVariant precision_variant_from_string(const std::string& s);

/// Which of c0..c5 are free under a variant.
std::array<bool, 6> offdiag_mask(PrecisionVariant v);
/// Whether l3 and the temporal centre enter the exponent.
bool uses_temporal_axis(PrecisionVariant v);

/// Lower-triangular factor L with diag(L) = exp(log_diag):
///   [ d0  0  0  0 ]
///   [ c0 d1  0  0 ]
///   [ c1 c2 d2  0 ]
///   [ c3 c4 c5 d3 ]
struct CholeskyFactor {
  std::array<double, 4> log_diag{};
  std::array<double, 6> offdiag{};

  Eigen::Matrix4d lower() const;
};

/// L * L^T. SPD for any finite factor.
Eigen::Matrix4d precision_matrix(const CholeskyFactor& chol);

/// ||L^T d||^2 evaluated directly; the reference for the decomposed exponent.
double mahalanobis_naive(const CholeskyFactor& chol, const Eigen::Vector4d& d);

struct GaussianComponent {
  int grid_index = 0;
  int slot = 0;
  double amplitude = 0.0;        // base amplitude w
  double temporal_center = 0.0;  // mu_t, normalised time
  CholeskyFactor chol;
  double log_sigma = 0.0;        // Isotropic variant only
};

/// A mixture of 4D Gaussians. Components are grid-major then slot-major.
struct GaussianField {
  Positions anchors;  // one row per anchor point
  int per_point = 1;
  std::vector<GaussianComponent> components;
  PrecisionVariant variant = PrecisionVariant::Full;
  /// Optional per-component centres; when empty each component sits on its anchor.
  Positions free_centers;

  int size() const { return static_cast<int>(components.size()); }
  Positions centers() const;
  Vec base_amplitudes() const;
};

/// Structure-of-arrays view over component geometry (row-major N x k blocks).
struct FieldView {
  int count = 0;
  std::span<const double> centers;          // N x 3
  std::span<const double> log_diag;         // N x 4
  std::span<const double> offdiag;          // N x 6
  std::span<const double> temporal_center;  // N
  std::span<const double> log_sigma;        // N, Isotropic only
  PrecisionVariant variant = PrecisionVariant::Full;
};

/// Owning storage behind a FieldView.
struct FieldArrays {
  Mat centers, log_diag, offdiag;
  Vec temporal_center, log_sigma;
  PrecisionVariant variant = PrecisionVariant::Full;

  static FieldArrays from_field(const GaussianField& field);
  FieldView view() const;
};

/// Time-independent parts of the exponent, A + 2 tau C + tau^2 D.
struct PrecomputeTables {
  Mat A;  // electrodes x components
  Mat C;  // electrodes x components
  Vec D;  // components
};

PrecomputeTables precompute_tables(const FieldView& field, const Positions& electrodes);
PrecomputeTables precompute_tables(const GaussianField& field, const Positions& electrodes);

/// Gradients of a scalar with respect to the table entries.
struct TableGrads {
  Mat dA, dC;
  Vec dD;
  void reset(Eigen::Index electrodes, Eigen::Index components);
};

/// Gradient sinks for the geometry parameters; spans may be empty when unused.
struct FieldGradSinks {
  std::span<double> log_diag;   // N x 4
  std::span<double> offdiag;    // N x 6
  std::span<double> log_sigma;  // N
  std::span<double> centers;    // N x 3
};

/// Chains table gradients back to the Cholesky entries (and free centres). Accumulates.
void precompute_tables_backward(const FieldView& field, const Positions& electrodes,
                                const TableGrads& grads, const FieldGradSinks& sinks);

/// d/d mu_n given table gradients accumulated over a whole trial.
Vec temporal_center_grad(const PrecomputeTables& tables, const TableGrads& grads);

/// Normalised time of step t in a trial of T steps: t / (T - 1), 0 when T == 1.
inline double normalized_time(int t, int T) {
  return T > 1 ? static_cast<double>(t) / static_cast<double>(T - 1) : 0.0;
}

/// Evaluates X[j,t] = sum_n a[n,t] exp(-(A + 2 tau C + tau^2 D) / 2) over time chunks.
///
/// The spatial factor exp(-A/2 + mu C - s_t C) is geometric in t, so each (j, n) pair is
/// advanced by one multiply per step from an exact anchor recomputed every kBlock steps
/// (anchors sit at absolute multiples of kBlock, so any chunking gives identical bits).
/// Pairs whose log-factor range could leave [-700, 40] fall back to direct exp; pairs
/// whose exponent stays below -745 over the whole trial contribute exactly zero.
/// Electrodes are processed kLanes at a time; within each (j, t) the sum over n runs in
/// component order.
class Renderer {
 public:
  static constexpr int kBlock = 32;
  static constexpr int kLanes = 8;

  Renderer(const PrecomputeTables& tables, std::span<const double> temporal_center, int timesteps);

  int electrodes() const { return M_; }
  int components() const { return N_; }
  int timesteps() const { return T_; }

  /// amplitudes: N x Tc for absolute steps [t0, t0 + Tc). Returns M x Tc.
  Mat forward(const Mat& amplitudes, int t0 = 0) const;

  /// Accumulates table gradients into `grads` and writes dL/da (N x Tc) into grad_amplitudes.
  void backward(const Mat& amplitudes, int t0, const Mat& grad_out, TableGrads& grads,
                Mat& grad_amplitudes) const;

  /// Pair counts by evaluation path: {recurrence, direct, zero}.
  std::array<long, 3> path_counts() const;

 private:
  enum Mode : unsigned char { kRec = 0, kDirect = 1, kDead = 2 };
  struct DirectPair {
    int lane;
    int n;
    double A, C;
  };
  int M_, N_, T_, groups_;
  std::vector<double> mu_, D_;
  // [group][n][lane]
  std::vector<double> L0_, S1_, U_;
  std::vector<Mode> mode_;
  std::vector<std::vector<DirectPair>> direct_;  // per group

  std::size_t idx(int g, int n, int lane) const {
    return (static_cast<std::size_t>(g) * static_cast<std::size_t>(N_) + static_cast<std::size_t>(n)) * kLanes +
           static_cast<std::size_t>(lane);
  }
};

/// One-shot render with the tables built from `field`.
Mat render(const GaussianField& field, const Positions& electrodes, const Mat& amplitudes);
/// As render(), with the precision family overridden.
Mat render_variant(GaussianField field, const Positions& electrodes, const Mat& amplitudes,
                   PrecisionVariant variant);

/// Kernel weights exp(-q/2) at a single step t of a T-step trial (M x N), by direct exp.
Mat kernel_weights(const PrecomputeTables& tables, std::span<const double> temporal_center, int t, int T);

}  // namespace emag
