#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "emag/gaussfield.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace emag;
using emag::testing::oracle_render;
using emag::testing::random_chol;
using emag::testing::random_field;
using emag::testing::random_mat;

namespace {

Positions random_positions(Rng& r, int M, double spread) {
  Positions p(M, 3);
  for (auto& v : p.reshaped()) v = spread * r.normal();
  return p;
}

const PrecisionVariant kAllVariants[] = {PrecisionVariant::Full,
                                         PrecisionVariant::Spatial3x3,
                                         PrecisionVariant::Diagonal,
                                         PrecisionVariant::SpatialOnlyCoupling,
                                         PrecisionVariant::TemporalOnlyCoupling,
                                         PrecisionVariant::Isotropic};

}  // namespace

TEST(Precision, IdentityFactor) {
  EXPECT_TRUE(precision_matrix(CholeskyFactor{}).isApprox(Eigen::Matrix4d::Identity(), 0.0));
}

TEST(Precision, ScaledFirstAxis) {
  CholeskyFactor c;
  c.log_diag[0] = std::log(2.0);
  Eigen::Matrix4d expected = Eigen::Matrix4d::Identity();
  expected(0, 0) = 4.0;
  EXPECT_LT((precision_matrix(c) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Precision, SpdOverRandomFactors) {
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Matrix4d P = precision_matrix(random_chol(r));
    EXPECT_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(P);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Mahalanobis, Examples) {
  EXPECT_EQ(mahalanobis_naive(CholeskyFactor{}, Eigen::Vector4d::Zero()), 0.0);
  EXPECT_DOUBLE_EQ(mahalanobis_naive(CholeskyFactor{}, Eigen::Vector4d::Ones()), 4.0);
  Rng r(2);
  for (int i = 0; i < 200; ++i) {
    const CholeskyFactor c = random_chol(r);
    const Eigen::Vector4d d = Eigen::Vector4d::Random();
    const double q = d.transpose() * precision_matrix(c) * d;
    EXPECT_NEAR(mahalanobis_naive(c, d), q, 1e-12 * std::max(1.0, std::abs(q)));
  }
}

TEST(Tables, IdentityUnitOffset) {
  GaussianField f;
  f.anchors = Positions::Zero(1, 3);
  f.components.resize(1);
  Positions e(1, 3);
  e << 1, 0, 0;
  const auto t = precompute_tables(f, e);
  EXPECT_DOUBLE_EQ(t.A(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.C(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(t.D(0), 1.0);
}

TEST(Tables, NoTemporalCouplingMeansZeroC) {
  Rng r(3);
  GaussianField f = random_field(r, 6, 1.0, 0.5);
  for (auto& c : f.components) c.chol.offdiag[3] = c.chol.offdiag[4] = c.chol.offdiag[5] = 0.0;
  const auto t = precompute_tables(f, random_positions(r, 8, 1.0));
  EXPECT_EQ(t.C.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tables, Invariants) {
  Rng r(4);
  const GaussianField f = random_field(r, 10, 1.0, 0.7);
  const auto t = precompute_tables(f, random_positions(r, 8, 1.0));
  EXPECT_GE(t.A.minCoeff(), 0.0);
  for (int n = 0; n < f.size(); ++n) EXPECT_GE(t.D(n), std::exp(2.0 * f.components[static_cast<std::size_t>(n)].chol.log_diag[3]) * (1 - 1e-15));
}

TEST(Tables, DecompositionMatchesNaive) {
  Rng r(5);
  const GaussianField f = random_field(r, 10, 1.0, 0.7);
  const Positions e = random_positions(r, 8, 1.0);
  const auto t = precompute_tables(f, e);
  const Positions c = f.centers();
  for (int i = 0; i < 100; ++i) {
    const auto j = static_cast<Eigen::Index>(r.below(8));
    const auto n = static_cast<Eigen::Index>(r.below(10));
    const double tau = 2.0 * r.normal();
    const Vec3 d = e.row(j).transpose() - c.row(n).transpose();
    const Eigen::Vector4d d4(d.x(), d.y(), d.z(), tau);
    const double q = t.A(j, n) + 2 * tau * t.C(j, n) + tau * tau * t.D(n);
    EXPECT_NEAR(q, mahalanobis_naive(f.components[static_cast<std::size_t>(n)].chol, d4), 1e-10);
    EXPECT_GE(q, -1e-9);
  }
}

TEST(Render, ZeroAmplitudes) {
  Rng r(6);
  const GaussianField f = random_field(r, 5, 1.0, 0.5);
  const Mat X = render(f, random_positions(r, 4, 1.0), Mat::Zero(5, 12));
  EXPECT_EQ(X.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Render, ElectrodeAtCentreAtPeakTime) {
  GaussianField f;
  f.anchors = Positions::Zero(1, 3);
  f.components.resize(1);
  f.components[0].temporal_center = 0.0;
  const Mat X = render(f, Positions::Zero(1, 3), Mat::Ones(1, 1));
  EXPECT_DOUBLE_EQ(X(0, 0), 1.0);
}

TEST(Render, MatchesTripleLoopOnRandomTinyConfigs) {
  Rng r(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int N = 1 + static_cast<int>(r.below(10)), M = 1 + static_cast<int>(r.below(8));
    const int T = 1 + static_cast<int>(r.below(16));
    const PrecisionVariant v = kAllVariants[trial % 6];
    const GaussianField f = random_field(r, N, 1.0, 0.5, v);
    const Positions e = random_positions(r, M, 1.0);
    const Mat a = random_mat(r, N, T);
    const Mat got = render(f, e, a);
    const Mat want = oracle_render(f, e, a, v);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10) << to_string(v) << " N=" << N << " M=" << M << " T=" << T;
  }
}

TEST(Render, LongTrialsAndMillimetreGeometry) {
  // Exercises the recurrence anchors, the direct-exp fallback and dead pairs.
  Rng r(8);
  for (int trial = 0; trial < 6; ++trial) {
    GaussianField f = random_field(r, 20, 60.0, 0.3, kAllVariants[trial]);
    for (auto& c : f.components) {
      c.chol.log_diag = {std::log(1 / 15.0), std::log(1 / 20.0), std::log(1 / 10.0), std::log(1 / 0.1)};
      c.log_sigma = std::log(15.0);
      c.chol.offdiag[3] *= 0.05;
      c.chol.offdiag[4] *= 0.05;
      c.chol.offdiag[5] *= 0.05;
    }
    const Positions e = random_positions(r, 13, 80.0);
    const Mat a = random_mat(r, 20, 150);
    const Mat want = oracle_render(f, e, a, kAllVariants[trial]);
    const Mat got = render(f, e, a);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST(Render, ChunkingIsBitExact) {
  Rng r(9);
  const GaussianField f = random_field(r, 12, 1.0, 0.4);
  const Positions e = random_positions(r, 11, 1.0);
  const Mat a = random_mat(r, 12, 100);
  const auto t = precompute_tables(f, e);
  std::vector<double> mu;
  for (const auto& c : f.components) mu.push_back(c.temporal_center);
  const Renderer ren(t, mu, 100);
  const Mat full = ren.forward(a, 0);
  for (int chunk : {32, 64, 96}) {
    Mat pieces(11, 100);
    for (int t0 = 0; t0 < 100; t0 += chunk) {
      const int len = std::min(chunk, 100 - t0);
      pieces.middleCols(t0, len) = ren.forward(a.middleCols(t0, len), t0);
    }
    EXPECT_EQ(pieces, full) << chunk;
  }
}

TEST(Render, Linearity) {
  Rng r(10);
  const GaussianField f = random_field(r, 8, 1.0, 0.5);
  const Positions e = random_positions(r, 6, 1.0);
  const Mat a1 = random_mat(r, 8, 40), a2 = random_mat(r, 8, 40);
  const Mat lhs = render(f, e, a1 + a2), rhs = render(f, e, a1) + render(f, e, a2);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Render, DimensionMismatch) {
  Rng r(11);
  const GaussianField f = random_field(r, 4, 1.0, 0.5);
  EXPECT_THROW(render(f, random_positions(r, 3, 1.0), Mat::Ones(5, 8)), ValidationError);
}

TEST(Render, LocalityAlongRays) {
  Rng r(12);
  GaussianField f = random_field(r, 1, 0.0, 0.3, PrecisionVariant::Diagonal);
  f.anchors.setZero();
  for (int ray = 0; ray < 20; ++ray) {
    const Vec3 dir = Vec3(r.normal(), r.normal(), r.normal()).normalized();
    Positions e(30, 3);
    for (int s = 0; s < 30; ++s) e.row(s) = (0.1 * (s + 1)) * dir.transpose();
    const Mat X = render(f, e, Mat::Ones(1, 5));
    for (int s = 1; s < 30; ++s)
      for (int t = 0; t < 5; ++t) EXPECT_LE(std::abs(X(s, t)), std::abs(X(s - 1, t)));
  }
}

TEST(RenderVariant, DiagonalUnitEqualsIsotropicUnit) {
  Rng r(13);
  GaussianField f = random_field(r, 6, 1.0, 0.5);
  for (auto& c : f.components) {
    c.chol.log_diag = {0, 0, 0, 0};
    c.log_sigma = 0.0;
  }
  const Positions e = random_positions(r, 5, 1.0);
  const Mat a = random_mat(r, 6, 9);
  const Mat d = render_variant(f, e, a, PrecisionVariant::Diagonal);
  const Mat i = render_variant(f, e, a, PrecisionVariant::Isotropic);
  EXPECT_LT((d - i).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RenderVariant, FullWithoutCouplingEqualsDiagonal) {
  Rng r(14);
  GaussianField f = random_field(r, 6, 1.0, 0.5);
  for (auto& c : f.components) c.chol.offdiag = {};
  const Positions e = random_positions(r, 5, 1.0);
  const Mat a = random_mat(r, 6, 20);
  EXPECT_EQ(render_variant(f, e, a, PrecisionVariant::Full), render_variant(f, e, a, PrecisionVariant::Diagonal));
}

TEST(RenderVariant, Spatial3x3IgnoresTemporalCentreAndLength) {
  Rng r(15);
  for (int k = 0; k < 10; ++k) {
    GaussianField f = random_field(r, 5, 1.0, 0.5);
    const Positions e = random_positions(r, 4, 1.0);
    const Mat a = Mat::Ones(5, 8);
    const Mat x1 = render_variant(f, e, a, PrecisionVariant::Spatial3x3);
    for (auto& c : f.components) c.temporal_center = 3.0 * r.normal();
    const Mat x2 = render_variant(f, e, a, PrecisionVariant::Spatial3x3);
    EXPECT_EQ(x1, x2);
    const Mat x3 = render_variant(f, e, Mat::Ones(5, 3), PrecisionVariant::Spatial3x3);
    EXPECT_EQ(x1.col(0), x3.col(0));
  }
}

TEST(RenderVariant, MaskedCouplingsMatchOracle) {
  Rng r(16);
  for (auto v : kAllVariants) {
    const GaussianField f = random_field(r, 7, 1.0, 0.6);
    const Positions e = random_positions(r, 6, 1.0);
    const Mat a = random_mat(r, 7, 10);
    EXPECT_LT((render_variant(f, e, a, v) - oracle_render(f, e, a, v)).cwiseAbs().maxCoeff(), 1e-10) << to_string(v);
  }
}

TEST(KernelWeights, AgreeWithRendererColumn) {
  Rng r(17);
  const GaussianField f = random_field(r, 6, 1.0, 0.5);
  const Positions e = random_positions(r, 5, 1.0);
  const auto t = precompute_tables(f, e);
  std::vector<double> mu;
  for (const auto& c : f.components) mu.push_back(c.temporal_center);
  const Mat a = random_mat(r, 6, 12);
  const Mat X = render(f, e, a);
  for (int s = 0; s < 12; ++s) {
    const Mat K = kernel_weights(t, mu, s, 12);
    EXPECT_LT((K * a.col(s) - X.col(s)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Variants, NamesRoundTrip) {
  for (auto v : kAllVariants) EXPECT_EQ(precision_variant_from_string(to_string(v)), v);
  EXPECT_THROW(precision_variant_from_string("bogus"), ParseError);
}
