#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "emag/baselines.hpp"
#include "emag/montage.hpp"

using namespace emag;

namespace {

double kernel_reference(double x, int m, int terms) {
  double s = 0.0;
  for (int n = 1; n <= terms; ++n)
    s += (2.0 * n + 1.0) / std::pow(n * (n + 1.0), m) * std::legendre(static_cast<unsigned>(n), x);
  return s / (4.0 * std::numbers::pi);
}

Positions rows_of(const Positions& p, const std::vector<int>& idx) { return p(idx, Eigen::all); }

}  // namespace

TEST(SplineKernel, MatchesStdLegendre) {
  SplineConfig cfg;
  for (double x : {-1.0, -0.7, -0.2, 0.0, 0.3, 0.8, 0.99, 1.0})
    EXPECT_NEAR(spline_kernel(x, cfg), kernel_reference(x, cfg.order, cfg.n_terms), 1e-13) << x;
  cfg.order = 3;
  cfg.n_terms = 20;
  EXPECT_NEAR(spline_kernel(0.5, cfg), kernel_reference(0.5, 3, 20), 1e-13);
}

TEST(SplineKernel, SymmetricAndPeaksAtZeroAngle) {
  SplineConfig cfg;
  for (double x = -0.9; x < 1.0; x += 0.1) EXPECT_LT(spline_kernel(x, cfg), spline_kernel(1.0, cfg));
}

TEST(SplineMatrix, RowsSumToOne) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::random(3, 15));
  const Mat S = spline_matrix(rows_of(m.positions(), idx), m.positions(), SplineConfig{});
  EXPECT_EQ(S.rows(), 62);
  EXPECT_EQ(S.cols(), 15);
  EXPECT_LT((S.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(SplineMatrix, InterpolatesAtSourceElectrodes) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::random(1, 20));
  SplineConfig cfg;
  cfg.lambda = 0.0;
  const Mat S = spline_matrix(rows_of(m.positions(), idx), m.positions(), cfg);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Vec e = Vec::Zero(20);
    e[static_cast<Eigen::Index>(i)] = 1.0;
    EXPECT_LT((S.row(idx[i]).transpose() - e).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SplineMatrix, RadiusIndependent) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::random(2, 10));
  const Positions ld = rows_of(m.positions(), idx);
  const Mat a = spline_matrix(ld, m.positions(), SplineConfig{});
  const Mat b = spline_matrix(ld * 0.01, m.positions() * 3.0, SplineConfig{});
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SplineMatrix, DegenerateInputsRejected) {
  const Montage m = seed62_montage();
  Positions two = m.positions().topRows(2);
  EXPECT_THROW(spline_matrix(two, m.positions(), SplineConfig{}), ValidationError);
  Positions dup = m.positions().topRows(4);
  dup.row(3) = dup.row(1) * 2.0;
  EXPECT_THROW(spline_matrix(dup, m.positions(), SplineConfig{}), NumericError);
  Positions zero = m.positions().topRows(4);
  zero.row(0).setZero();
  EXPECT_THROW(spline_matrix(zero, m.positions(), SplineConfig{}), ValidationError);
}

TEST(SplineUpsample, LinearAndShapeChecked) {
  const Montage m = seed62_montage();
  const auto idx = select_subset(m, SubsetSpec::random(4, 8));
  const Positions ld = rows_of(m.positions(), idx);
  Rng r(5);
  Mat X(8, 12);
  for (auto& v : X.reshaped()) v = r.normal();
  const Mat up = spline_upsample(X, ld, m.positions(), SplineConfig{});
  EXPECT_LT((up - spline_matrix(ld, m.positions(), SplineConfig{}) * X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(spline_upsample(Mat::Zero(7, 3), ld, m.positions(), SplineConfig{}), ValidationError);
  // A constant field is reproduced everywhere.
  const Mat c = spline_upsample(Mat::Constant(8, 2, 3.5), ld, m.positions(), SplineConfig{});
  EXPECT_LT((c.array() - 3.5).abs().maxCoeff(), 1e-8);
}

TEST(SplineConfigJson, RoundTrip) {
  SplineConfig c;
  c.order = 3;
  c.lambda = 1e-4;
  EXPECT_EQ(SplineConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(SplineConfig::from_json({{"m", 4}}), ParseError);
}

TEST(DirectMlpSizing, SmallestWidthReachingTarget) {
  const long f = 32, m = 15, M = 62;
  auto count = [&](long h) { return encoder_param_count(m, f) + f * h + h + h * M + M; };
  for (long target : {5000L, 20000L, 76000L}) {
    const int h = direct_mlp_hidden_for(target, m, f, M);
    EXPECT_GE(count(h), target);
    EXPECT_LT(count(h - 1), target);
  }
  EXPECT_EQ(direct_mlp_hidden_for(1, m, f, M), 1);
}

TEST(DirectMlpForward, MatchesLoops) {
  Rng r(6);
  Mat We(3, 2), W1(4, 3), W2(5, 4);
  Vec be(3), b1(4), b2(5);
  for (Mat* M : {&We, &W1, &W2})
    for (auto& v : M->reshaped()) v = r.normal();
  for (Vec* v : {&be, &b1, &b2})
    for (auto& x : *v) x = r.normal();
  const TemporalEncoder enc{ConstMatMap(We.data(), 3, 2), ConstVecMap(be.data(), 3)};
  const DirectMlp mlp{ConstMatMap(W1.data(), 4, 3), ConstVecMap(b1.data(), 4), ConstMatMap(W2.data(), 5, 4),
                      ConstVecMap(b2.data(), 5)};
  Mat X(2, 6);
  for (auto& v : X.reshaped()) v = r.normal();
  const Mat Y = direct_mlp_forward(X, enc, mlp);
  for (int t = 0; t < 6; ++t) {
    const Vec h = (We * X.col(t) + be).cwiseMax(0.0);
    const Vec z = (W1 * h + b1).cwiseMax(0.0);
    EXPECT_LT((W2 * z + b2 - Y.col(t)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LearnedLinear, IsMatrixProduct) {
  Mat W(2, 3), a(3, 2);
  W << 1, 2, 3, 4, 5, 6;
  a << 1, 0, 0, 1, 1, 1;
  Mat want(2, 2);
  want << 4, 5, 10, 11;
  EXPECT_EQ(learned_linear_forward(a, W), want);
  EXPECT_THROW(learned_linear_forward(Mat::Zero(2, 2), W), ValidationError);
}

TEST(StaticTemplate, EqualsRenderWithConstantAmplitudes) {
  GaussianField f;
  f.anchors = Positions(2, 3);
  f.anchors << 0, 0, 0, 0.5, 0, 0;
  f.components.resize(2);
  f.components[0].amplitude = 1.5;
  f.components[1].amplitude = -0.5;
  f.components[1].temporal_center = 0.4;
  Positions e(3, 3);
  e << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Mat a(2, 10);
  a.row(0).setConstant(1.5);
  a.row(1).setConstant(-0.5);
  EXPECT_LT((static_template_forward(f, e, 10) - render(f, e, a)).cwiseAbs().maxCoeff(), 1e-14);
}
