#include <gtest/gtest.h>

#include "emag/conditioning.hpp"

using namespace emag;

namespace {

Mat randn(Rng& r, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (auto& v : m.reshaped()) v = r.normal();
  return m;
}

struct Weights {
  Mat We, W1, W2;
  Vec be, b1, b2;
  Weights(Rng& r, int in, int f, int h, int out)
      : We(randn(r, f, in)), W1(randn(r, h, f)), W2(randn(r, out, h)),
        be(Vec(randn(r, f, 1)).array() + 0.5), b1(Vec(randn(r, h, 1)).array() + 0.5), b2(randn(r, out, 1)) {}
  TemporalEncoder enc() const { return {ConstMatMap(We.data(), We.rows(), We.cols()), ConstVecMap(be.data(), be.size())}; }
  ModulationMlp mlp() const {
    return {ConstMatMap(W1.data(), W1.rows(), W1.cols()), ConstVecMap(b1.data(), b1.size()),
            ConstMatMap(W2.data(), W2.rows(), W2.cols()), ConstVecMap(b2.data(), b2.size())};
  }
};

double relu(double x) { return x > 0 ? x : 0.0; }

}  // namespace

TEST(Encoder, HandExample) {
  Mat W(2, 2);
  W << 1, -1, 2, 0;
  Vec b(2);
  b << 0, -3;
  const TemporalEncoder enc{ConstMatMap(W.data(), 2, 2), ConstVecMap(b.data(), 2)};
  const Vec h = encode(enc, Eigen::Vector2d(1.0, 2.0));
  EXPECT_DOUBLE_EQ(h[0], 0.0);  // 1 - 2 clipped
  EXPECT_DOUBLE_EQ(h[1], 0.0);  // 2 - 3 clipped
  const Vec h2 = encode(enc, Eigen::Vector2d(3.0, 1.0));
  EXPECT_DOUBLE_EQ(h2[0], 2.0);
  EXPECT_DOUBLE_EQ(h2[1], 3.0);
}

TEST(Encoder, RejectsWrongWidthAndNonFinite) {
  Rng r(1);
  Weights w(r, 3, 4, 5, 2);
  EXPECT_THROW(encode(w.enc(), Vec::Zero(2)), ValidationError);
  Vec x = Vec::Zero(3);
  x[1] = std::nan("");
  EXPECT_THROW(encode(w.enc(), x), ValidationError);
  EXPECT_THROW(encode_batch(w.enc(), Mat::Zero(4, 6)), ValidationError);
}

TEST(Encoder, BatchMatchesColumns) {
  Rng r(2);
  Weights w(r, 3, 6, 5, 4);
  const Mat X = randn(r, 3, 17);
  const Mat H = encode_batch(w.enc(), X);
  EXPECT_GE(H.minCoeff(), 0.0);
  for (int t = 0; t < 17; ++t) {
    Vec want(6);
    for (int f = 0; f < 6; ++f) {
      double s = w.be[f];
      for (int c = 0; c < 3; ++c) s += w.We(f, c) * X(c, t);
      want[f] = relu(s);
    }
    EXPECT_LT((H.col(t) - want).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((encode(w.enc(), X.col(t)) - want).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Mlp, BatchMatchesLoops) {
  Rng r(3);
  Weights w(r, 3, 6, 5, 4);
  const Mat H = randn(r, 6, 9).cwiseAbs();
  Mat hidden;
  const Mat D = modulate_batch(w.mlp(), H, &hidden);
  ASSERT_EQ(D.rows(), 4);
  for (int t = 0; t < 9; ++t) {
    Vec z(5);
    for (int k = 0; k < 5; ++k) {
      double s = w.b1[k];
      for (int f = 0; f < 6; ++f) s += w.W1(k, f) * H(f, t);
      z[k] = relu(s);
    }
    for (int o = 0; o < 4; ++o) {
      double s = w.b2[o];
      for (int k = 0; k < 5; ++k) s += w.W2(o, k) * z[k];
      EXPECT_NEAR(D(o, t), s, 1e-12);
    }
    EXPECT_LT((hidden.col(t) - z).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((modulate(w.mlp(), H.col(t)) - D.col(t)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Amplitudes, SlotsShareTheirGridPointModulation) {
  Vec w(6);
  w << 1, 2, 3, 4, 5, 6;
  Mat delta(2, 3);
  delta << 10, 20, 30, -1, -2, -3;
  const Mat a = expand_amplitudes(w, delta, 3);
  for (int n = 0; n < 6; ++n)
    for (int t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(a(n, t), w[n] + delta(n / 3, t));
}

TEST(Amplitudes, SingleRowBroadcasts) {
  Vec w(4);
  w << 1, 2, 3, 4;
  Mat delta(1, 2);
  delta << 0.5, -0.5;
  const Mat a = expand_amplitudes(w, delta, 2);
  for (int n = 0; n < 4; ++n) {
    EXPECT_DOUBLE_EQ(a(n, 0), w[n] + 0.5);
    EXPECT_DOUBLE_EQ(a(n, 1), w[n] - 0.5);
  }
}

TEST(Amplitudes, WidthMismatchRejected) {
  EXPECT_THROW(expand_amplitudes(Vec::Zero(6), Mat::Zero(4, 3), 3), ValidationError);
}

TEST(Amplitudes, StaticIgnoresInput) {
  Rng r(4);
  Weights wt(r, 3, 4, 5, 2);
  const Vec w = randn(r, 6, 1);
  const Mat a1 = amplitudes(w, 3, wt.enc(), wt.mlp(), randn(r, 3, 7), ConditioningVariant::None);
  const Mat a2 = amplitudes(w, 3, wt.enc(), wt.mlp(), randn(r, 3, 7), ConditioningVariant::None);
  EXPECT_EQ(a1, a2);
  for (int t = 0; t < 7; ++t) EXPECT_EQ(a1.col(t), w);
}

TEST(Amplitudes, PerGridPointComposesEncoderAndMlp) {
  Rng r(5);
  Weights wt(r, 3, 4, 5, 2);
  const Vec w = randn(r, 6, 1);
  const Mat X = randn(r, 3, 7);
  const Mat a = amplitudes(w, 3, wt.enc(), wt.mlp(), X, ConditioningVariant::PerGridPoint);
  for (int t = 0; t < 7; ++t) {
    const Vec d = modulate(wt.mlp(), encode(wt.enc(), X.col(t)));
    for (int n = 0; n < 6; ++n) EXPECT_NEAR(a(n, t), w[n] + d[n / 3], 1e-13);
  }
  Mat bad = X;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(amplitudes(w, 3, wt.enc(), wt.mlp(), bad, ConditioningVariant::PerGridPoint), ValidationError);
}

TEST(Amplitudes, ReduceIsAdjointOfExpand) {
  Rng r(6);
  for (int rows : {1, 3}) {
    const Mat delta = randn(r, rows, 5);
    const Mat g = randn(r, 6, 5);
    const Mat a = expand_amplitudes(Vec::Zero(6), delta, 2);
    const double lhs = (a.array() * g.array()).sum();
    const double rhs = (delta.array() * reduce_amplitude_grad(g, 2, rows).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng r(7);
  Weights w(r, 3, 4, 5, 2);
  const Mat X = randn(r, 3, 6);
  const Mat G = randn(r, 2, 6);  // upstream gradient; objective is <G, MLP(ENC(X))>
  auto objective = [&](const Weights& p) {
    return (G.array() * modulate_batch(p.mlp(), encode_batch(p.enc(), X)).array()).sum();
  };
  Mat gWe = Mat::Zero(4, 3), gW1 = Mat::Zero(5, 4), gW2 = Mat::Zero(2, 5);
  Vec gbe = Vec::Zero(4), gb1 = Vec::Zero(5), gb2 = Vec::Zero(2);
  const Mat H = encode_batch(w.enc(), X);
  Mat hidden;
  modulate_batch(w.mlp(), H, &hidden);
  MlpGrad mg{MatMap(gW1.data(), 5, 4), VecMap(gb1.data(), 5), MatMap(gW2.data(), 2, 5), VecMap(gb2.data(), 2)};
  const Mat dH = modulate_backward(w.mlp(), H, hidden, G, mg);
  EncoderGrad eg{MatMap(gWe.data(), 4, 3), VecMap(gbe.data(), 4)};
  encode_backward(X, H, dH, eg);

  const double h = 1e-6;
  auto check = [&](auto member, const auto& analytic) {
    Weights p = w;
    auto& target = p.*member;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const double x = target.data()[i];
      target.data()[i] = x + h;
      const double up = objective(p);
      target.data()[i] = x - h;
      const double dn = objective(p);
      target.data()[i] = x;
      EXPECT_NEAR(analytic.data()[i], (up - dn) / (2 * h), 1e-6);
    }
  };
  check(&Weights::We, gWe);
  check(&Weights::be, gbe);
  check(&Weights::W1, gW1);
  check(&Weights::b1, gb1);
  check(&Weights::W2, gW2);
  check(&Weights::b2, gb2);
}

TEST(Counts, Formulas) {
  EXPECT_EQ(encoder_param_count(7, 32), 7 * 32 + 32);
  EXPECT_EQ(mlp_param_count(32, 64, 912), 32 * 64 + 64 + 64 * 912 + 912);
}

TEST(ConditioningNames, RoundTrip) {
  for (auto v : {ConditioningVariant::PerGridPoint, ConditioningVariant::GlobalScalar, ConditioningVariant::None,
                 ConditioningVariant::PreInterpolated})
    EXPECT_EQ(conditioning_variant_from_string(to_string(v)), v);
  EXPECT_EQ(conditioning_variant_from_string("STATIC"), ConditioningVariant::None);
  EXPECT_THROW(conditioning_variant_from_string("film"), ParseError);
}
