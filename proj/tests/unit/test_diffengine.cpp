#include <gtest/gtest.h>

#include "emag/diffengine.hpp"
#include "fixtures.hpp"

using namespace emag;
using emag::testing::perturb;
using emag::testing::tiny_config;
using emag::testing::tiny_sample;

namespace {

struct VariantCase {
  PrecisionVariant prec;
  ConditioningVariant cond;
  ForwardVariant fwd;
  GridVariant grid;
};

std::vector<VariantCase> all_cases() {
  std::vector<VariantCase> out;
  for (auto prec : {PrecisionVariant::Full, PrecisionVariant::Spatial3x3, PrecisionVariant::Diagonal,
                    PrecisionVariant::SpatialOnlyCoupling, PrecisionVariant::TemporalOnlyCoupling,
                    PrecisionVariant::Isotropic})
    for (auto cond : {ConditioningVariant::PerGridPoint, ConditioningVariant::GlobalScalar, ConditioningVariant::None,
                      ConditioningVariant::PreInterpolated})
      out.push_back({prec, cond, ForwardVariant::Gaussian, GridVariant::FreeInit});
  out.push_back({PrecisionVariant::Full, ConditioningVariant::PerGridPoint, ForwardVariant::Gaussian, GridVariant::Sphere});
  out.push_back({PrecisionVariant::Full, ConditioningVariant::PerGridPoint, ForwardVariant::Gaussian, GridVariant::SurfaceShell});
  out.push_back({PrecisionVariant::Full, ConditioningVariant::PerGridPoint, ForwardVariant::DirectMlp, GridVariant::Sphere});
  out.push_back({PrecisionVariant::Full, ConditioningVariant::PerGridPoint, ForwardVariant::LearnedLinear, GridVariant::Sphere});
  out.push_back({PrecisionVariant::Full, ConditioningVariant::None, ForwardVariant::LearnedLinear, GridVariant::Sphere});
  return out;
}

std::string case_name(const VariantCase& c) {
  return to_string(c.prec) + "/" + to_string(c.cond) + "/" + to_string(c.fwd) + "/" + to_string(c.grid);
}

}  // namespace

TEST(FiniteDiff, EveryVariantWithinTolerance) {
  TrainConfig tc;
  tc.chunk_T = 8;
  for (const auto& vc : all_cases()) {
    Model m(tiny_config(vc.prec, vc.cond, vc.fwd, vc.grid));
    perturb(m);
    const auto rep = finite_diff_check(m, tiny_sample(), tc, 1e-5);
    EXPECT_LT(rep.worst(), 1e-4) << case_name(vc) << " worst group " << rep.worst_group();
    long total = 0;
    for (const auto& [g, n] : rep.checked) total += n;
    EXPECT_EQ(total, m.parameter_count()) << case_name(vc);
  }
}

TEST(FiniteDiff, ChunkBoundariesInsideTrial) {
  // 80 steps span three 32-step anchor blocks; the chunk size changes only the grouping.
  Model m(tiny_config());
  perturb(m);
  const Sample s = tiny_sample(8, 80);
  TrainConfig tc;
  tc.chunk_T = 32;
  const Vec g32 = gradients(m, s, tc);
  tc.chunk_T = 96;
  const Vec g96 = gradients(m, s, tc);
  EXPECT_LT((g32 - g96).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, g96.cwiseAbs().maxCoeff()));
  EXPECT_LT(finite_diff_check(m, s, tc, 1e-5).worst(), 1e-4);
}

TEST(FiniteDiff, DetectsCorruptedGradient) {
  Model m(tiny_config());
  perturb(m);
  TrainConfig tc;
  const Sample s = tiny_sample();
  Vec g = gradients(m, s, tc);
  const auto& grp = m.layout().at("offdiag");
  g[static_cast<Eigen::Index>(grp.offset) + 2] *= 1.5;
  const auto rep = finite_diff_check(m, s, tc, 1e-5, &g);
  EXPECT_FALSE(rep.passed(1e-4));
  EXPECT_EQ(rep.worst_group(), "offdiag");
}

TEST(Gradients, MaskedEntriesAreZero) {
  Model m(tiny_config(PrecisionVariant::Spatial3x3));
  perturb(m);
  const Vec g = gradients(m, tiny_sample(), TrainConfig{});
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (m.mask()[i] == 0) EXPECT_EQ(g[i], 0.0);
}

TEST(Gradients, NonFiniteNamesGroup) {
  Model m(tiny_config());
  Sample s = tiny_sample();
  s.hd(2, 3) = std::nan("");
  try {
    gradients(m, s, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos) << e.what();
  }
}

TEST(Gradients, OverflowingWidthRejected) {
  Model m(tiny_config());
  m.group("log_diag")(0, 0) = 800.0;
  EXPECT_THROW(gradients(m, tiny_sample(), TrainConfig{}), NumericError);
}

TEST(Penalty, MeanSquareOverRegularizedGroups) {
  Model m(tiny_config());
  perturb(m);
  double want = 0.0;
  for (const char* name : {"w", "log_diag", "offdiag"}) {
    const auto g = m.group(name);
    want += 0.01 * g.squaredNorm() / static_cast<double>(g.size());
  }
  EXPECT_NEAR(penalty(m, 0.01), want, 1e-14);
  EXPECT_EQ(penalty(m, 0.0), 0.0);
}

TEST(Penalty, SkipsMaskedEntries) {
  Model m(tiny_config(PrecisionVariant::SpatialOnlyCoupling));
  perturb(m);
  const auto off = m.group("offdiag");
  double want = 0.0;
  for (Eigen::Index n = 0; n < off.rows(); ++n)
    for (int k = 0; k < 3; ++k) want += off(n, k) * off(n, k);
  want /= static_cast<double>(off.rows() * 3);
  want += m.group("w").squaredNorm() / static_cast<double>(m.group("w").size());
  want += m.group("log_diag").squaredNorm() / static_cast<double>(m.group("log_diag").size());
  EXPECT_NEAR(penalty(m, 1.0), want, 1e-12);
}

TEST(Loss, MseExample) {
  const Model m(tiny_config());
  Mat p(2, 2), t(2, 2);
  p << 1, 2, 3, 4;
  t << 1, 2, 3, 6;
  EXPECT_DOUBLE_EQ(loss(p, t, m, 0.0), 1.0);
  EXPECT_THROW(loss(p, Mat::Zero(2, 3), m, 0.0), ValidationError);
}

TEST(Clip, ScalesOnlyAboveThreshold) {
  Vec g(2);
  g << 3, 4;
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g.norm(), 1.0, 1e-15);
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  Vec small(2);
  small << 0.1, 0.1;
  const Vec before = small;
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * sign(g) up to eps.
  TrainConfig tc;
  tc.lr = 0.01;
  tc.grad_clip = 1e9;
  Vec p = Vec::Zero(3);
  Vec g(3);
  g << 2.0, -0.5, 0.0;
  AdamState s;
  adam_step(p, g, s, tc, Vec::Ones(3));
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, MatchesReferenceRecursion) {
  TrainConfig tc;
  tc.lr = 0.05;
  tc.grad_clip = 1.0;
  Rng r(3);
  Vec p = Vec::Zero(4), ref = p;
  Vec m = Vec::Zero(4), v = Vec::Zero(4);
  AdamState s;
  for (int k = 1; k <= 20; ++k) {
    Vec g(4);
    for (auto& x : g) x = 3.0 * r.normal();
    Vec gc = g;
    const double n = gc.norm();
    if (n > tc.grad_clip) gc *= tc.grad_clip / n;
    for (int i = 0; i < 4; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * gc[i];
      v[i] = 0.999 * v[i] + 0.001 * gc[i] * gc[i];
      const double mh = m[i] / (1 - std::pow(0.9, k)), vh = v[i] / (1 - std::pow(0.999, k));
      ref[i] -= tc.lr * mh / (std::sqrt(vh) + tc.eps);
    }
    adam_step(p, g, s, tc, Vec::Ones(4));
  }
  EXPECT_LT((p - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adam, MaskFreezesEntries) {
  TrainConfig tc;
  Vec p = Vec::Ones(3);
  Vec mask(3);
  mask << 1, 0, 1;
  AdamState s;
  adam_step(p, Vec::Ones(3), s, tc, mask);
  EXPECT_EQ(p[1], 1.0);
  EXPECT_LT(p[0], 1.0);
}

TEST(EarlyStop, PatienceCounting) {
  EarlyStopping es(2, 0.0);
  EXPECT_FALSE(es.should_stop());
  EXPECT_TRUE(es.update(1.0));
  EXPECT_FALSE(es.update(1.0));  // equal is not an improvement
  EXPECT_FALSE(es.should_stop());
  EXPECT_FALSE(es.update(2.0));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best(), 1.0);
}

TEST(EarlyStop, MinDeltaAndReset) {
  EarlyStopping es(2, 0.1);
  es.update(1.0);
  EXPECT_FALSE(es.update(0.95));
  EXPECT_TRUE(es.update(0.85));
  EXPECT_FALSE(es.should_stop());
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.max_epochs = 7;
  EXPECT_EQ(TrainConfig::from_json(tc.to_json()).to_json(), tc.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"learning_rate", 1}}), ParseError);
  TrainConfig bad;
  bad.lr = -1;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.max_epochs = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  TrainConfig c;
  c.chunk_T = 40;
  EXPECT_EQ(c.effective_chunk(), 64);
}

TEST(Train, LossDecreasesAndBestIsRestored) {
  Model m(tiny_config());
  // Target generated by a perturbed copy so the task is learnable.
  Model teacher(tiny_config());
  perturb(teacher, 17);
  std::vector<Sample> tr, va;
  for (int i = 0; i < 6; ++i) {
    Sample s = tiny_sample(static_cast<std::uint64_t>(i), 32);
    s.hd = teacher.predict(s.ld);
    (i < 4 ? tr : va).push_back(s);
  }
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.max_epochs = 30;
  tc.patience = 30;
  const double before = m.mse(va[0].ld, va[0].hd, 32, nullptr) + m.mse(va[1].ld, va[1].hd, 32, nullptr);
  int calls = 0;
  const auto res = train(m, tr, va, tc, [&](const EpochRecord&) { ++calls; });
  const auto& rep = res.report;
  EXPECT_EQ(calls, static_cast<int>(rep.epochs.size()));
  EXPECT_LT(rep.best_val, before / 2 * 0.9);
  const double after = (m.mse(va[0].ld, va[0].hd, 32, nullptr) + m.mse(va[1].ld, va[1].hd, 32, nullptr)) / 2;
  EXPECT_NEAR(after, rep.best_val, 1e-12);
  EXPECT_EQ(res.optimizer.step, 4L * static_cast<long>(rep.epochs.size()));
  EXPECT_EQ(rep.stop_reason, "max-epochs");
}

TEST(Train, DeterministicGivenSeed) {
  std::vector<Sample> tr{tiny_sample(1), tiny_sample(2), tiny_sample(3)}, va{tiny_sample(4)};
  TrainConfig tc;
  tc.max_epochs = 3;
  Model a(tiny_config()), b(tiny_config());
  train(a, tr, va, tc);
  train(b, tr, va, tc);
  EXPECT_EQ(a.params(), b.params());
}

TEST(Train, EarlyStoppingTriggers) {
  std::vector<Sample> tr{tiny_sample(1)}, va{tiny_sample(4)};
  TrainConfig tc;
  tc.lr = 1e-300;  // validation never improves after the first epoch
  tc.max_epochs = 50;
  tc.patience = 3;
  Model m(tiny_config());
  const auto rep = train(m, tr, va, tc).report;
  EXPECT_EQ(rep.stop_reason, "early-stopping");
  EXPECT_EQ(rep.stop_epoch, 4);
  EXPECT_EQ(rep.best_epoch, 1);
}

TEST(Train, EmptySplitsRejected) {
  Model m(tiny_config());
  EXPECT_THROW(train(m, {}, {tiny_sample()}, TrainConfig{}), ValidationError);
  EXPECT_THROW(train(m, {tiny_sample()}, {}, TrainConfig{}), ValidationError);
}
