#include <gtest/gtest.h>

#include <cmath>

#include "stairs/two_layer.hpp"

using namespace stairs;

namespace {

TeacherSpec make_teacher(Eigen::Index d, TeacherKind kind, InputCovariance input, std::uint64_t seed) {
  RngHandle r(seed);
  TeacherSpec t;
  t.kind = kind;
  t.spikes = SpikeSet::orthogonal(d, r);
  t.input = input;
  return t;
}

TrainingLogRow row(std::int64_t step, double full, double ge) {
  TrainingLogRow r;
  r.step = step;
  r.err_full = full;
  r.err_gauss_equiv = ge;
  return r;
}

}  // namespace

TEST(TwoLayerNet, RandomInitScales) {
  RngHandle r(1);
  const auto net = TwoLayerNet::random(400, 50, ActivationSpec::relu(), r);
  EXPECT_NEAR(net.W.squaredNorm() / 50.0, 1.0, 0.05);
  for (Eigen::Index k = 0; k < 50; ++k) EXPECT_EQ(std::abs(net.a[k]), 1.0 / 50.0);
  EXPECT_THROW(TwoLayerNet::random(0, 3, ActivationSpec::relu(), r), InvalidDimension);
}

TEST(TwoLayerNet, DenseForwardOracle) {
  TwoLayerNet net;
  net.W.resize(2, 3);
  net.W << 1.0, 0.0, -1.0, 0.5, 0.5, 0.5;
  net.a.resize(2);
  net.a << 2.0, -1.0;
  Vec x(3);
  x << 1.0, 2.0, -3.0;
  // Pre-activations 4 and 0: f = 2 * relu(4) - relu(0) = 8.
  EXPECT_DOUBLE_EQ(forward(net, x), 8.0);
  Mat X(3, 2);
  X.col(0) = x;
  X.col(1) = -x;
  const Vec f = forward_batch(net, X);
  EXPECT_DOUBLE_EQ(f[0], 8.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(squared_loss(net, x, 6.0), 2.0);
  EXPECT_THROW(forward(net, Vec::Zero(4)), InvalidDimension);
}

TEST(TwoLayerNet, ZeroReadoutIsIdenticallyZero) {
  RngHandle r(2);
  auto net = TwoLayerNet::random(10, 7, ActivationSpec::smoothed_relu(2.0), r);
  net.a.setZero();
  for (int k = 0; k < 20; ++k) EXPECT_EQ(forward(net, sample_normal_vector(10, r)), 0.0);
}

TEST(TwoLayerNet, GradientMatchesFiniteDifferences) {
  RngHandle r(3);
  auto net = TwoLayerNet::random(8, 4, ActivationSpec::smoothed_relu(3.0), r);
  net.a = sample_normal_vector(4, r);
  const Vec x = sample_normal_vector(8, r);
  const double y = 0.7;
  const auto g = loss_gradient(net, x, y);
  const double h = 1e-6;
  double err = 0.0, scale = 0.0;
  for (Eigen::Index k = 0; k < 4; ++k) {
    for (Eigen::Index i = 0; i < 8; ++i) {
      auto p = net, m = net;
      p.W(k, i) += h;
      m.W(k, i) -= h;
      const double fd = (squared_loss(p, x, y) - squared_loss(m, x, y)) / (2 * h);
      err = std::max(err, std::abs(fd - g.dW(k, i)));
      scale = std::max(scale, std::abs(g.dW(k, i)));
    }
    auto p = net, m = net;
    p.a[k] += h;
    m.a[k] -= h;
    const double fd = (squared_loss(p, x, y) - squared_loss(m, x, y)) / (2 * h);
    err = std::max(err, std::abs(fd - g.da[k]));
  }
  EXPECT_LT(err / scale, 1e-5);
}

TEST(TopKOverlaps, Examples) {
  TwoLayerNet net;
  net.W = Mat::Zero(3, 2);
  net.W.row(0) << 1.0, 0.0;
  net.W.row(1) << 1.0, 1.0;
  net.a = Vec::Ones(3);
  Vec e0(2);
  e0 << 2.0, 0.0;
  std::size_t excluded = 0;
  EXPECT_DOUBLE_EQ(top_k_overlaps(net, e0, 1, &excluded), 1.0);
  EXPECT_EQ(excluded, 1u);
  EXPECT_NEAR(top_k_overlaps(net, e0, 2), 0.5 * (1.0 + std::sqrt(0.5)), 1e-15);
  // k larger than the number of non-zero neurons averages over what is left.
  EXPECT_NEAR(top_k_overlaps(net, e0, 3), 0.5 * (1.0 + std::sqrt(0.5)), 1e-15);
  EXPECT_THROW(top_k_overlaps(net, e0, 0), InvalidParameter);
  EXPECT_THROW(top_k_overlaps(net, Vec::Zero(2), 1), InvalidParameter);
}

TEST(Teacher, LabelAtOrigin) {
  const auto t = make_teacher(6, TeacherKind::Plain, InputCovariance::identity(), 4);
  EXPECT_NEAR(teacher_label(t, Vec::Zero(6)), -0.094734345490753, 1e-14);
  const auto mixed = make_teacher(6, TeacherKind::Mixed, InputCovariance::identity(), 4);
  const Vec x = mixed.spikes.u + mixed.spikes.v;
  // h1 h1 term adds 1 over the plain teacher at this point.
  EXPECT_NEAR(teacher_label(mixed, x) - teacher_label(t, x), 1.0, 1e-12);
}

TEST(Teacher, CrossSpikedMoments) {
  const auto t = make_teacher(12, TeacherKind::Plain, InputCovariance::cross_spiked(0.5), 5);
  RngHandle r(6);
  const int n = 200000;
  double uv = 0, vv = 0, uu = 0, ww = 0;
  const Vec& perp = t.spikes.m;
  Vec x;
  for (int i = 0; i < n; ++i) {
    sample_teacher_input(t, r, x);
    const double pu = t.spikes.u.dot(x), pv = t.spikes.v.dot(x), pw = perp.dot(x);
    uv += pu * pv;
    uu += pu * pu;
    vv += pv * pv;
    ww += pw * pw;
  }
  EXPECT_NEAR(uv / n, 0.5, 0.01);
  EXPECT_NEAR(uu / n, 1.0, 0.015);
  EXPECT_NEAR(vv / n, 1.0, 0.015);
  EXPECT_NEAR(ww / n, 1.0, 0.015);
  EXPECT_THROW(InputCovariance::cross_spiked(1.0), InvalidParameter);
}

TEST(Training, EvaluationSchedule) {
  TrainConfig2L c;
  c.steps = 100;
  c.eval_per_decade = 1;
  EXPECT_EQ(evaluation_steps(c), (std::vector<std::int64_t>{0, 1, 10, 100}));
  c.eval_every = 30;
  EXPECT_EQ(evaluation_steps(c), (std::vector<std::int64_t>{0, 30, 60, 90, 100}));
  c.steps = 0;
  EXPECT_EQ(evaluation_steps(c), (std::vector<std::int64_t>{0}));
}

TEST(Training, ZeroLearningRateGivesFlatLog) {
  McmParams p;
  p.d = 16;
  p.beta_m = 1.0;
  p.beta_u = 5.0;
  p.beta_v = 10.0;
  TrainConfig2L c;
  c.eta1 = 0.0;
  c.steps = 500;
  c.eval_every = 100;
  c.eval_set_size = 500;
  const auto log = run_two_layer(p, 8, ActivationSpec::relu(), c, RngHandle(7));
  ASSERT_EQ(log.size(), 6u);
  for (const auto& r : log) {
    EXPECT_EQ(r.err_full, log.front().err_full);
    EXPECT_EQ(r.top5_u, log.front().top5_u);
    EXPECT_FALSE(std::isnan(r.err_gauss_equiv));
  }
  EXPECT_TRUE(std::isnan(log.front().loss_train));
}

TEST(Training, DeterministicAndLearnsMean) {
  McmParams p;
  p.d = 16;
  p.beta_m = 2.0;
  TrainConfig2L c;
  c.steps = 3000;
  c.eval_set_size = 2000;
  const auto a = run_two_layer(p, 16, ActivationSpec::relu(), c, RngHandle(8));
  const auto b = run_two_layer(p, 16, ActivationSpec::relu(), c, RngHandle(8));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].err_full, b[i].err_full);
  EXPECT_LT(a.back().err_full, 0.35);
  EXPECT_GT(a.back().top5_m, a.front().top5_m);
}

TEST(Training, TeacherRegressionRuns) {
  TeacherSpec t;
  t.kind = TeacherKind::Mixed;
  TrainConfig2L c;
  c.eta1 = 0.03;
  c.steps = 2000;
  c.eval_set_size = 500;
  const auto log = run_two_layer(t, 16, 8, ActivationSpec::relu(), c, RngHandle(9));
  EXPECT_TRUE(std::isnan(log.back().err_mean_only));
  EXPECT_TRUE(std::isfinite(log.back().err_full));
}

TEST(LogAnalysis, SeparationAndDrop) {
  const TrainingLog log{row(0, 0.5, 0.5), row(10, 0.45, 0.5), row(100, 0.40, 0.5), row(1000, 0.3, 0.31),
                        row(10000, 0.2, 0.3), row(100000, 0.1, 0.3)};
  EXPECT_EQ(separation_step(log, 0.03, 2), 10);
  EXPECT_FALSE(separation_step(log, 0.03, 3).has_value());
  EXPECT_FALSE(separation_step(log, 0.5, 1).has_value());
  EXPECT_EQ(first_drop_step(log, &TrainingLogRow::err_full, 0.05), 100);
  EXPECT_EQ(first_drop_step(log, &TrainingLogRow::err_gauss_equiv, 0.05), 1000);
  EXPECT_FALSE(first_drop_step({}, &TrainingLogRow::err_full).has_value());
  TrainingLog ov = log;
  ov[4].top5_v = 0.6;
  EXPECT_EQ(overlap_threshold_step(ov, &TrainingLogRow::top5_v, 0.4), 10000);
}
