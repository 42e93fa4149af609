#pragma once

// Two-layer network f(x) = sum_k a_k s(w_k . x) trained by online SGD on the squared
// loss (f - y)^2 / 2, one fresh sample per step. The first layer uses eta1, the second
// eta2 = eps * eta1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stairs/errors.hpp"
#include "stairs/hermite.hpp"
#include "stairs/mcm.hpp"
#include "stairs/rng.hpp"
#include "stairs/sampling.hpp"

namespace stairs {

struct TwoLayerNet {
  Mat W;  // m x d
  Vec a;  // m
  ActivationSpec activation = ActivationSpec::relu();

  Eigen::Index width() const noexcept { return W.rows(); }
  Eigen::Index dim() const noexcept { return W.cols(); }

  /// Rows of W i.i.d. N(0, 1/d), second layer i.i.d. +-1/m.
  static TwoLayerNet random(Eigen::Index d, Eigen::Index m, ActivationSpec activation, RngHandle& rng) {
    if (d < 1 || m < 1) throw InvalidDimension("TwoLayerNet: d and m must be >= 1");
    TwoLayerNet net;
    net.W.resize(m, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index i = 0; i < d; ++i) net.W(k, i) = scale * rng.normal();
    }
    net.a.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) net.a[k] = rng.rademacher() / static_cast<double>(m);
    net.activation = std::move(activation);
    return net;
  }

  void validate() const {
    if (W.rows() < 1 || a.size() != W.rows()) throw InvalidDimension("TwoLayerNet: W and a disagree on m");
    if (!W.allFinite() || !a.allFinite()) throw InvalidState("TwoLayerNet: non-finite weights");
  }
};

inline double forward(const TwoLayerNet& net, const Vec& x) {
  if (x.size() != net.dim()) throw InvalidDimension("forward: input dimension does not match the network");
  const Vec pre = net.W * x;
  double f = 0.0;
  for (Eigen::Index k = 0; k < pre.size(); ++k) f += net.a[k] * net.activation(pre[k]);
  return f;
}

/// f on every column of X.
inline Vec forward_batch(const TwoLayerNet& net, const Mat& X) {
  if (X.rows() != net.dim()) throw InvalidDimension("forward_batch: input dimension does not match the network");
  Mat pre = net.W * X;
  const auto& s = net.activation;
  Vec f = Vec::Zero(X.cols());
  for (Eigen::Index j = 0; j < pre.cols(); ++j) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < pre.rows(); ++k) acc += net.a[k] * s(pre(k, j));
    f[j] = acc;
  }
  return f;
}

inline double squared_loss(const TwoLayerNet& net, const Vec& x, double y) {
  const double r = forward(net, x) - y;
  return 0.5 * r * r;
}

struct TwoLayerGradient {
  Mat dW;
  Vec da;
};

/// Gradient of (f(x) - y)^2 / 2.
inline TwoLayerGradient loss_gradient(const TwoLayerNet& net, const Vec& x, double y) {
  const Vec pre = net.W * x;
  double f = 0.0;
  for (Eigen::Index k = 0; k < pre.size(); ++k) f += net.a[k] * net.activation(pre[k]);
  const double r = f - y;
  TwoLayerGradient g;
  g.da.resize(pre.size());
  Vec back(pre.size());
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    g.da[k] = r * net.activation(pre[k]);
    back[k] = r * net.a[k] * net.activation.derivative(pre[k]);
  }
  g.dW = back * x.transpose();
  return g;
}

/// Mean over the k largest |w_j . direction| / |w_j|. Zero-norm neurons are skipped and
/// counted in *excluded.
inline double top_k_overlaps(const TwoLayerNet& net, const Vec& direction, Eigen::Index k,
                             std::size_t* excluded = nullptr) {
  if (k < 1 || k > net.width()) throw InvalidParameter("top_k_overlaps: k must lie in [1, m]");
  if (direction.size() != net.dim()) throw InvalidDimension("top_k_overlaps: direction dimension mismatch");
  const double dn = direction.norm();
  if (!(dn > 0.0)) throw InvalidParameter("top_k_overlaps: direction must be non-zero");
  std::vector<double> ov;
  ov.reserve(static_cast<std::size_t>(net.width()));
  std::size_t skipped = 0;
  const Vec proj = net.W * direction;
  for (Eigen::Index j = 0; j < net.width(); ++j) {
    const double n = net.W.row(j).norm();
    if (n == 0.0) {
      ++skipped;
      continue;
    }
    ov.push_back(std::abs(proj[j]) / (n * dn));
  }
  if (excluded) *excluded = skipped;
  if (ov.empty()) return 0.0;
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ov.size());
  std::partial_sort(ov.begin(), ov.begin() + static_cast<std::ptrdiff_t>(take), ov.end(), std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < take; ++i) acc += ov[i];
  return acc / static_cast<double>(take);
}

// ---------------------------------------------------------------------------
// Teacher-student targets

enum class TeacherKind { Plain, Mixed };

inline std::string to_string(TeacherKind k) { return k == TeacherKind::Plain ? "plain" : "mixed"; }

/// Input covariance of the teacher task: identity, or 1 + gamma (u v^T + v u^T).
struct InputCovariance {
  enum class Kind { Identity, CrossSpiked };
  Kind kind = Kind::Identity;
  double gamma = 0.0;

  static InputCovariance identity() { return {}; }
  static InputCovariance cross_spiked(double gamma) {
    if (!(gamma > -1.0 && gamma < 1.0)) {
      throw InvalidParameter("CrossSpiked covariance needs gamma in (-1, 1), got " + std::to_string(gamma));
    }
    return {Kind::CrossSpiked, gamma};
  }
};

/// Plain:  y = h1(m.x) + h2(u.x) + h4(v.x).
/// Mixed:  y = h1(m.x) + h1(u.x) h1(v.x) + h2(u.x) + h4(v.x).
struct TeacherSpec {
  TeacherKind kind = TeacherKind::Plain;
  SpikeSet spikes;
  InputCovariance input;
  HermiteConvention convention = HermiteConvention::Normalized;

  void validate() const {
    spikes.validate();
    if (!spikes.orthogonal()) throw InvalidParameter("TeacherSpec: spikes must be orthonormal");
    if (input.kind == InputCovariance::Kind::CrossSpiked && !(input.gamma > -1.0 && input.gamma < 1.0)) {
      throw InvalidParameter("TeacherSpec: CrossSpiked gamma must lie in (-1, 1)");
    }
  }
};

inline double teacher_label(const TeacherSpec& spec, const Vec& x) {
  const double pm = spec.spikes.m.dot(x);
  const double pu = spec.spikes.u.dot(x);
  const double pv = spec.spikes.v.dot(x);
  const auto h = [&](int k, double z) { return hermite_eval(k, z, spec.convention); };
  double y = h(1, pm) + h(2, pu) + h(4, pv);
  if (spec.kind == TeacherKind::Mixed) y += h(1, pu) * h(1, pv);
  return y;
}

/// Writes a teacher input into x. CrossSpiked uses the Cholesky factor of the 2x2 block
/// [[1, g], [g, 1]] in the (u, v) basis, so the cost stays O(d).
inline void sample_teacher_input(const TeacherSpec& spec, RngHandle& rng, Vec& x) {
  x.resize(spec.spikes.dim());
  fill_normal(x, rng);
  if (spec.input.kind == InputCovariance::Kind::Identity) return;
  const double g = spec.input.gamma;
  if (!(g > -1.0 && g < 1.0)) throw InvalidParameter("sample_teacher_input: gamma must lie in (-1, 1)");
  const double zu = spec.spikes.u.dot(x);
  const double zv = spec.spikes.v.dot(x);
  x.noalias() += (g * zu + (std::sqrt(1.0 - g * g) - 1.0) * zv) * spec.spikes.v;
}

inline Vec sample_teacher_input(const TeacherSpec& spec, RngHandle& rng) {
  Vec x;
  sample_teacher_input(spec, rng, x);
  return x;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig2L {
  double eta1 = 0.1;
  /// eta2 = eps * eta1.
  double eps = 0.01;
  std::int64_t steps = 100000;
  /// Evaluate every eval_every steps; 0 selects a geometric schedule with
  /// eval_per_decade points per decade.
  std::int64_t eval_every = 0;
  int eval_per_decade = 10;
  /// Test samples per evaluation set.
  std::int64_t eval_set_size = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(eta1 >= 0.0)) throw InvalidParameter("TrainConfig2L: eta1 must be non-negative");
    if (!(eps > 0.0 && eps <= 1.0)) throw InvalidParameter("TrainConfig2L: eps must lie in (0, 1]");
    if (steps < 0) throw InvalidParameter("TrainConfig2L: steps must be non-negative");
    if (eval_every < 0) throw InvalidParameter("TrainConfig2L: eval_every must be non-negative");
    if (eval_every == 0 && eval_per_decade < 1) throw InvalidParameter("TrainConfig2L: eval_per_decade must be >= 1");
    if (eval_set_size < 1) throw InvalidParameter("TrainConfig2L: eval_set_size must be >= 1");
  }
};

/// Steps at which a run evaluates: 0, the schedule points, and the final step.
inline std::vector<std::int64_t> evaluation_steps(const TrainConfig2L& config) {
  std::vector<std::int64_t> out{0};
  if (config.eval_every > 0) {
    for (std::int64_t s = config.eval_every; s < config.steps; s += config.eval_every) out.push_back(s);
  } else {
    for (int i = 0;; ++i) {
      const auto s = static_cast<std::int64_t>(std::llround(std::pow(10.0, static_cast<double>(i) / config.eval_per_decade)));
      if (s >= config.steps) break;
      if (s > out.back()) out.push_back(s);
    }
  }
  if (config.steps > out.back()) out.push_back(config.steps);
  return out;
}

/// One row of the training log. Errors are misclassification rates for MCM tasks; for
/// teacher tasks err_full is the test mean squared error and the censored columns are NaN.
struct TrainingLogRow {
  std::int64_t step = 0;
  double loss_train = 0.0;
  double err_full = 0.0;
  double err_mean_only = 0.0;
  double err_mean_cov = 0.0;
  double err_gauss_equiv = 0.0;
  double top5_m = 0.0;
  double top5_u = 0.0;
  double top5_v = 0.0;
};

using TrainingLog = std::vector<TrainingLogRow>;

/// MCM classification task with its spikes.
struct McmTask {
  McmParams params;
  SpikeSet spikes;
};

namespace detail {

struct TestSet {
  Mat X;  // d x n
  Vec y;
};

inline TestSet mcm_test_set(const McmSampler& sampler, CensorMode mode, std::int64_t n, RngHandle rng) {
  TestSet t;
  t.X.resize(sampler.params().d, n);
  t.y.resize(n);
  LabeledSample s;
  for (std::int64_t i = 0; i < n; ++i) {
    sampler.draw(rng, s, false, mode);
    t.X.col(i) = s.x;
    t.y[i] = s.y;
  }
  return t;
}

inline double misclassification(const TwoLayerNet& net, const TestSet& t) {
  const Vec f = forward_batch(net, t.X);
  std::int64_t wrong = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if ((f[i] > 0.0 ? 1.0 : -1.0) != t.y[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(f.size());
}

inline double mean_squared_error(const TwoLayerNet& net, const TestSet& t) {
  const Vec f = forward_batch(net, t.X);
  return (f - t.y).squaredNorm() / static_cast<double>(f.size());
}

// In-place SGD step on (x, y); returns the pre-step loss. scratch holds m entries.
inline double sgd_step_2l(TwoLayerNet& net, const Vec& x, double y, double eta1, double eta2, Vec& pre,
                          Vec& back, std::int64_t step) {
  pre.noalias() = net.W * x;
  double f = 0.0;
  for (Eigen::Index k = 0; k < pre.size(); ++k) f += net.a[k] * net.activation(pre[k]);
  const double r = f - y;
  if (!std::isfinite(r)) throw Divergence("two-layer training: non-finite loss", step);
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    back[k] = -eta1 * r * net.a[k] * net.activation.derivative(pre[k]);
    net.a[k] -= eta2 * r * net.activation(pre[k]);
  }
  net.W.noalias() += back * x.transpose();
  return 0.5 * r * r;
}

}  // namespace detail

/// Online training on the mixed-cumulant model. Test sets for the four censor modes are
/// drawn once from copies of the same stream, so they share labels, latents and noise.
/// loss_train is the mean training loss since the previous evaluation.
inline TrainingLog train_online(TwoLayerNet& net, const McmTask& task, const TrainConfig2L& config, RngHandle& rng) {
  config.validate();
  net.validate();
  if (task.params.d != net.dim()) throw InvalidDimension("train_online: task and network dimensions differ");
  const McmSampler sampler(task.params, task.spikes);
  const RngHandle test_rng = rng.derive(0, 21);
  RngHandle data_rng = rng.derive(0, 22);

  const bool ge = task.spikes.orthogonal();
  const auto full = detail::mcm_test_set(sampler, CensorMode::Full, config.eval_set_size, test_rng);
  const auto mean_only = detail::mcm_test_set(sampler, CensorMode::MeanOnly, config.eval_set_size, test_rng);
  const auto mean_cov = detail::mcm_test_set(sampler, CensorMode::MeanCov, config.eval_set_size, test_rng);
  std::optional<detail::TestSet> gauss;
  if (ge) gauss = detail::mcm_test_set(sampler, CensorMode::GaussianEquivalent, config.eval_set_size, test_rng);

  const double eta2 = config.eps * config.eta1;
  const auto schedule = evaluation_steps(config);
  TrainingLog log;
  Vec pre(net.width());
  Vec back(net.width());
  LabeledSample sample;
  double loss_acc = 0.0;
  std::int64_t loss_count = 0;
  std::int64_t step = 0;
  for (const std::int64_t target : schedule) {
    for (; step < target; ++step) {
      sampler.draw(data_rng, sample);
      loss_acc += detail::sgd_step_2l(net, sample.x, sample.y, config.eta1, eta2, pre, back, step + 1);
      ++loss_count;
    }
    TrainingLogRow row;
    row.step = step;
    row.loss_train = loss_count > 0 ? loss_acc / static_cast<double>(loss_count)
                                    : std::numeric_limits<double>::quiet_NaN();
    row.err_full = detail::misclassification(net, full);
    row.err_mean_only = detail::misclassification(net, mean_only);
    row.err_mean_cov = detail::misclassification(net, mean_cov);
    row.err_gauss_equiv = gauss ? detail::misclassification(net, *gauss) : std::numeric_limits<double>::quiet_NaN();
    row.top5_m = top_k_overlaps(net, task.spikes.m, std::min<Eigen::Index>(5, net.width()));
    row.top5_u = top_k_overlaps(net, task.spikes.u, std::min<Eigen::Index>(5, net.width()));
    row.top5_v = top_k_overlaps(net, task.spikes.v, std::min<Eigen::Index>(5, net.width()));
    log.push_back(row);
    loss_acc = 0.0;
    loss_count = 0;
  }
  return log;
}

/// Online regression on a teacher target; err_full is the test mean squared error.
inline TrainingLog train_online(TwoLayerNet& net, const TeacherSpec& teacher, const TrainConfig2L& config,
                                RngHandle& rng) {
  config.validate();
  net.validate();
  teacher.validate();
  if (teacher.spikes.dim() != net.dim()) throw InvalidDimension("train_online: teacher and network dimensions differ");
  RngHandle test_rng = rng.derive(0, 21);
  RngHandle data_rng = rng.derive(0, 22);

  detail::TestSet test;
  test.X.resize(net.dim(), config.eval_set_size);
  test.y.resize(config.eval_set_size);
  Vec x;
  for (std::int64_t i = 0; i < config.eval_set_size; ++i) {
    sample_teacher_input(teacher, test_rng, x);
    test.X.col(i) = x;
    test.y[i] = teacher_label(teacher, x);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double eta2 = config.eps * config.eta1;
  const auto schedule = evaluation_steps(config);
  TrainingLog log;
  Vec pre(net.width());
  Vec back(net.width());
  double loss_acc = 0.0;
  std::int64_t loss_count = 0;
  std::int64_t step = 0;
  for (const std::int64_t target : schedule) {
    for (; step < target; ++step) {
      sample_teacher_input(teacher, data_rng, x);
      loss_acc += detail::sgd_step_2l(net, x, teacher_label(teacher, x), config.eta1, eta2, pre, back, step + 1);
      ++loss_count;
    }
    TrainingLogRow row;
    row.step = step;
    row.loss_train = loss_count > 0 ? loss_acc / static_cast<double>(loss_count) : nan;
    row.err_full = detail::mean_squared_error(net, test);
    row.err_mean_only = nan;
    row.err_mean_cov = nan;
    row.err_gauss_equiv = nan;
    row.top5_m = top_k_overlaps(net, teacher.spikes.m, std::min<Eigen::Index>(5, net.width()));
    row.top5_u = top_k_overlaps(net, teacher.spikes.u, std::min<Eigen::Index>(5, net.width()));
    row.top5_v = top_k_overlaps(net, teacher.spikes.v, std::min<Eigen::Index>(5, net.width()));
    log.push_back(row);
    loss_acc = 0.0;
    loss_count = 0;
  }
  return log;
}

/// Seeded end-to-end runs: spikes from rng.derive(0, 23), network from rng.derive(0, 24),
/// training stream from rng itself.
inline TrainingLog run_two_layer(const McmParams& params, Eigen::Index width, const ActivationSpec& activation,
                                 const TrainConfig2L& config, RngHandle rng, SpikeSet* spikes_out = nullptr) {
  RngHandle spike_rng = rng.derive(0, 23);
  RngHandle net_rng = rng.derive(0, 24);
  McmTask task{params, SpikeSet::orthogonal(params.d, spike_rng)};
  TwoLayerNet net = TwoLayerNet::random(params.d, width, activation, net_rng);
  if (spikes_out) *spikes_out = task.spikes;
  return train_online(net, task, config, rng);
}

inline TrainingLog run_two_layer(TeacherSpec teacher, Eigen::Index d, Eigen::Index width,
                                 const ActivationSpec& activation, const TrainConfig2L& config, RngHandle rng) {
  RngHandle spike_rng = rng.derive(0, 23);
  RngHandle net_rng = rng.derive(0, 24);
  teacher.spikes = SpikeSet::orthogonal(d, spike_rng);
  TwoLayerNet net = TwoLayerNet::random(d, width, activation, net_rng);
  return train_online(net, teacher, config, rng);
}

// ---------------------------------------------------------------------------
// Log analysis

/// First logged step at which `column` drops below its initial value minus `drop`.
inline std::optional<std::int64_t> first_drop_step(const TrainingLog& log, double TrainingLogRow::*column,
                                                   double drop = 0.05) {
  if (log.empty()) return std::nullopt;
  const double start = log.front().*column;
  for (const auto& row : log) {
    if (row.*column < start - drop) return row.step;
  }
  return std::nullopt;
}

/// First logged step from which err_gauss_equiv - err_full stays above `gap` for
/// `persistence` consecutive evaluations.
inline std::optional<std::int64_t> separation_step(const TrainingLog& log, double gap = 0.03, int persistence = 2) {
  int run = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].err_gauss_equiv - log[i].err_full > gap) {
      if (++run >= persistence) return log[i + 1 - static_cast<std::size_t>(persistence)].step;
    } else {
      run = 0;
    }
  }
  return std::nullopt;
}

/// First logged step at which the top-5 overlap column exceeds `threshold`.
inline std::optional<std::int64_t> overlap_threshold_step(const TrainingLog& log, double TrainingLogRow::*column,
                                                          double threshold) {
  for (const auto& row : log) {
    if (row.*column > threshold) return row.step;
  }
  return std::nullopt;
}

}  // namespace stairs
