#pragma once

// Monte-Carlo oracles for the series machinery, k-statistics along directions and
// checks of the activation assumptions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stairs/errors.hpp"
#include "stairs/hermite.hpp"
#include "stairs/mcm.hpp"
#include "stairs/perceptron.hpp"
#include "stairs/rng.hpp"
#include "stairs/sampling.hpp"

namespace stairs {

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::int64_t n = 0;
};

namespace detail {

struct RunningMoments {
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t n = 0;

  void push(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  McEstimate estimate() const {
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(std::max<std::int64_t>(n, 1))), n};
  }
};

// Unit vector orthogonal to u and v, drawn uniformly.
inline Vec orthogonal_complement_direction(const SpikeSet& spikes, RngHandle& rng) {
  for (;;) {
    Vec w = sample_normal_vector(spikes.dim(), rng);
    w -= spikes.u.dot(w) * spikes.u;
    w -= spikes.v.dot(w) * spikes.v;
    const double n = w.norm();
    if (n > 1e-8) return w / n;
  }
}

}  // namespace detail

/// Empirical mean of 1 - y s(w . x) with w = a_u u + a_v v + sqrt(1 - a_u^2 - a_v^2) w_perp.
inline McEstimate mc_population_loss(const McmParams& params, const SpikeSet& spikes, const ActivationSpec& sigma,
                                     double alpha_u, double alpha_v, std::int64_t n_mc, RngHandle& rng) {
  if (n_mc < 2) throw InvalidParameter("mc_population_loss: n_mc must be >= 2");
  RngHandle w_rng = rng.derive(0, 31);
  RngHandle data_rng = rng.derive(0, 32);
  const Vec w = unit_with_overlaps(spikes, alpha_u, alpha_v, w_rng);
  const McmSampler sampler(params, spikes);
  detail::RunningMoments acc;
  LabeledSample s;
  for (std::int64_t i = 0; i < n_mc; ++i) {
    sampler.draw(data_rng, s);
    acc.push(1.0 - s.y * sigma(w.dot(s.x)));
  }
  return acc.estimate();
}

/// mc_population_loss on a list of overlap pairs, sharing one sample stream: each draw
/// is projected on u, v and a fixed w_perp once, and every grid point reuses the three
/// projections. Per-point estimates and errors are marginally exact; errors between
/// grid points are correlated.
inline std::vector<McEstimate> mc_population_loss_grid(const McmParams& params, const SpikeSet& spikes,
                                                       const ActivationSpec& sigma,
                                                       const std::vector<std::pair<double, double>>& alphas,
                                                       std::int64_t n_mc, RngHandle& rng) {
  if (n_mc < 2) throw InvalidParameter("mc_population_loss_grid: n_mc must be >= 2");
  if (std::abs(spikes.overlap_uv()) > kUnitTolerance) {
    throw InvalidParameter("mc_population_loss_grid: u and v must be orthogonal");
  }
  std::vector<double> rest(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double r2 = 1.0 - alphas[k].first * alphas[k].first - alphas[k].second * alphas[k].second;
    if (r2 < 0.0) throw DomainError("mc_population_loss_grid: alpha_u^2 + alpha_v^2 must be <= 1");
    rest[k] = std::sqrt(r2);
  }
  RngHandle w_rng = rng.derive(0, 31);
  RngHandle data_rng = rng.derive(0, 32);
  const Vec w_perp = detail::orthogonal_complement_direction(spikes, w_rng);
  const McmSampler sampler(params, spikes);
  std::vector<detail::RunningMoments> acc(alphas.size());
  LabeledSample s;
  for (std::int64_t i = 0; i < n_mc; ++i) {
    sampler.draw(data_rng, s);
    const double pu = spikes.u.dot(s.x);
    const double pv = spikes.v.dot(s.x);
    const double pp = w_perp.dot(s.x);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      acc[k].push(1.0 - s.y * sigma(alphas[k].first * pu + alphas[k].second * pv + rest[k] * pp));
    }
  }
  std::vector<McEstimate> out;
  out.reserve(acc.size());
  for (const auto& a : acc) out.push_back(a.estimate());
  return out;
}

// ---------------------------------------------------------------------------
// k-statistics

inline constexpr std::int64_t kMinCumulantSamples = 10000;
inline constexpr int kCumulantBatches = 20;

struct MomentReport {
  Vec direction;
  int order = 0;
  double estimate = 0.0;
  double standard_error = 0.0;
  std::int64_t n = 0;
};

/// Unbiased k-statistic of order k in {2, 3, 4}. Power sums are taken around the sample
/// mean to limit cancellation; k-statistics of order >= 2 are shift invariant.
inline double k_statistic(const double* data, std::int64_t n, int order) {
  if (order < 2 || order > 4) throw InvalidParameter("k_statistic: order must be 2, 3 or 4");
  if (n < order) throw InvalidParameter("k_statistic: too few samples for the requested order");
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += data[i];
  mean /= static_cast<double>(n);
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = data[i] - mean;
    const double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
  }
  const double N = static_cast<double>(n);
  switch (order) {
    case 2: return (N * s2 - s1 * s1) / (N * (N - 1.0));
    case 3: return (N * N * s3 - 3.0 * N * s2 * s1 + 2.0 * s1 * s1 * s1) / (N * (N - 1.0) * (N - 2.0));
    default:
      return ((N * N * N + N * N) * s4 - 4.0 * (N * N + N) * s3 * s1 - 3.0 * (N * N - N) * s2 * s2 +
              12.0 * N * s2 * s1 * s1 - 6.0 * s1 * s1 * s1 * s1) /
             (N * (N - 1.0) * (N - 2.0) * (N - 3.0));
  }
}

/// k-statistic of the projections with a batch-means standard error (20 batches).
inline MomentReport directional_cumulant(const std::vector<double>& projections, int order) {
  if (order < 2 || order > 4) throw InvalidParameter("directional_cumulant: order must be 2, 3 or 4");
  const auto n = static_cast<std::int64_t>(projections.size());
  if (n < kMinCumulantSamples) {
    throw InvalidParameter("directional_cumulant: need at least " + std::to_string(kMinCumulantSamples) +
                           " samples, got " + std::to_string(n));
  }
  MomentReport r;
  r.order = order;
  r.n = n;
  r.estimate = k_statistic(projections.data(), n, order);
  const std::int64_t batch = n / kCumulantBatches;
  double mean = 0.0, m2 = 0.0;
  for (int b = 0; b < kCumulantBatches; ++b) {
    const double kb = k_statistic(projections.data() + b * batch, batch, order);
    const double delta = kb - mean;
    mean += delta / (b + 1);
    m2 += delta * (kb - mean);
  }
  r.standard_error = std::sqrt(m2 / (kCumulantBatches - 1) / kCumulantBatches);
  return r;
}

/// Samples as the columns of X.
inline MomentReport directional_cumulant(const Mat& X, const Vec& direction, int order) {
  if (X.rows() != direction.size()) throw InvalidDimension("directional_cumulant: direction dimension mismatch");
  const Vec p = X.transpose() * direction;
  MomentReport r = directional_cumulant(std::vector<double>(p.data(), p.data() + p.size()), order);
  r.direction = direction;
  return r;
}

inline MomentReport directional_cumulant(const std::vector<LabeledSample>& samples, const Vec& direction, int order) {
  std::vector<double> p;
  p.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.x.size() != direction.size()) throw InvalidDimension("directional_cumulant: direction dimension mismatch");
    p.push_back(direction.dot(s.x));
  }
  MomentReport r = directional_cumulant(p, order);
  r.direction = direction;
  return r;
}

/// Projections onto `direction` of n samples from the planted class (y = +1 only).
inline std::vector<double> planted_projections(const McmParams& params, const SpikeSet& spikes, const Vec& direction,
                                               std::int64_t n, RngHandle& rng) {
  const McmSampler sampler(params, spikes);
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(n));
  LabeledSample s;
  while (static_cast<std::int64_t>(p.size()) < n) {
    sampler.draw(rng, s);
    if (s.y > 0.0) p.push_back(direction.dot(s.x));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Assumption checks

struct AssumptionCheckOptions {
  int directions = 100;
  std::int64_t samples_per_direction = 2000;
  /// The eighth-moment check uses exponent 8 + iota.
  double iota = 0.5;
  int max_degree = kDefaultTruncation;
};

struct AssumptionReport {
  double c2 = 0.0;
  double c4 = 0.0;
  bool c2_positive = false;
  bool c4_negative = false;
  /// Maxima over random unit w of the empirical E[s'(w . x)^4] and E[|s'(w . x)|^(8 + iota)].
  /// These under-approximate the suprema over the sphere.
  double max_derivative_moment_4 = 0.0;
  double max_derivative_moment_8 = 0.0;
  /// sum_{k <= K} k |c^s_k| for K = 0..max_degree.
  std::vector<double> weighted_partial_sums;

  bool passes() const noexcept { return c2_positive && c4_negative; }
};

inline AssumptionReport assumption_check(const ActivationSpec& sigma, const McmParams& params, RngHandle& rng,
                                         const AssumptionCheckOptions& options = {}) {
  AssumptionReport r;
  const auto coeffs = activation_coeffs(sigma, std::max(options.max_degree, 4));
  r.c2 = coeffs[2];
  r.c4 = coeffs[4];
  r.c2_positive = r.c2 > kSignConditionTolerance;
  r.c4_negative = r.c4 < -kSignConditionTolerance;
  double acc = 0.0;
  for (int k = 0; k <= options.max_degree; ++k) {
    acc += k * std::abs(coeffs[k]);
    r.weighted_partial_sums.push_back(acc);
  }

  if (sigma.has_derivative() && options.directions > 0 && options.samples_per_direction > 0) {
    RngHandle spike_rng = rng.derive(0, 41);
    RngHandle w_rng = rng.derive(0, 42);
    RngHandle data_rng = rng.derive(0, 43);
    const SpikeSet spikes = SpikeSet::orthogonal(params.d, spike_rng);
    const McmSampler sampler(params, spikes);
    LabeledSample s;
    for (int k = 0; k < options.directions; ++k) {
      const Vec w = sample_unit_sphere(params.d, w_rng);
      double m4 = 0.0, m8 = 0.0;
      for (std::int64_t i = 0; i < options.samples_per_direction; ++i) {
        sampler.draw(data_rng, s);
        const double g = std::abs(sigma.derivative(w.dot(s.x)));
        m4 += g * g * g * g;
        m8 += std::pow(g, 8.0 + options.iota);
      }
      const auto n = static_cast<double>(options.samples_per_direction);
      r.max_derivative_moment_4 = std::max(r.max_derivative_moment_4, m4 / n);
      r.max_derivative_moment_8 = std::max(r.max_derivative_moment_8, m8 / n);
    }
  }
  return r;
}

}  // namespace stairs
