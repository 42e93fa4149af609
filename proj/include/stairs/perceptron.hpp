#pragma once

// Spherical perceptron s(w . x), |w| = 1, trained by projected online SGD on the
// correlation loss L(w, (x, y)) = 1 - y s(w . x):
//
//   w~_t = w_{t-1} - (delta / d) (1 - w w^T) grad L,   w_t = w~_t / |w~_t|,
//
// one fresh sample per step.

#include <cmath>
#include <cstdint>
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

inline constexpr double kUnitStateTolerance = 1e-6;

/// (1 - w w^T) g.
inline Vec spherical_gradient(const Vec& w, const Vec& g) {
  if (std::abs(w.norm() - 1.0) > kUnitStateTolerance) {
    throw InvalidState("spherical_gradient: w is not a unit vector");
  }
  return g - w.dot(g) * w;
}

/// Euclidean gradient of 1 - y s(w . x) with respect to w.
inline Vec sample_gradient(const Vec& w, const LabeledSample& sample, const ActivationSpec& sigma) {
  return (-sample.y * sigma.derivative(w.dot(sample.x))) * sample.x;
}

struct PerceptronState {
  Vec w;
  std::int64_t t = 0;
  double alpha_u = 0.0;
  double alpha_v = 0.0;

  static PerceptronState at(Vec w, const SpikeSet& spikes) {
    PerceptronState s{std::move(w), 0, 0.0, 0.0};
    s.refresh(spikes);
    return s;
  }

  void refresh(const SpikeSet& spikes) {
    alpha_u = spikes.u.dot(w);
    alpha_v = spikes.v.dot(w);
  }
};

/// One projected SGD step, in place. Returns false when the update was exactly zero
/// (s'(w . x) = 0 or delta = 0).
inline bool sgd_step_inplace(PerceptronState& state, const Vec& x, double y, const ActivationSpec& sigma,
                             double delta, const SpikeSet& spikes) {
  ++state.t;
  const double pre = state.w.dot(x);
  const double slope = sigma.derivative(pre);
  if (slope == 0.0 || delta == 0.0) return false;
  const double d = static_cast<double>(state.w.size());
  // -(delta/d) (1 - w w^T)(-y s' x) = (delta/d) y s' (x - (w.x) w)
  const double coef = (delta / d) * y * slope;
  state.w *= (1.0 - coef * pre);
  state.w.noalias() += coef * x;
  const double norm = state.w.norm();
  // The update is tangent to the sphere, so |w~| >= 1 up to rounding.
  if (!std::isfinite(norm)) throw Divergence("sgd_step: non-finite weights", state.t);
  if (!(norm > 0.0)) throw InvalidState("sgd_step: intermediate weight has zero norm");
  state.w /= norm;
  state.refresh(spikes);
  return true;
}

inline PerceptronState sgd_step(const PerceptronState& state, const LabeledSample& sample,
                                const ActivationSpec& sigma, double delta, const SpikeSet& spikes) {
  PerceptronState next = state;
  sgd_step_inplace(next, sample.x, sample.y, sigma, delta, spikes);
  return next;
}

// ---------------------------------------------------------------------------
// Learning-rate regimes

enum class LrRegime { CovLarge, CumulantScale, SubOptimal, Fixed };

inline std::string to_string(LrRegime r) {
  switch (r) {
    case LrRegime::CovLarge: return "cov_large";
    case LrRegime::CumulantScale: return "cumulant_scale";
    case LrRegime::SubOptimal: return "sub_optimal";
    case LrRegime::Fixed: return "fixed";
  }
  return "unknown";
}

inline LrRegime lr_regime_from_string(const std::string& s) {
  if (s == "cov_large") return LrRegime::CovLarge;
  if (s == "cumulant_scale") return LrRegime::CumulantScale;
  if (s == "sub_optimal") return LrRegime::SubOptimal;
  if (s == "fixed") return LrRegime::Fixed;
  throw InvalidParameter("unknown learning-rate regime '" + s + "'");
}

/// CovLarge: a / log d. CumulantScale and SubOptimal: a / (d log d). Fixed: a.
inline double lr_schedule(LrRegime regime, double d, double prefactor = 1.0) {
  if (regime == LrRegime::Fixed) return prefactor;
  if (d < 3.0) throw InvalidDimension("lr_schedule: d must be >= 3");
  const double log_d = std::log(d);
  switch (regime) {
    case LrRegime::CovLarge: return prefactor / log_d;
    case LrRegime::CumulantScale:
    case LrRegime::SubOptimal: return prefactor / (d * log_d);
    case LrRegime::Fixed: break;
  }
  return prefactor;
}

// ---------------------------------------------------------------------------
// Training

enum class InitConditioning { None, MatchedSigns, MismatchedSigns };

struct SgdConfig {
  double delta = 0.1;
  std::int64_t max_steps = 10000;
  double eta = 0.3;
  InitConditioning init = InitConditioning::None;
  /// Start from a unit vector with exactly these overlaps instead of a uniform draw.
  std::optional<std::pair<double, double>> init_overlaps;
  std::int64_t record_every = 100;
  /// Stop once every spike carrying signal has been weakly recovered.
  bool stop_on_recovery = false;

  void validate() const {
    if (!(delta > 0.0)) throw InvalidParameter("SgdConfig: delta must be positive");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidParameter("SgdConfig: eta must lie in (0, 1)");
    if (max_steps < 0) throw InvalidParameter("SgdConfig: max_steps must be non-negative");
    if (record_every < 1) throw InvalidParameter("SgdConfig: record_every must be >= 1");
  }
};

struct TracePoint {
  std::int64_t t;
  double alpha_u;
  double alpha_v;
};

using OverlapTrace = std::vector<TracePoint>;

struct RecoveryReport {
  std::optional<std::int64_t> tau_u;
  std::optional<std::int64_t> tau_v;
  double final_alpha_u = 0.0;
  double final_alpha_v = 0.0;
  double initial_alpha_u = 0.0;
  double initial_alpha_v = 0.0;
  std::int64_t steps = 0;
  double eta = 0.0;
  double delta = 0.0;
  Eigen::Index d = 0;
  std::uint64_t seed = 0;
  OverlapTrace trace;
};

/// Unit vector with u . w = alpha_u, v . w = alpha_v and a uniformly random remainder
/// orthogonal to span(u, v). Requires orthonormal u, v.
inline Vec unit_with_overlaps(const SpikeSet& spikes, double alpha_u, double alpha_v, RngHandle& rng) {
  const double rest_sq = 1.0 - alpha_u * alpha_u - alpha_v * alpha_v;
  if (rest_sq < 0.0) throw DomainError("unit_with_overlaps: alpha_u^2 + alpha_v^2 must be <= 1");
  if (std::abs(spikes.overlap_uv()) > kUnitTolerance) {
    throw InvalidParameter("unit_with_overlaps: u and v must be orthogonal");
  }
  Vec perp;
  double norm = 0.0;
  do {
    perp = sample_normal_vector(spikes.dim(), rng);
    perp -= spikes.u.dot(perp) * spikes.u;
    perp -= spikes.v.dot(perp) * spikes.v;
    norm = perp.norm();
  } while (norm == 0.0);
  Vec w = alpha_u * spikes.u + alpha_v * spikes.v + (std::sqrt(rest_sq) / norm) * perp;
  return w / w.norm();
}

inline Vec initial_weight(const SpikeSet& spikes, const SgdConfig& config, RngHandle& rng) {
  if (config.init_overlaps) {
    return unit_with_overlaps(spikes, config.init_overlaps->first, config.init_overlaps->second, rng);
  }
  for (;;) {
    Vec w = sample_unit_sphere(spikes.dim(), rng);
    const double sign = spikes.u.dot(w) * spikes.v.dot(w);
    if (config.init == InitConditioning::None) return w;
    if (config.init == InitConditioning::MatchedSigns && sign > 0.0) return w;
    if (config.init == InitConditioning::MismatchedSigns && sign < 0.0) return w;
  }
}

/// Online SGD on fresh samples from the model, one sample per step, for at most
/// config.max_steps steps. tau_u, tau_v are the first steps with |alpha| >= eta.
inline RecoveryReport train(const McmParams& params, const SpikeSet& spikes, const ActivationSpec& sigma,
                            const SgdConfig& config, RngHandle& rng) {
  config.validate();
  if (params.beta_u > 0.0 || params.beta_v > 0.0) require_sign_conditions(sigma);
  const McmSampler sampler(params, spikes);
  RngHandle init_rng = rng.derive(0, 11);
  RngHandle data_rng = rng.derive(0, 12);

  PerceptronState state = PerceptronState::at(initial_weight(spikes, config, init_rng), spikes);
  RecoveryReport report;
  report.eta = config.eta;
  report.delta = config.delta;
  report.d = params.d;
  report.seed = rng.seed();
  report.initial_alpha_u = state.alpha_u;
  report.initial_alpha_v = state.alpha_v;
  report.trace.push_back({0, state.alpha_u, state.alpha_v});

  const bool want_u = params.beta_u > 0.0;
  const bool want_v = params.beta_v > 0.0;
  const auto check_recovery = [&] {
    if (!report.tau_u && std::abs(state.alpha_u) >= config.eta) report.tau_u = state.t;
    if (!report.tau_v && std::abs(state.alpha_v) >= config.eta) report.tau_v = state.t;
  };
  check_recovery();

  LabeledSample sample;
  while (state.t < config.max_steps) {
    sampler.draw(data_rng, sample);
    sgd_step_inplace(state, sample.x, sample.y, sigma, config.delta, spikes);
    check_recovery();
    if (state.t % config.record_every == 0) report.trace.push_back({state.t, state.alpha_u, state.alpha_v});
    if (config.stop_on_recovery && (want_u || want_v) && (!want_u || report.tau_u) && (!want_v || report.tau_v)) {
      break;
    }
  }
  if (report.trace.back().t != state.t) report.trace.push_back({state.t, state.alpha_u, state.alpha_v});
  report.steps = state.t;
  report.final_alpha_u = state.alpha_u;
  report.final_alpha_v = state.alpha_v;
  return report;
}

}  // namespace stairs
