#pragma once

// Search-phase overlap dynamics
//
//   da_u/dt = 2 c20 a_u + c11 a_v
//   da_v/dt = c11 a_u + 4 c04 a_v^3 - 2 c20 a_u^2 a_v
//
// integrated with classical RK4 on a fixed grid. One SGD step moves the overlaps by
// (delta / d) times the population drift, so the nominal map is t_ode = (delta / d) t_sgd.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "stairs/errors.hpp"
#include "stairs/hermite.hpp"
#include "stairs/perceptron.hpp"

namespace stairs {

struct SearchOdeCoeffs {
  double c20 = 0.0;
  double c11 = 0.0;
  double c04 = 0.0;

  static SearchOdeCoeffs from(const SearchCoeffs& c) { return {c.c20, c.c11, c.c04}; }

  void validate() const {
    if (!(c20 >= 0.0 && c04 >= 0.0)) throw InvalidParameter("SearchOdeCoeffs: c20 and c04 must be non-negative");
    if (!std::isfinite(c11)) throw InvalidParameter("SearchOdeCoeffs: c11 must be finite");
  }
};

struct OdeState {
  double alpha_u = 0.0;
  double alpha_v = 0.0;
};

inline OdeState ode_rhs(const SearchOdeCoeffs& c, double alpha_u, double alpha_v) {
  return {2.0 * c.c20 * alpha_u + c.c11 * alpha_v,
          c.c11 * alpha_u + 4.0 * c.c04 * alpha_v * alpha_v * alpha_v - 2.0 * c.c20 * alpha_u * alpha_u * alpha_v};
}

struct OdeOptions {
  /// Integration stops once |alpha_u| or |alpha_v| exceeds eta.
  double eta = 0.3;
  /// Endpoint change allowed when dt is halved.
  double tolerance = 1e-8;
  /// How many times dt may be halved before giving up.
  int max_halvings = 12;
  /// Keep every record_stride-th grid point (the last point is always kept).
  std::int64_t record_stride = 1;
};

struct OdeTrajectory {
  std::vector<double> t;
  std::vector<double> alpha_u;
  std::vector<double> alpha_v;
  double dt = 0.0;
  double eta = 0.0;
  /// Time at which |alpha_u| (resp. |alpha_v|) first reached eta, linearly interpolated
  /// inside the crossing step.
  std::optional<double> exit_time_u;
  std::optional<double> exit_time_v;

  std::size_t size() const noexcept { return t.size(); }
  double t_end() const { return t.empty() ? 0.0 : t.back(); }

  /// Linear interpolation at time s; nullopt outside [t_0, t_end].
  std::optional<OdeState> at(double s) const {
    if (t.empty() || s < t.front() || s > t.back()) return std::nullopt;
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    if (it == t.end()) return OdeState{alpha_u.back(), alpha_v.back()};
    const std::size_t hi = static_cast<std::size_t>(it - t.begin());
    const std::size_t lo = hi - 1;
    const double w = (s - t[lo]) / (t[hi] - t[lo]);
    return OdeState{alpha_u[lo] + w * (alpha_u[hi] - alpha_u[lo]), alpha_v[lo] + w * (alpha_v[hi] - alpha_v[lo])};
  }
};

namespace detail {

inline OdeState rk4_step(const SearchOdeCoeffs& c, OdeState s, double h) {
  const OdeState k1 = ode_rhs(c, s.alpha_u, s.alpha_v);
  const OdeState k2 = ode_rhs(c, s.alpha_u + 0.5 * h * k1.alpha_u, s.alpha_v + 0.5 * h * k1.alpha_v);
  const OdeState k3 = ode_rhs(c, s.alpha_u + 0.5 * h * k2.alpha_u, s.alpha_v + 0.5 * h * k2.alpha_v);
  const OdeState k4 = ode_rhs(c, s.alpha_u + h * k3.alpha_u, s.alpha_v + h * k3.alpha_v);
  s.alpha_u += h / 6.0 * (k1.alpha_u + 2.0 * k2.alpha_u + 2.0 * k3.alpha_u + k4.alpha_u);
  s.alpha_v += h / 6.0 * (k1.alpha_v + 2.0 * k2.alpha_v + 2.0 * k3.alpha_v + k4.alpha_v);
  return s;
}

inline double crossing_time(double t0, double a0, double a1, double h, double eta) {
  const double x0 = std::abs(a0);
  const double x1 = std::abs(a1);
  if (x1 == x0) return t0 + h;
  return t0 + h * std::clamp((eta - x0) / (x1 - x0), 0.0, 1.0);
}

// Fixed-step run. Returns the trajectory and, in `grid_state`, the state at every
// `probe_stride` steps (used by the step-halving check).
inline OdeTrajectory rk4_run(const SearchOdeCoeffs& c, OdeState s, double t_end, double dt, const OdeOptions& opt,
                             std::vector<OdeState>* grid_state = nullptr, std::int64_t probe_stride = 1) {
  OdeTrajectory traj;
  traj.dt = dt;
  traj.eta = opt.eta;
  const auto n_steps = static_cast<std::int64_t>(std::ceil(t_end / dt - 1e-9));
  const auto record = [&](double t, const OdeState& st) {
    traj.t.push_back(t);
    traj.alpha_u.push_back(st.alpha_u);
    traj.alpha_v.push_back(st.alpha_v);
  };
  record(0.0, s);
  if (grid_state) grid_state->push_back(s);
  if (std::abs(s.alpha_u) >= opt.eta) traj.exit_time_u = 0.0;
  if (std::abs(s.alpha_v) >= opt.eta) traj.exit_time_v = 0.0;
  if (traj.exit_time_u || traj.exit_time_v) return traj;

  for (std::int64_t k = 0; k < n_steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double h = std::min(dt, t_end - t0);
    const OdeState next = rk4_step(c, s, h);
    if (!std::isfinite(next.alpha_u) || !std::isfinite(next.alpha_v)) {
      throw Divergence("ode integrate: non-finite overlaps", k + 1);
    }
    const bool exit_u = std::abs(next.alpha_u) >= opt.eta;
    const bool exit_v = std::abs(next.alpha_v) >= opt.eta;
    if (exit_u) traj.exit_time_u = crossing_time(t0, s.alpha_u, next.alpha_u, h, opt.eta);
    if (exit_v) traj.exit_time_v = crossing_time(t0, s.alpha_v, next.alpha_v, h, opt.eta);
    s = next;
    const bool last = exit_u || exit_v || k + 1 == n_steps;
    if (grid_state && (k + 1) % probe_stride == 0) grid_state->push_back(s);
    if ((k + 1) % opt.record_stride == 0 || last) record(t0 + h, s);
    if (exit_u || exit_v) break;
  }
  return traj;
}

}  // namespace detail

/// RK4 from alpha0 up to t_end or until the eta-region is left. dt is halved until a
/// run with dt/2 agrees with the run at dt to within options.tolerance on the recorded
/// grid; the accepted trajectory is the one at the final dt.
inline OdeTrajectory integrate(const SearchOdeCoeffs& coeffs, OdeState alpha0, double t_end, double dt,
                               const OdeOptions& options = {}) {
  coeffs.validate();
  if (!(t_end >= 0.0)) throw InvalidParameter("integrate: t_end must be non-negative");
  if (!(dt > 0.0)) throw InvalidParameter("integrate: dt must be positive");
  if (!(options.eta > 0.0 && options.eta <= 1.0)) throw InvalidParameter("integrate: eta must lie in (0, 1]");
  if (options.record_stride < 1) throw InvalidParameter("integrate: record_stride must be >= 1");

  double achieved = std::numeric_limits<double>::infinity();
  for (int halving = 0; halving <= options.max_halvings; ++halving) {
    std::vector<OdeState> coarse_grid;
    std::vector<OdeState> fine_grid;
    OdeTrajectory coarse = detail::rk4_run(coeffs, alpha0, t_end, dt, options, &coarse_grid, options.record_stride);
    detail::rk4_run(coeffs, alpha0, t_end, 0.5 * dt, options, &fine_grid, 2 * options.record_stride);
    // Both runs may stop at different steps near an exit; compare on the common prefix.
    const std::size_t n = std::min(coarse_grid.size(), fine_grid.size());
    achieved = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      achieved = std::max({achieved, std::abs(coarse_grid[i].alpha_u - fine_grid[i].alpha_u),
                           std::abs(coarse_grid[i].alpha_v - fine_grid[i].alpha_v)});
    }
    if (achieved < options.tolerance) return coarse;
    dt *= 0.5;
  }
  throw NumericalAccuracy("integrate: step halving did not reach the requested tolerance", achieved);
}

// ---------------------------------------------------------------------------
// Comparison with SGD

/// Seed average of traces recorded on a common time grid. Traces shorter than the
/// longest one contribute up to their last point only.
inline OverlapTrace average_traces(const std::vector<OverlapTrace>& traces) {
  if (traces.empty()) throw InvalidParameter("average_traces: no traces");
  std::size_t longest = 0;
  for (const auto& tr : traces) longest = std::max(longest, tr.size());
  OverlapTrace mean;
  for (std::size_t i = 0; i < longest; ++i) {
    double su = 0.0;
    double sv = 0.0;
    int count = 0;
    std::int64_t t = -1;
    for (const auto& tr : traces) {
      if (i >= tr.size()) continue;
      if (t < 0) t = tr[i].t;
      if (tr[i].t != t) throw InvalidParameter("average_traces: traces are not on a common grid");
      su += tr[i].alpha_u;
      sv += tr[i].alpha_v;
      ++count;
    }
    // Only average where every trace is still present.
    if (count != static_cast<int>(traces.size())) break;
    mean.push_back({t, su / count, sv / count});
  }
  return mean;
}

struct OdeComparison {
  /// delta / d: ODE time per SGD step before any fitted rescaling.
  double time_map = 0.0;
  double sup_deviation = 0.0;
  double fitted_time_scale = 1.0;
  double fitted_sup_deviation = 0.0;
  double region = 0.0;
  std::size_t points = 0;
};

namespace detail {

inline std::pair<double, std::size_t> sup_deviation(const OverlapTrace& trace, const OdeTrajectory& traj,
                                                    double steps_to_time, double region) {
  double worst = 0.0;
  std::size_t points = 0;
  for (const auto& p : trace) {
    if (std::abs(p.alpha_u) > region || std::abs(p.alpha_v) > region) break;
    const auto ode = traj.at(steps_to_time * static_cast<double>(p.t));
    if (!ode || std::abs(ode->alpha_u) > region || std::abs(ode->alpha_v) > region) break;
    worst = std::max({worst, std::abs(p.alpha_u - ode->alpha_u), std::abs(p.alpha_v - ode->alpha_v)});
    ++points;
  }
  return {worst, points};
}

}  // namespace detail

/// Sup-norm distance between a (seed-averaged) SGD trace and an ODE trajectory while
/// both stay inside |alpha| <= region. Also reports the time scale that minimises that
/// distance, searched over [1/4, 4] times the nominal map.
inline OdeComparison sgd_ode_compare(const OverlapTrace& trace, const OdeTrajectory& traj, double delta,
                                     Eigen::Index d, double region = 0.2) {
  if (region > traj.eta) {
    throw InvalidParameter("sgd_ode_compare: comparison region " + std::to_string(region) +
                           " exceeds the trajectory's eta-region " + std::to_string(traj.eta));
  }
  if (!(delta > 0.0) || d < 1) throw InvalidParameter("sgd_ode_compare: delta and d must be positive");
  const double nominal = delta / static_cast<double>(d);
  OdeComparison out;
  out.time_map = nominal;
  out.region = region;
  std::tie(out.sup_deviation, out.points) = detail::sup_deviation(trace, traj, nominal, region);

  // Golden-section search on log(scale); the objective is only piecewise smooth, so
  // seed it with a coarse scan.
  const auto objective = [&](double log_s) {
    const auto [dev, pts] = detail::sup_deviation(trace, traj, nominal * std::exp(log_s), region);
    return pts < 2 ? std::numeric_limits<double>::infinity() : dev;
  };
  const double lo = std::log(0.25);
  const double hi = std::log(4.0);
  double best = 0.0;
  double best_val = objective(0.0);
  constexpr int kScan = 64;
  for (int i = 0; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double val = objective(x);
    if (val < best_val) {
      best_val = val;
      best = x;
    }
  }
  const double step = (hi - lo) / kScan;
  double a = best - step;
  double b = best + step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 40; ++it) {
    const double x1 = b - g * (b - a);
    const double x2 = a + g * (b - a);
    if (objective(x1) < objective(x2)) {
      b = x2;
    } else {
      a = x1;
    }
  }
  const double refined = 0.5 * (a + b);
  if (objective(refined) < best_val) {
    best = refined;
    best_val = objective(refined);
  }
  out.fitted_time_scale = std::exp(best);
  out.fitted_sup_deviation = best_val;
  return out;
}

}  // namespace stairs
