#pragma once

// Dimension sweeps of the spherical perceptron, recovery-time statistics, exponent
// fits and artifact emission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "stairs/errors.hpp"
#include "stairs/hermite.hpp"
#include "stairs/io.hpp"
#include "stairs/mcm.hpp"
#include "stairs/perceptron.hpp"
#include "stairs/rng.hpp"

namespace stairs {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Thread pool

/// Runs fn(i) for i in [0, n) on up to `threads` workers pulling indices from a shared
/// counter. The first exception (lowest index) is rethrown after all workers join.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const auto workers = static_cast<std::size_t>(std::clamp<int>(threads, 1, static_cast<int>(std::min<std::size_t>(n, 256))));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = n;
  std::exception_ptr error;
  const auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// Configuration

enum class SweepTask { CovOnly, CumOnly, McmIndependent, McmCorrelated };

inline std::string to_string(SweepTask t) {
  switch (t) {
    case SweepTask::CovOnly: return "cov_only";
    case SweepTask::CumOnly: return "cum_only";
    case SweepTask::McmIndependent: return "mcm_independent";
    case SweepTask::McmCorrelated: return "mcm_correlated";
  }
  return "unknown";
}

inline SweepTask sweep_task_from_string(const std::string& s) {
  if (s == "cov_only") return SweepTask::CovOnly;
  if (s == "cum_only") return SweepTask::CumOnly;
  if (s == "mcm_independent") return SweepTask::McmIndependent;
  if (s == "mcm_correlated") return SweepTask::McmCorrelated;
  throw InvalidParameter("unknown sweep task '" + s + "'");
}

enum class BudgetKind { DLog2, D2Log, D3Log2, D3 };

inline std::string to_string(BudgetKind k) {
  switch (k) {
    case BudgetKind::DLog2: return "d_log2";
    case BudgetKind::D2Log: return "d2_log";
    case BudgetKind::D3Log2: return "d3_log2";
    case BudgetKind::D3: return "d3";
  }
  return "unknown";
}

inline BudgetKind budget_kind_from_string(const std::string& s) {
  if (s == "d_log2") return BudgetKind::DLog2;
  if (s == "d2_log") return BudgetKind::D2Log;
  if (s == "d3_log2") return BudgetKind::D3Log2;
  if (s == "d3") return BudgetKind::D3;
  throw InvalidParameter("unknown budget rule '" + s + "'");
}

/// Step budget n(d) = A * {d log^2 d, d^2 log d, d^3 log^2 d, d^3}.
struct BudgetRule {
  BudgetKind kind = BudgetKind::DLog2;
  double prefactor = 1.0;

  std::int64_t steps(std::int64_t d) const {
    if (d < 2) throw InvalidDimension("BudgetRule: d must be >= 2");
    if (!(prefactor > 0.0)) throw InvalidParameter("BudgetRule: prefactor must be positive");
    const double x = static_cast<double>(d);
    const double l = std::log(x);
    double n = 0.0;
    switch (kind) {
      case BudgetKind::DLog2: n = x * l * l; break;
      case BudgetKind::D2Log: n = x * x * l; break;
      case BudgetKind::D3Log2: n = x * x * x * l * l; break;
      case BudgetKind::D3: n = x * x * x; break;
    }
    return static_cast<std::int64_t>(std::ceil(prefactor * n));
  }

  /// Power of log d in the rule.
  int log_power() const noexcept {
    switch (kind) {
      case BudgetKind::DLog2:
      case BudgetKind::D3Log2: return 2;
      case BudgetKind::D2Log: return 1;
      case BudgetKind::D3: return 0;
    }
    return 0;
  }
};

enum class Spike { U, V };

inline std::string to_string(InitConditioning c) {
  switch (c) {
    case InitConditioning::None: return "none";
    case InitConditioning::MatchedSigns: return "matched";
    case InitConditioning::MismatchedSigns: return "mismatched";
  }
  return "unknown";
}

inline InitConditioning init_conditioning_from_string(const std::string& s) {
  if (s == "none") return InitConditioning::None;
  if (s == "matched") return InitConditioning::MatchedSigns;
  if (s == "mismatched") return InitConditioning::MismatchedSigns;
  throw InvalidParameter("unknown init conditioning '" + s + "'");
}

struct SweepConfig {
  SweepTask task = SweepTask::CovOnly;
  /// Match probability for McmCorrelated.
  double q = 1.0;
  double beta_u = 5.0;
  double beta_v = 10.0;
  std::vector<std::int64_t> dims{32, 64, 128, 256};
  LrRegime regime = LrRegime::CovLarge;
  double lr_prefactor = 1.0;
  BudgetRule budget{};
  int seeds = 10;
  double eta = 0.3;
  InitConditioning init = InitConditioning::None;
  /// Trace cadence; 0 picks about 200 points per run.
  std::int64_t record_every = 0;
  bool stop_on_recovery = true;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (dims.empty()) throw InvalidParameter("SweepConfig: dims must not be empty");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] < 3) throw InvalidDimension("SweepConfig: every d must be >= 3");
      if (i > 0 && dims[i] <= dims[i - 1]) throw InvalidParameter("SweepConfig: dims must be strictly increasing");
    }
    if (seeds < 1) throw InvalidParameter("SweepConfig: seeds must be >= 1");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidParameter("SweepConfig: eta must lie in (0, 1)");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("SweepConfig: q must lie in [0, 1]");
    if (!(beta_u >= 0.0 && beta_v >= 0.0)) throw InvalidParameter("SweepConfig: betas must be non-negative");
    if (record_every < 0) throw InvalidParameter("SweepConfig: record_every must be non-negative");
  }

  McmParams params(std::int64_t d) const {
    McmParams p;
    p.d = d;
    switch (task) {
      case SweepTask::CovOnly: p.beta_u = beta_u; break;
      case SweepTask::CumOnly: p.beta_v = beta_v; break;
      case SweepTask::McmIndependent:
        p.beta_u = beta_u;
        p.beta_v = beta_v;
        break;
      case SweepTask::McmCorrelated:
        p.beta_u = beta_u;
        p.beta_v = beta_v;
        p.coupling = q == 1.0 ? LatentCoupling::sign_matched() : LatentCoupling::partial_sign(q);
        break;
    }
    return p;
  }

  /// Spike whose recovery time the sweep fits.
  Spike target() const { return task == SweepTask::CovOnly ? Spike::U : Spike::V; }
};

inline LatentCoupling coupling_for_q(double q) {
  if (q == 0.0) return LatentCoupling::independent();
  if (q == 1.0) return LatentCoupling::sign_matched();
  return LatentCoupling::partial_sign(q);
}

/// Random source of one run; depends only on (base seed, d, seed index).
inline RngHandle run_rng(std::uint64_t base_seed, std::int64_t d, int seed_index) {
  return RngHandle(base_seed).derive(static_cast<std::uint64_t>(d), 1000 + static_cast<std::uint64_t>(seed_index));
}

// ---------------------------------------------------------------------------
// Runs and statistics

struct RunRecord {
  std::string run_id;
  std::string task;
  std::string regime;
  std::int64_t d = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
  double q = 0.0;
  RecoveryReport report;

  std::optional<std::int64_t> tau(Spike s) const { return s == Spike::U ? report.tau_u : report.tau_v; }
};

/// One perceptron run: spikes from rng.derive(0, 1), training on the rest.
inline RunRecord run_single(const McmParams& params, LrRegime regime, double lr_prefactor, std::int64_t budget,
                            double eta, InitConditioning init, std::int64_t record_every, bool stop_on_recovery,
                            RngHandle rng) {
  RngHandle spike_rng = rng.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(params.d, spike_rng);
  SgdConfig cfg;
  cfg.delta = lr_schedule(regime, static_cast<double>(params.d), lr_prefactor);
  cfg.max_steps = budget;
  cfg.eta = eta;
  cfg.init = init;
  cfg.record_every = record_every > 0 ? record_every : std::max<std::int64_t>(1, budget / 200);
  cfg.stop_on_recovery = stop_on_recovery;
  RunRecord r;
  r.d = params.d;
  r.seed = rng.seed();
  r.budget = budget;
  r.regime = to_string(regime);
  r.report = train(params, spikes, ActivationSpec::relu(), cfg, rng);
  return r;
}

/// Quantile with linear interpolation between order statistics (sorted input).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidParameter("quantile: empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Median where censored values count as +infinity.
inline double median_with_censoring(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& x : values) v.push_back(x ? *x : std::numeric_limits<double>::infinity());
  std::sort(v.begin(), v.end());
  if (v.empty()) throw InvalidParameter("median: empty sample");
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  const double a = v[n / 2 - 1];
  const double b = v[n / 2];
  return std::isinf(b) ? b : 0.5 * (a + b);
}

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares of log y on log x.
inline PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidParameter("fit_power_law: x and y differ in length");
  if (x.size() < 2) throw InvalidParameter("fit_power_law: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("fit_power_law: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw DomainError("fit_power_law: x values are all equal");
  PowerLawFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

struct DimStats {
  std::int64_t d = 0;
  int runs = 0;
  int finite = 0;
  double censored_fraction = 0.0;
  /// Over finite recovery times only.
  double median = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
};

struct ScalingFit {
  Spike spike = Spike::U;
  /// Slope of log(median tau / log^p d) against log d, p = envelope_log_power.
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int envelope_log_power = 0;
  /// Slope of log(median tau) against log d.
  double raw_slope = 0.0;
  double censored_fraction = 0.0;
  std::vector<DimStats> per_d;
};

/// Per-d medians and quartiles of the finite recovery times (a time of 0, i.e. already
/// recovered at initialisation, is counted as 1 step so that logs stay finite).
inline std::vector<DimStats> dimension_stats(const std::vector<RunRecord>& runs, Spike spike) {
  std::vector<std::int64_t> dims;
  for (const auto& r : runs) {
    if (std::find(dims.begin(), dims.end(), r.d) == dims.end()) dims.push_back(r.d);
  }
  std::sort(dims.begin(), dims.end());
  std::vector<DimStats> out;
  for (const std::int64_t d : dims) {
    DimStats s;
    s.d = d;
    std::vector<double> taus;
    for (const auto& r : runs) {
      if (r.d != d) continue;
      ++s.runs;
      if (const auto t = r.tau(spike)) taus.push_back(std::max<double>(1.0, static_cast<double>(*t)));
    }
    s.finite = static_cast<int>(taus.size());
    s.censored_fraction = 1.0 - static_cast<double>(s.finite) / static_cast<double>(s.runs);
    if (!taus.empty()) {
      std::sort(taus.begin(), taus.end());
      s.median = quantile_sorted(taus, 0.5);
      s.q1 = quantile_sorted(taus, 0.25);
      s.q3 = quantile_sorted(taus, 0.75);
    }
    out.push_back(s);
  }
  return out;
}

/// Exponent fit over dimensions. Throws InvalidState with the per-d censoring when some
/// d has no finite recovery time.
inline ScalingFit scaling_fit(const std::vector<RunRecord>& runs, Spike spike, int envelope_log_power = 0) {
  ScalingFit fit;
  fit.spike = spike;
  fit.envelope_log_power = envelope_log_power;
  fit.per_d = dimension_stats(runs, spike);
  int total = 0;
  int censored = 0;
  std::string report;
  bool aborted = false;
  for (const auto& s : fit.per_d) {
    total += s.runs;
    censored += s.runs - s.finite;
    report += " d=" + std::to_string(s.d) + ": " + std::to_string(s.runs - s.finite) + "/" + std::to_string(s.runs);
    if (s.finite == 0) aborted = true;
  }
  fit.censored_fraction = total > 0 ? static_cast<double>(censored) / total : 0.0;
  if (aborted) throw InvalidState("scaling_fit: every run censored at some d; censored runs per d:" + report);
  if (fit.per_d.size() < 2) throw InvalidParameter("scaling_fit: need at least two dimensions");
  std::vector<double> x, y, y_env;
  for (const auto& s : fit.per_d) {
    const double d = static_cast<double>(s.d);
    x.push_back(d);
    y.push_back(s.median);
    y_env.push_back(s.median / std::pow(std::log(d), envelope_log_power));
  }
  fit.raw_slope = fit_power_law(x, y).slope;
  const PowerLawFit f = fit_power_law(x, y_env);
  fit.slope = f.slope;
  fit.intercept = f.intercept;
  fit.r2 = f.r2;
  return fit;
}

struct SweepResult {
  SweepConfig config;
  std::vector<RunRecord> runs;
  std::optional<ScalingFit> fit;
  std::optional<std::string> fit_error;
  double wall_seconds = 0.0;
};

/// seeds x dims runs in parallel, then the exponent fit of the task's target spike with
/// the budget rule's log envelope divided out.
inline SweepResult run_sweep(const SweepConfig& config, int threads = 1) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SweepResult result;
  result.config = config;
  const std::size_t per_d = static_cast<std::size_t>(config.seeds);
  result.runs.resize(config.dims.size() * per_d);
  parallel_for(result.runs.size(), threads, [&](std::size_t i) {
    const std::int64_t d = config.dims[i / per_d];
    const int s = static_cast<int>(i % per_d);
    RunRecord r = run_single(config.params(d), config.regime, config.lr_prefactor, config.budget.steps(d),
                             config.eta, config.init, config.record_every, config.stop_on_recovery,
                             run_rng(config.base_seed, d, s));
    r.run_id = to_string(config.task) + "_d" + std::to_string(d) + "_s" + std::to_string(s);
    r.task = to_string(config.task);
    r.seed_index = s;
    r.q = config.task == SweepTask::McmCorrelated ? config.q : 0.0;
    result.runs[i] = std::move(r);
  });
  if (config.dims.size() >= 2) {
    try {
      result.fit = scaling_fit(result.runs, config.target(), config.budget.log_power());
    } catch (const InvalidState& e) {
      result.fit_error = e.what();
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Coupling comparison

struct CompareConfig {
  std::vector<std::int64_t> dims{64};
  std::vector<double> qs{0.0, 1.0};
  double beta_u = 5.0;
  double beta_v = 10.0;
  LrRegime regime = LrRegime::CovLarge;
  double lr_prefactor = 1.0;
  BudgetRule budget{};
  int seeds = 20;
  double eta = 0.3;
  InitConditioning init = InitConditioning::MatchedSigns;
  std::int64_t record_every = 0;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (dims.empty() || qs.empty()) throw InvalidParameter("CompareConfig: dims and qs must not be empty");
    for (const auto d : dims) {
      if (d < 3) throw InvalidDimension("CompareConfig: every d must be >= 3");
    }
    for (const double q : qs) {
      if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("CompareConfig: q must lie in [0, 1]");
    }
    if (seeds < 1) throw InvalidParameter("CompareConfig: seeds must be >= 1");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidParameter("CompareConfig: eta must lie in (0, 1)");
  }
};

struct CouplingRow {
  std::int64_t d = 0;
  double q = 0.0;
  int runs = 0;
  double finite_fraction_u = 0.0;
  double finite_fraction_v = 0.0;
  /// Medians with censored runs counted as +infinity.
  double median_tau_u = 0.0;
  double median_tau_v = 0.0;
  /// Median over seeds of tau_v / tau_u (infinite when tau_v is censored).
  double median_ratio = 0.0;
};

struct CompareResult {
  CompareConfig config;
  std::vector<CouplingRow> rows;
  std::vector<RunRecord> runs;
  double wall_seconds = 0.0;
};

/// Paired runs: for every (d, seed index) all couplings share the spikes, the initial
/// weight and the data seed.
inline CompareResult compare_couplings(const CompareConfig& config, int threads = 1) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  CompareResult result;
  result.config = config;
  const std::size_t per_q = static_cast<std::size_t>(config.seeds);
  const std::size_t per_d = per_q * config.qs.size();
  result.runs.resize(config.dims.size() * per_d);
  parallel_for(result.runs.size(), threads, [&](std::size_t i) {
    const std::int64_t d = config.dims[i / per_d];
    const double q = config.qs[(i % per_d) / per_q];
    const int s = static_cast<int>(i % per_q);
    McmParams p;
    p.d = d;
    p.beta_u = config.beta_u;
    p.beta_v = config.beta_v;
    p.coupling = coupling_for_q(q);
    RunRecord r = run_single(p, config.regime, config.lr_prefactor, config.budget.steps(d), config.eta, config.init,
                             config.record_every, true, run_rng(config.base_seed, d, s));
    r.run_id = "compare_d" + std::to_string(d) + "_q" + format_number(q) + "_s" + std::to_string(s);
    r.task = "compare";
    r.seed_index = s;
    r.q = q;
    result.runs[i] = std::move(r);
  });
  for (const auto d : config.dims) {
    for (const double q : config.qs) {
      CouplingRow row;
      row.d = d;
      row.q = q;
      std::vector<std::optional<double>> tu, tv, ratio;
      for (const auto& r : result.runs) {
        if (r.d != d || r.q != q) continue;
        ++row.runs;
        const auto& rep = r.report;
        tu.push_back(rep.tau_u ? std::optional<double>(static_cast<double>(*rep.tau_u)) : std::nullopt);
        tv.push_back(rep.tau_v ? std::optional<double>(static_cast<double>(*rep.tau_v)) : std::nullopt);
        if (rep.tau_u && rep.tau_v) {
          ratio.push_back(static_cast<double>(*rep.tau_v) / std::max<double>(1.0, static_cast<double>(*rep.tau_u)));
        } else {
          ratio.push_back(std::nullopt);
        }
        if (rep.tau_u) row.finite_fraction_u += 1.0;
        if (rep.tau_v) row.finite_fraction_v += 1.0;
      }
      row.finite_fraction_u /= row.runs;
      row.finite_fraction_v /= row.runs;
      row.median_tau_u = median_with_censoring(tu);
      row.median_tau_v = median_with_censoring(tv);
      row.median_ratio = median_with_censoring(ratio);
      result.rows.push_back(row);
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline std::string compare_table_csv(const CompareResult& result) {
  CsvWriter csv({"d", "q", "runs", "finite_fraction_u", "finite_fraction_v", "median_tau_u", "median_tau_v",
                 "median_ratio_v_over_u"});
  for (const auto& r : result.rows) {
    csv.row({std::to_string(r.d), format_number(r.q), std::to_string(r.runs), format_number(r.finite_fraction_u),
             format_number(r.finite_fraction_v), format_number(r.median_tau_u), format_number(r.median_tau_v),
             format_number(r.median_ratio)});
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// JSON

inline Json optional_json(const std::optional<std::int64_t>& v) { return v ? Json(*v) : Json(nullptr); }

/// Non-finite numbers become null (JSON has no representation for them).
inline Json number_json(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json report_json(const RunRecord& r) {
  const auto& rep = r.report;
  return Json{{"run_id", r.run_id},
              {"task", r.task},
              {"tau_u", optional_json(rep.tau_u)},
              {"tau_v", optional_json(rep.tau_v)},
              {"eta", rep.eta},
              {"delta", rep.delta},
              {"d", rep.d},
              {"seed", r.seed},
              {"regime", r.regime},
              {"q", r.q},
              {"budget", r.budget},
              {"steps", rep.steps},
              {"initial_alpha_u", rep.initial_alpha_u},
              {"initial_alpha_v", rep.initial_alpha_v},
              {"final_alpha_u", rep.final_alpha_u},
              {"final_alpha_v", rep.final_alpha_v}};
}

inline Json fit_json(const ScalingFit& f) {
  Json per_d = Json::array();
  for (const auto& s : f.per_d) {
    per_d.push_back({{"d", s.d},
                     {"runs", s.runs},
                     {"finite", s.finite},
                     {"censored_fraction", s.censored_fraction},
                     {"median", number_json(s.median)},
                     {"q1", number_json(s.q1)},
                     {"q3", number_json(s.q3)}});
  }
  return Json{{"spike", f.spike == Spike::U ? "u" : "v"},
              {"slope", f.slope},
              {"intercept", f.intercept},
              {"r2", f.r2},
              {"envelope_log_power", f.envelope_log_power},
              {"raw_slope", f.raw_slope},
              {"censored_fraction", f.censored_fraction},
              {"per_d", per_d}};
}

inline Json to_json(const BudgetRule& b) { return Json{{"rule", to_string(b.kind)}, {"prefactor", b.prefactor}}; }

inline BudgetRule budget_from_json(const Json& j) {
  BudgetRule b;
  b.kind = budget_kind_from_string(j.at("rule").get<std::string>());
  b.prefactor = j.value("prefactor", 1.0);
  return b;
}

inline void check_schema_version(const Json& j) {
  if (!j.contains("schema_version")) throw InvalidParameter("config: missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kConfigSchemaVersion) {
    throw InvalidParameter("config: unsupported schema_version " + std::to_string(v) + " (expected " +
                           std::to_string(kConfigSchemaVersion) + ")");
  }
}

inline Json to_json(const SweepConfig& c) {
  return Json{{"schema_version", kConfigSchemaVersion},
              {"task", to_string(c.task)},
              {"q", c.q},
              {"beta_u", c.beta_u},
              {"beta_v", c.beta_v},
              {"dims", c.dims},
              {"regime", to_string(c.regime)},
              {"lr_prefactor", c.lr_prefactor},
              {"budget", to_json(c.budget)},
              {"seeds", c.seeds},
              {"eta", c.eta},
              {"init", to_string(c.init)},
              {"record_every", c.record_every},
              {"stop_on_recovery", c.stop_on_recovery},
              {"base_seed", c.base_seed}};
}

inline SweepConfig sweep_config_from_json(const Json& j) {
  check_schema_version(j);
  SweepConfig c;
  c.task = sweep_task_from_string(j.at("task").get<std::string>());
  c.q = j.value("q", c.q);
  c.beta_u = j.value("beta_u", c.beta_u);
  c.beta_v = j.value("beta_v", c.beta_v);
  if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<std::int64_t>>();
  c.regime = lr_regime_from_string(j.value("regime", to_string(c.regime)));
  c.lr_prefactor = j.value("lr_prefactor", c.lr_prefactor);
  if (j.contains("budget")) c.budget = budget_from_json(j.at("budget"));
  c.seeds = j.value("seeds", c.seeds);
  c.eta = j.value("eta", c.eta);
  c.init = init_conditioning_from_string(j.value("init", to_string(c.init)));
  c.record_every = j.value("record_every", c.record_every);
  c.stop_on_recovery = j.value("stop_on_recovery", c.stop_on_recovery);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.validate();
  return c;
}

inline Json to_json(const CompareConfig& c) {
  return Json{{"schema_version", kConfigSchemaVersion},
              {"dims", c.dims},
              {"qs", c.qs},
              {"beta_u", c.beta_u},
              {"beta_v", c.beta_v},
              {"regime", to_string(c.regime)},
              {"lr_prefactor", c.lr_prefactor},
              {"budget", to_json(c.budget)},
              {"seeds", c.seeds},
              {"eta", c.eta},
              {"init", to_string(c.init)},
              {"record_every", c.record_every},
              {"base_seed", c.base_seed}};
}

inline CompareConfig compare_config_from_json(const Json& j) {
  check_schema_version(j);
  CompareConfig c;
  if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<std::int64_t>>();
  if (j.contains("qs")) c.qs = j.at("qs").get<std::vector<double>>();
  c.beta_u = j.value("beta_u", c.beta_u);
  c.beta_v = j.value("beta_v", c.beta_v);
  c.regime = lr_regime_from_string(j.value("regime", to_string(c.regime)));
  c.lr_prefactor = j.value("lr_prefactor", c.lr_prefactor);
  if (j.contains("budget")) c.budget = budget_from_json(j.at("budget"));
  c.seeds = j.value("seeds", c.seeds);
  c.eta = j.value("eta", c.eta);
  c.init = init_conditioning_from_string(j.value("init", to_string(c.init)));
  c.record_every = j.value("record_every", c.record_every);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string sweep_summary_csv(const std::vector<RunRecord>& runs) {
  CsvWriter csv({"run_id", "task", "d", "seed_index", "seed", "q", "regime", "delta", "budget", "eta", "tau_u",
                 "tau_v", "steps", "final_alpha_u", "final_alpha_v"});
  for (const auto& r : runs) {
    const auto& rep = r.report;
    csv.row({r.run_id, r.task, std::to_string(r.d), std::to_string(r.seed_index), std::to_string(r.seed),
             format_number(r.q), r.regime, format_number(rep.delta), std::to_string(r.budget), format_number(rep.eta),
             format_optional(rep.tau_u), format_optional(rep.tau_v), std::to_string(rep.steps),
             format_number(rep.final_alpha_u), format_number(rep.final_alpha_v)});
  }
  return csv.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ArtifactManifest {
  std::filesystem::path root;
  std::vector<std::filesystem::path> files;
  Json manifest;
};

/// Writes traces/<run_id>.csv, reports/<run_id>.json, sweep_summary.csv and
/// manifest.json under out_dir. Only the manifest carries timestamps and timings, so the
/// other files are byte-identical across reruns of the same config and seed.
inline ArtifactManifest emit_artifacts(const std::vector<RunRecord>& runs, const Json& config,
                                       const std::filesystem::path& out_dir, double wall_seconds,
                                       const Json& extra = Json::object()) {
  ArtifactManifest out;
  out.root = out_dir;
  ensure_directory(out_dir);
  Json entries = Json::array();
  std::vector<std::uint64_t> seeds;
  for (const auto& r : runs) {
    const std::filesystem::path trace = std::filesystem::path("traces") / (r.run_id + ".csv");
    const std::filesystem::path report = std::filesystem::path("reports") / (r.run_id + ".json");
    write_text_file(out_dir / trace, trace_csv(r.report.trace));
    write_text_file(out_dir / report, report_json(r).dump(2) + "\n");
    out.files.push_back(trace);
    out.files.push_back(report);
    entries.push_back({{"run_id", r.run_id}, {"d", r.d}, {"seed", r.seed}, {"trace", trace.generic_string()},
                       {"report", report.generic_string()}});
    seeds.push_back(r.seed);
  }
  write_text_file(out_dir / "sweep_summary.csv", sweep_summary_csv(runs));
  out.files.emplace_back("sweep_summary.csv");

  out.manifest = Json{{"library_version", kLibraryVersion},
                      {"created_utc", utc_timestamp()},
                      {"wall_clock_seconds", wall_seconds},
                      {"config", config},
                      {"seeds", seeds},
                      {"runs", entries},
                      {"summary", "sweep_summary.csv"}};
  for (const auto& [key, value] : extra.items()) out.manifest[key] = value;
  write_text_file(out_dir / "manifest.json", out.manifest.dump(2) + "\n");
  out.files.emplace_back("manifest.json");
  return out;
}

inline ArtifactManifest emit_artifacts(const SweepResult& result, const std::filesystem::path& out_dir) {
  Json extra = Json::object();
  if (result.fit) extra["fit"] = fit_json(*result.fit);
  if (result.fit_error) extra["fit_error"] = *result.fit_error;
  return emit_artifacts(result.runs, to_json(result.config), out_dir, result.wall_seconds, extra);
}

}  // namespace stairs
