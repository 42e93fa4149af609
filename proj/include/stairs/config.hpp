#pragma once

// JSON configurations of the command-line jobs. Every config carries schema_version;
// unknown keys are ignored, missing keys take the defaults below.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stairs/errors.hpp"
#include "stairs/experiments.hpp"
#include "stairs/hermite.hpp"
#include "stairs/mcm.hpp"
#include "stairs/ode.hpp"
#include "stairs/perceptron.hpp"
#include "stairs/two_layer.hpp"

namespace stairs {

/// "relu", "identity", {"kind": "smoothed_relu", "tau": 8} or
/// {"kind": "polynomial", "coeffs": [...]}.
inline ActivationSpec activation_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "relu") return ActivationSpec::relu();
    if (s == "identity") return ActivationSpec::identity();
    throw InvalidParameter("unknown activation '" + s + "'");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "relu") return ActivationSpec::relu();
  if (kind == "identity") return ActivationSpec::identity();
  if (kind == "smoothed_relu") return ActivationSpec::smoothed_relu(j.at("tau").get<double>());
  if (kind == "polynomial") return ActivationSpec::polynomial(j.at("coeffs").get<std::vector<double>>());
  throw InvalidParameter("unknown activation kind '" + kind + "'");
}

/// "independent", "sign_matched" or "partial_sign" (with "q").
inline LatentCoupling coupling_from_json(const Json& j) {
  const auto name = j.value("coupling", std::string("independent"));
  if (name == "independent") return LatentCoupling::independent();
  if (name == "sign_matched") return LatentCoupling::sign_matched();
  if (name == "partial_sign") return LatentCoupling::partial_sign(j.at("q").get<double>());
  throw InvalidParameter("unknown coupling '" + name + "'");
}

inline std::string coupling_key(const LatentCoupling& c) {
  switch (c.mode()) {
    case LatentCoupling::Mode::Independent: return "independent";
    case LatentCoupling::Mode::SignMatched: return "sign_matched";
    case LatentCoupling::Mode::PartialSign: return "partial_sign";
  }
  return "unknown";
}

inline McmParams mcm_params_from_json(const Json& j) {
  McmParams p;
  p.d = j.value("d", static_cast<std::int64_t>(p.d));
  p.beta_m = j.value("beta_m", p.beta_m);
  p.beta_u = j.value("beta_u", p.beta_u);
  p.beta_v = j.value("beta_v", p.beta_v);
  p.coupling = coupling_from_json(j);
  p.validate();
  return p;
}

inline Json to_json(const McmParams& p) {
  Json j{{"d", p.d}, {"beta_m", p.beta_m}, {"beta_u", p.beta_u}, {"beta_v", p.beta_v},
         {"coupling", coupling_key(p.coupling)}};
  if (p.coupling.mode() == LatentCoupling::Mode::PartialSign) j["q"] = p.coupling.match_probability();
  return j;
}

inline CensorMode censor_mode_from_string(const std::string& s) {
  if (s == "full") return CensorMode::Full;
  if (s == "mean_only") return CensorMode::MeanOnly;
  if (s == "mean_cov") return CensorMode::MeanCov;
  if (s == "gauss_equiv") return CensorMode::GaussianEquivalent;
  throw InvalidParameter("unknown censor mode '" + s + "'");
}

// ---------------------------------------------------------------------------

struct SampleJob {
  McmParams params;
  std::int64_t n = 1000;
  CensorMode mode = CensorMode::Full;
  bool keep_latents = false;
};

inline SampleJob sample_job_from_json(const Json& j) {
  check_schema_version(j);
  SampleJob job;
  job.params = mcm_params_from_json(j.at("model"));
  job.n = j.value("n", job.n);
  job.mode = censor_mode_from_string(j.value("censor", std::string("full")));
  job.keep_latents = j.value("keep_latents", job.keep_latents);
  if (job.n < 1) throw InvalidParameter("sample: n must be >= 1");
  if (job.keep_latents && job.mode != CensorMode::Full) {
    throw InvalidParameter("sample: latents are only defined for the full model");
  }
  return job;
}

struct CoeffsJob {
  McmParams params;
  ActivationSpec activation = ActivationSpec::relu();
  int max_degree = kDefaultTruncation;
  /// Monte-Carlo planted samples for the likelihood table; 0 skips the table.
  std::int64_t n_mc = 0;
};

inline CoeffsJob coeffs_job_from_json(const Json& j) {
  check_schema_version(j);
  CoeffsJob job;
  job.params = mcm_params_from_json(j.at("model"));
  if (j.contains("activation")) job.activation = activation_from_json(j.at("activation"));
  job.max_degree = j.value("max_degree", job.max_degree);
  job.n_mc = j.value("n_mc", job.n_mc);
  check_degree(job.max_degree);
  if (job.n_mc < 0) throw InvalidParameter("coeffs: n_mc must be non-negative");
  return job;
}

struct PerceptronJob {
  McmParams params;
  ActivationSpec activation = ActivationSpec::relu();
  LrRegime regime = LrRegime::CovLarge;
  double lr_prefactor = 1.0;
  /// Step budget; when absent, max_steps is used.
  std::optional<BudgetRule> budget;
  SgdConfig sgd;
};

inline PerceptronJob perceptron_job_from_json(const Json& j) {
  check_schema_version(j);
  PerceptronJob job;
  job.params = mcm_params_from_json(j.at("model"));
  if (j.contains("activation")) job.activation = activation_from_json(j.at("activation"));
  job.regime = lr_regime_from_string(j.value("regime", to_string(job.regime)));
  job.lr_prefactor = j.value("lr_prefactor", job.lr_prefactor);
  if (j.contains("budget")) job.budget = budget_from_json(j.at("budget"));
  job.sgd.max_steps = job.budget ? job.budget->steps(job.params.d) : j.value("max_steps", job.sgd.max_steps);
  job.sgd.delta = lr_schedule(job.regime, static_cast<double>(job.params.d), job.lr_prefactor);
  job.sgd.eta = j.value("eta", job.sgd.eta);
  job.sgd.init = init_conditioning_from_string(j.value("init", std::string("none")));
  if (j.contains("init_overlaps")) {
    const auto a = j.at("init_overlaps").get<std::vector<double>>();
    if (a.size() != 2) throw InvalidParameter("perceptron: init_overlaps must have two entries");
    job.sgd.init_overlaps = std::make_pair(a[0], a[1]);
  }
  job.sgd.record_every = j.value("record_every", std::max<std::int64_t>(1, job.sgd.max_steps / 200));
  job.sgd.stop_on_recovery = j.value("stop_on_recovery", false);
  job.sgd.validate();
  return job;
}

struct OdeJob {
  McmParams params;
  ActivationSpec activation = ActivationSpec::relu();
  int truncation = kDefaultTruncation;
  OdeState alpha0{0.05, 0.05};
  double t_end = 100.0;
  double dt = 0.01;
  OdeOptions options;
  /// SGD learning rate used to print the SGD step axis t_sgd = (d / delta) t.
  std::optional<double> delta;
};

inline OdeJob ode_job_from_json(const Json& j) {
  check_schema_version(j);
  OdeJob job;
  job.params = mcm_params_from_json(j.at("model"));
  if (j.contains("activation")) job.activation = activation_from_json(j.at("activation"));
  job.truncation = j.value("truncation", job.truncation);
  if (j.contains("alpha0")) {
    const auto a = j.at("alpha0").get<std::vector<double>>();
    if (a.size() != 2) throw InvalidParameter("ode: alpha0 must have two entries");
    job.alpha0 = {a[0], a[1]};
  }
  job.t_end = j.value("t_end", job.t_end);
  job.dt = j.value("dt", job.dt);
  job.options.eta = j.value("eta", job.options.eta);
  job.options.tolerance = j.value("tolerance", job.options.tolerance);
  job.options.record_stride = j.value("record_stride", job.options.record_stride);
  if (j.contains("delta")) job.delta = j.at("delta").get<double>();
  if (!(job.t_end > 0.0 && job.dt > 0.0)) throw InvalidParameter("ode: t_end and dt must be positive");
  return job;
}

struct TwoLayerJob {
  enum class Task { Mcm, Teacher };
  Task task = Task::Mcm;
  McmParams params;
  TeacherSpec teacher;
  std::int64_t d = 64;
  std::int64_t width = 256;
  ActivationSpec activation = ActivationSpec::relu();
  TrainConfig2L train;
};

inline TwoLayerJob two_layer_job_from_json(const Json& j) {
  check_schema_version(j);
  TwoLayerJob job;
  const auto task = j.value("task", std::string("mcm"));
  if (task == "mcm") {
    job.task = TwoLayerJob::Task::Mcm;
    job.params = mcm_params_from_json(j.at("model"));
    job.d = job.params.d;
  } else if (task == "teacher") {
    job.task = TwoLayerJob::Task::Teacher;
    job.d = j.value("d", job.d);
    const auto kind = j.value("teacher", std::string("plain"));
    if (kind == "plain") {
      job.teacher.kind = TeacherKind::Plain;
    } else if (kind == "mixed") {
      job.teacher.kind = TeacherKind::Mixed;
    } else {
      throw InvalidParameter("unknown teacher '" + kind + "'");
    }
    if (j.contains("gamma")) job.teacher.input = InputCovariance::cross_spiked(j.at("gamma").get<double>());
  } else {
    throw InvalidParameter("two-layer: task must be 'mcm' or 'teacher'");
  }
  job.width = j.value("width", job.width);
  if (j.contains("activation")) job.activation = activation_from_json(j.at("activation"));
  job.train.eta1 = j.value("eta1", job.task == TwoLayerJob::Task::Teacher ? 0.03 : job.train.eta1);
  job.train.eps = j.value("eps", job.train.eps);
  job.train.steps = j.value("steps", job.train.steps);
  job.train.eval_every = j.value("eval_every", job.train.eval_every);
  job.train.eval_per_decade = j.value("eval_per_decade", job.train.eval_per_decade);
  job.train.eval_set_size = j.value("eval_set_size", job.train.eval_set_size);
  if (job.width < 1) throw InvalidParameter("two-layer: width must be >= 1");
  if (job.d < 3) throw InvalidDimension("two-layer: d must be >= 3");
  job.train.validate();
  return job;
}

}  // namespace stairs
