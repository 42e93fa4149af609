// stairs-lab: command-line front end of the simulation library.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stairs/stairs.hpp"

namespace fs = std::filesystem;
using namespace stairs;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 1;
  bool seed_given = false;
};

Json load_config(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw InvalidParameter("cannot parse '" + path + "': " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_manifest(const fs::path& out, const std::string& command, const Json& config, std::uint64_t seed,
                    double wall, const std::vector<std::string>& files, const Json& extra = Json::object()) {
  Json m{{"library_version", kLibraryVersion}, {"command", command},       {"created_utc", utc_timestamp()},
         {"wall_clock_seconds", wall},         {"config", config},         {"seeds", std::vector<std::uint64_t>{seed}},
         {"files", files}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text_file(out / "manifest.json", m.dump(2) + "\n");
}

int cmd_sample(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json cfg = load_config(c.config);
  const SampleJob job = sample_job_from_json(cfg);
  RngHandle rng(c.seed);
  RngHandle spike_rng = rng.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(job.params.d, spike_rng);
  RngHandle data_rng = rng.derive(0, 2);
  const McmSampler sampler(job.params, spikes);

  std::vector<std::string> header{"y"};
  for (Eigen::Index i = 0; i < job.params.d; ++i) header.push_back("x_" + std::to_string(i));
  if (job.keep_latents) {
    header.emplace_back("lambda");
    header.emplace_back("nu");
  }
  CsvWriter csv(header);
  LabeledSample s;
  std::vector<std::string> row;
  for (std::int64_t n = 0; n < job.n; ++n) {
    sampler.draw(data_rng, s, job.keep_latents, job.mode);
    row.clear();
    row.push_back(format_number(s.y));
    for (Eigen::Index i = 0; i < s.x.size(); ++i) row.push_back(format_number(s.x[i]));
    if (job.keep_latents) {
      row.push_back(s.latents ? format_number(s.latents->lambda) : std::string());
      row.push_back(s.latents ? format_number(s.latents->nu) : std::string());
    }
    csv.row(row);
  }
  const fs::path out(c.out);
  csv.save(out / "samples.csv");
  CsvWriter sp({"index", "m", "u", "v"});
  for (Eigen::Index i = 0; i < spikes.dim(); ++i) {
    sp.row({std::to_string(i), format_number(spikes.m[i]), format_number(spikes.u[i]), format_number(spikes.v[i])});
  }
  sp.save(out / "spikes.csv");
  write_manifest(out, "sample", cfg, c.seed, seconds_since(t0), {"samples.csv", "spikes.csv"});
  std::cout << "wrote " << job.n << " samples to " << (out / "samples.csv").string() << "\n";
  return 0;
}

int cmd_coeffs(const Common& c, bool verify) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json cfg = load_config(c.config);
  const CoeffsJob job = coeffs_job_from_json(cfg);
  if (verify && job.n_mc == 0) throw InvalidParameter("coeffs --verify needs n_mc > 0 in the config");
  const fs::path out(c.out);

  CsvWriter sig({"k", "c_sigma", "standard_error"});
  for (int k = 0; k <= job.max_degree; ++k) {
    const double fine = activation_coeff(job.activation, k);
    const double coarse = detail::activation_coeff_at(job.activation, k, kActivationQuadratureNodes);
    sig.row({std::to_string(k), format_number(fine), format_number(std::abs(fine - coarse))});
  }
  sig.save(out / "coeffs_sigma.csv");

  std::optional<LikelihoodTableMc> table;
  if (job.n_mc > 0) {
    RngHandle rng(c.seed);
    table = likelihood_table_mc(job.params, job.max_degree, job.n_mc, rng);
  }
  CsvWriter lik({"i", "j", "c_L_exact", "c_L_mc", "standard_error"});
  int failures = 0;
  double worst_z = 0.0;
  for (int i = 0; i <= job.max_degree; ++i) {
    for (int j = 0; i + j <= job.max_degree; ++j) {
      const double exact = likelihood_coeff_exact(job.params, i, j);
      std::string mc, se;
      if (table) {
        const double est = table->estimate(i, j);
        const double err = table->standard_error(i, j);
        mc = format_number(est);
        se = format_number(err);
        if (i + j > 0) {
          const double z = std::abs(est - exact) / std::max(err, 1e-300);
          if (std::abs(est - exact) > 4.0 * err + 1e-12) ++failures;
          worst_z = std::max(worst_z, z);
        }
      }
      lik.row({std::to_string(i), std::to_string(j), format_number(exact), mc, se});
    }
  }
  lik.save(out / "coeffs_likelihood.csv");

  const HermiteSeries series = HermiteSeries::exact(job.params, job.activation, std::max(4, job.max_degree));
  const SearchCoeffs sc = effective_search_coeffs(series);
  Json extra{{"search_coeffs", {{"c20", sc.c20}, {"c11", sc.c11}, {"c04", sc.c04}}},
             {"sign_conditions", satisfies_sign_conditions(job.activation)}};
  if (verify) extra["verify"] = {{"failures", failures}, {"max_abs_z", worst_z}};
  write_manifest(out, "coeffs", cfg, c.seed, seconds_since(t0), {"coeffs_sigma.csv", "coeffs_likelihood.csv"}, extra);
  std::printf("c20 = %.6g  c11 = %.6g  c04 = %.6g\n", sc.c20, sc.c11, sc.c04);
  if (verify) {
    std::printf("verify: %s (%d coefficients outside 4 SE, max |z| = %.2f)\n", failures == 0 ? "PASS" : "FAIL",
                failures, worst_z);
    return failures == 0 ? 0 : 2;
  }
  return 0;
}

int cmd_perceptron(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json cfg = load_config(c.config);
  const PerceptronJob job = perceptron_job_from_json(cfg);
  RngHandle rng(c.seed);
  RngHandle spike_rng = rng.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(job.params.d, spike_rng);
  RunRecord r;
  r.run_id = "perceptron";
  r.task = "perceptron";
  r.regime = to_string(job.regime);
  r.d = job.params.d;
  r.seed = c.seed;
  r.budget = job.sgd.max_steps;
  r.q = job.params.coupling.match_probability();
  r.report = train(job.params, spikes, job.activation, job.sgd, rng);
  emit_artifacts({r}, cfg, c.out, seconds_since(t0));
  const auto show = [](const std::optional<std::int64_t>& t) { return t ? std::to_string(*t) : std::string("censored"); };
  std::cout << "tau_u = " << show(r.report.tau_u) << "  tau_v = " << show(r.report.tau_v) << "  steps = "
            << r.report.steps << "\n";
  return 0;
}

int cmd_ode(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json cfg = load_config(c.config);
  const OdeJob job = ode_job_from_json(cfg);
  const HermiteSeries series = HermiteSeries::exact(job.params, job.activation, std::max(4, job.truncation));
  const SearchOdeCoeffs coeffs = SearchOdeCoeffs::from(effective_search_coeffs(series));
  const OdeTrajectory traj = integrate(coeffs, job.alpha0, job.t_end, job.dt, job.options);

  std::vector<std::string> header{"t", "alpha_u", "alpha_v"};
  if (job.delta) header.emplace_back("t_sgd");
  CsvWriter csv(header);
  const double scale = job.delta ? static_cast<double>(job.params.d) / *job.delta : 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<std::string> row{format_number(traj.t[i]), format_number(traj.alpha_u[i]),
                                 format_number(traj.alpha_v[i])};
    if (job.delta) row.push_back(format_number(traj.t[i] * scale));
    csv.row(row);
  }
  const fs::path out(c.out);
  csv.save(out / "ode_trajectory.csv");
  const auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
  Json extra{{"coefficients", {{"c20", coeffs.c20}, {"c11", coeffs.c11}, {"c04", coeffs.c04}}},
             {"dt", traj.dt},
             {"exit_time_u", opt(traj.exit_time_u)},
             {"exit_time_v", opt(traj.exit_time_v)}};
  write_manifest(out, "ode", cfg, c.seed, seconds_since(t0), {"ode_trajectory.csv"}, extra);
  std::printf("integrated to t = %.6g with dt = %.3g\n", traj.t_end(), traj.dt);
  return 0;
}

int cmd_two_layer(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const Json cfg = load_config(c.config);
  const TwoLayerJob job = two_layer_job_from_json(cfg);
  const RngHandle rng(c.seed);
  TrainingLog log;
  Json extra = Json::object();
  const auto opt = [](const std::optional<std::int64_t>& x) { return optional_json(x); };
  if (job.task == TwoLayerJob::Task::Mcm) {
    log = run_two_layer(job.params, job.width, job.activation, job.train, rng);
    extra["separation_step"] = opt(separation_step(log));
    extra["drop_step_mean_only"] = opt(first_drop_step(log, &TrainingLogRow::err_mean_only));
    extra["drop_step_mean_cov"] = opt(first_drop_step(log, &TrainingLogRow::err_mean_cov));
    extra["drop_step_full"] = opt(first_drop_step(log, &TrainingLogRow::err_full));
  } else {
    log = run_two_layer(job.teacher, job.d, job.width, job.activation, job.train, rng);
  }
  const fs::path out(c.out);
  write_text_file(out / "two_layer.csv", training_log_csv(log));
  write_manifest(out, "two-layer", cfg, c.seed, seconds_since(t0), {"two_layer.csv"}, extra);
  const auto& last = log.back();
  std::printf("step %lld  loss %.4g  err_full %.4g\n", static_cast<long long>(last.step), last.loss_train,
              last.err_full);
  return 0;
}

int cmd_sweep(const Common& c) {
  const Json cfg = load_config(c.config);
  SweepConfig sc = sweep_config_from_json(cfg);
  if (c.seed_given) sc.base_seed = c.seed;
  const SweepResult result = run_sweep(sc, c.threads);
  emit_artifacts(result, c.out);
  if (result.fit) {
    std::printf("slope %.3f (raw %.3f, r2 %.3f), censored %.1f%%\n", result.fit->slope, result.fit->raw_slope,
                result.fit->r2, 100.0 * result.fit->censored_fraction);
  } else if (result.fit_error) {
    std::printf("fit aborted: %s\n", result.fit_error->c_str());
  }
  return 0;
}

int cmd_compare(const Common& c) {
  const Json cfg = load_config(c.config);
  CompareConfig cc = compare_config_from_json(cfg);
  if (c.seed_given) cc.base_seed = c.seed;
  const CompareResult result = compare_couplings(cc, c.threads);
  const fs::path out(c.out);
  ensure_directory(out);
  write_text_file(out / "compare_table.csv", compare_table_csv(result));
  emit_artifacts(result.runs, to_json(cc), out, result.wall_seconds, Json{{"table", "compare_table.csv"}});
  std::cout << compare_table_csv(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stairs-lab: mixed-cumulant model simulations"};
  app.require_subcommand(1);
  Common common;
  bool verify = false;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  std::vector<CLI::App*> subs;
  for (const char* name : {"sample", "coeffs", "perceptron", "ode", "two-layer", "sweep", "compare"}) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub);
    subs.push_back(sub);
  }
  subs[1]->add_flag("--verify", verify, "compare Monte-Carlo likelihood coefficients with the closed form");

  CLI11_PARSE(app, argc, argv);
  try {
    CLI::App* sub = app.get_subcommands().front();
    common.seed_given = sub->count("--seed") > 0;
    ensure_directory(common.out);
    const std::string name = sub->get_name();
    if (name == "sample") return cmd_sample(common);
    if (name == "coeffs") return cmd_coeffs(common, verify);
    if (name == "perceptron") return cmd_perceptron(common);
    if (name == "ode") return cmd_ode(common);
    if (name == "two-layer") return cmd_two_layer(common);
    if (name == "sweep") return cmd_sweep(common);
    if (name == "compare") return cmd_compare(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
