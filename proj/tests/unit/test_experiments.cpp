#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>

#include "stairs/experiments.hpp"

using namespace stairs;
namespace fs = std::filesystem;

namespace {

RunRecord fake_run(std::int64_t d, std::optional<std::int64_t> tau_v, int seed_index = 0) {
  RunRecord r;
  r.d = d;
  r.seed_index = seed_index;
  r.run_id = "fake_d" + std::to_string(d) + "_s" + std::to_string(seed_index);
  r.report.tau_v = tau_v;
  r.report.tau_u = 1;
  return r;
}

SweepConfig tiny_sweep() {
  SweepConfig c;
  c.task = SweepTask::CovOnly;
  c.dims = {16, 24};
  c.seeds = 2;
  c.lr_prefactor = 0.5;
  c.budget = {BudgetKind::DLog2, 10.0};
  c.base_seed = 99;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stairs_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Statistics, QuantileAndCensoredMedian) {
  EXPECT_DOUBLE_EQ(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted({5.0}, 0.9), 5.0);
  EXPECT_THROW(quantile_sorted({}, 0.5), InvalidParameter);
  EXPECT_DOUBLE_EQ(median_with_censoring({3.0, std::nullopt, 1.0}), 3.0);
  EXPECT_TRUE(std::isinf(median_with_censoring({std::nullopt, std::nullopt, 1.0})));
  EXPECT_TRUE(std::isinf(median_with_censoring({2.0, std::nullopt})));
  EXPECT_DOUBLE_EQ(median_with_censoring({2.0, 4.0}), 3.0);
}

TEST(Statistics, PowerLawFitIsExact) {
  std::vector<double> x, y;
  for (double d : {16.0, 32.0, 64.0, 128.0}) {
    x.push_back(d);
    y.push_back(7.0 * d * d);
  }
  const auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-6);
  EXPECT_NEAR(std::exp(f.intercept), 7.0, 1e-6);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW(fit_power_law({1.0}, {1.0}), InvalidParameter);
  EXPECT_THROW(fit_power_law({1.0, 2.0}, {1.0, -1.0}), DomainError);
}

TEST(Statistics, ScalingFitDividesEnvelope) {
  std::vector<RunRecord> runs;
  for (std::int64_t d : {16, 32, 64}) {
    const double l = std::log(static_cast<double>(d));
    const auto tau = static_cast<std::int64_t>(std::llround(3.0 * d * d * d * l * l));
    runs.push_back(fake_run(d, tau, 0));
    runs.push_back(fake_run(d, std::nullopt, 1));
    runs.push_back(fake_run(d, tau, 2));
  }
  const auto fit = scaling_fit(runs, Spike::V, 2);
  EXPECT_NEAR(fit.slope, 3.0, 1e-4);
  EXPECT_GT(fit.raw_slope, 3.0);
  EXPECT_NEAR(fit.censored_fraction, 1.0 / 3.0, 1e-12);
  ASSERT_EQ(fit.per_d.size(), 3u);
  EXPECT_EQ(fit.per_d[0].finite, 2);
}

TEST(Statistics, ScalingFitRefusesFullyCensoredDimension) {
  std::vector<RunRecord> runs{fake_run(16, 100), fake_run(32, std::nullopt), fake_run(32, std::nullopt, 1)};
  try {
    scaling_fit(runs, Spike::V);
    FAIL() << "expected InvalidState";
  } catch (const InvalidState& e) {
    EXPECT_NE(std::string(e.what()).find("d=32: 2/2"), std::string::npos);
  }
  EXPECT_THROW(scaling_fit({fake_run(16, 100)}, Spike::V), InvalidParameter);
}

TEST(Statistics, ZeroTimeCountsAsOneStep) {
  const auto s = dimension_stats({fake_run(8, 0)}, Spike::V);
  EXPECT_DOUBLE_EQ(s.front().median, 1.0);
}

TEST(Budget, RulesAndLogPower) {
  const double l = std::log(64.0);
  EXPECT_EQ((BudgetRule{BudgetKind::DLog2, 40.0}.steps(64)), static_cast<std::int64_t>(std::ceil(40.0 * 64 * l * l)));
  EXPECT_EQ((BudgetRule{BudgetKind::D3, 1.0}.steps(10)), 1000);
  EXPECT_EQ((BudgetRule{BudgetKind::D2Log, 1.0}.log_power()), 1);
  EXPECT_EQ((BudgetRule{BudgetKind::D3Log2, 1.0}.log_power()), 2);
  EXPECT_THROW((BudgetRule{BudgetKind::D3, 0.0}.steps(10)), InvalidParameter);
  EXPECT_EQ(budget_kind_from_string(to_string(BudgetKind::D3Log2)), BudgetKind::D3Log2);
  EXPECT_THROW(budget_kind_from_string("d4"), InvalidParameter);
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  for (int threads : {1, 3}) {
    std::vector<int> hits(50, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  EXPECT_THROW(parallel_for(10, 2,
                            [](std::size_t i) {
                              if (i == 7) throw InvalidState("boom");
                            }),
               InvalidState);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto c = tiny_sweep();
  const auto a = run_sweep(c, 1);
  const auto b = run_sweep(c, 2);
  ASSERT_EQ(a.runs.size(), 4u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].run_id, b.runs[i].run_id);
    EXPECT_EQ(a.runs[i].seed, b.runs[i].seed);
    EXPECT_EQ(a.runs[i].report.tau_u, b.runs[i].report.tau_u);
    EXPECT_EQ(a.runs[i].report.final_alpha_u, b.runs[i].report.final_alpha_u);
  }
  EXPECT_EQ(a.runs[0].run_id, "cov_only_d16_s0");
  EXPECT_EQ(sweep_summary_csv(a.runs), sweep_summary_csv(b.runs));
}

TEST(Sweep, RunSeedDependsOnlyOnCoordinates) {
  RngHandle a = run_rng(5, 64, 3);
  RngHandle b = run_rng(5, 64, 3);
  RngHandle c = run_rng(5, 64, 4);
  RngHandle e = run_rng(5, 32, 3);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, e.next());
}

TEST(Artifacts, EmptyRunSet) {
  const auto dir = scratch("empty");
  const auto m = emit_artifacts({}, Json{{"schema_version", 1}}, dir, 0.0);
  EXPECT_TRUE(m.manifest.at("runs").empty());
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(read_text_file(dir / "sweep_summary.csv"), sweep_summary_csv({}));
  fs::remove_all(dir);
}

TEST(Artifacts, LayoutAndByteIdenticalRerun) {
  auto c = tiny_sweep();
  c.dims = {16};
  c.seeds = 1;
  const auto dir1 = scratch("run1");
  const auto dir2 = scratch("run2");
  const auto m1 = emit_artifacts(run_sweep(c, 1), dir1);
  emit_artifacts(run_sweep(c, 1), dir2);
  EXPECT_EQ(m1.manifest.at("runs").size(), 1u);
  const std::string trace = "traces/cov_only_d16_s0.csv";
  const std::string report = "reports/cov_only_d16_s0.json";
  ASSERT_TRUE(fs::exists(dir1 / trace));
  ASSERT_TRUE(fs::exists(dir1 / report));
  EXPECT_EQ(read_text_file(dir1 / trace).rfind("t,alpha_u,alpha_v\n", 0), 0u);
  EXPECT_EQ(read_text_file(dir1 / trace), read_text_file(dir2 / trace));
  EXPECT_EQ(read_text_file(dir1 / report), read_text_file(dir2 / report));
  EXPECT_EQ(read_text_file(dir1 / "sweep_summary.csv"), read_text_file(dir2 / "sweep_summary.csv"));
  const auto rep = Json::parse(read_text_file(dir1 / report));
  for (const char* key : {"tau_u", "tau_v", "eta", "delta", "d", "seed", "regime"}) EXPECT_TRUE(rep.contains(key)) << key;
  const auto manifest = Json::parse(read_text_file(dir1 / "manifest.json"));
  EXPECT_TRUE(manifest.contains("created_utc"));
  EXPECT_EQ(manifest.at("library_version"), kLibraryVersion);
  EXPECT_FALSE(manifest.contains("fit"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST(Config, SweepRoundTrip) {
  auto c = tiny_sweep();
  c.task = SweepTask::McmCorrelated;
  c.q = 0.4;
  c.init = InitConditioning::MatchedSigns;
  const auto back = sweep_config_from_json(to_json(c));
  EXPECT_EQ(back.task, c.task);
  EXPECT_EQ(back.q, 0.4);
  EXPECT_EQ(back.dims, c.dims);
  EXPECT_EQ(back.budget.kind, c.budget.kind);
  EXPECT_EQ(back.budget.prefactor, c.budget.prefactor);
  EXPECT_EQ(back.init, c.init);
  EXPECT_EQ(back.base_seed, 99u);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, CompareRoundTrip) {
  CompareConfig c;
  c.qs = {0.0, 0.5, 1.0};
  c.seeds = 3;
  EXPECT_EQ(to_json(compare_config_from_json(to_json(c))), to_json(c));
}

TEST(Config, SchemaVersionChecked) {
  Json j = to_json(tiny_sweep());
  j["schema_version"] = 99;
  EXPECT_THROW(sweep_config_from_json(j), InvalidParameter);
  j.erase("schema_version");
  EXPECT_THROW(sweep_config_from_json(j), InvalidParameter);
  Json bad = to_json(tiny_sweep());
  bad["dims"] = std::vector<int>{64, 32};
  EXPECT_THROW(sweep_config_from_json(bad), InvalidParameter);
  bad = to_json(tiny_sweep());
  bad["task"] = "nonsense";
  EXPECT_THROW(sweep_config_from_json(bad), InvalidParameter);
}

TEST(Couplings, ForQ) {
  EXPECT_EQ(coupling_for_q(0.0).latent_correlation(), 0.0);
  EXPECT_NEAR(coupling_for_q(1.0).latent_correlation(), std::sqrt(2.0 / 3.141592653589793), 1e-15);
}
