#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stairs/diagnostics.hpp"

using namespace stairs;

namespace {

McmParams both_spikes(Eigen::Index d) {
  McmParams p;
  p.d = d;
  p.beta_u = 5.0;
  p.beta_v = 10.0;
  p.coupling = LatentCoupling::sign_matched();
  return p;
}

}  // namespace

TEST(KStatistic, SmallSampleOracle) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 10.0, -2.5, 0.5};
  const auto n = static_cast<std::int64_t>(x.size());
  EXPECT_NEAR(k_statistic(x.data(), n, 2), 15.035714285714286, 1e-12);
  EXPECT_NEAR(k_statistic(x.data(), n, 3), 62.892857142857146, 1e-11);
  EXPECT_NEAR(k_statistic(x.data(), n, 4), 522.4589285714286, 1e-10);
  EXPECT_THROW(k_statistic(x.data(), 3, 4), InvalidParameter);
  EXPECT_THROW(k_statistic(x.data(), n, 5), InvalidParameter);
}

TEST(KStatistic, ShiftInvariant) {
  std::vector<double> x{0.3, -1.2, 2.2, 0.9, -0.4, 1.7};
  std::vector<double> y = x;
  for (double& v : y) v += 1e3;
  for (int k = 2; k <= 4; ++k) {
    EXPECT_NEAR(k_statistic(x.data(), 6, k), k_statistic(y.data(), 6, k), 1e-8);
  }
}

TEST(DirectionalCumulant, GaussianHasNoHigherCumulants) {
  RngHandle r(1);
  std::vector<double> z(200000);
  for (double& v : z) v = r.normal();
  const auto k2 = directional_cumulant(z, 2);
  const auto k4 = directional_cumulant(z, 4);
  EXPECT_NEAR(k2.estimate, 1.0, 5 * k2.standard_error);
  EXPECT_NEAR(k4.estimate, 0.0, 5 * k4.standard_error);
  EXPECT_LT(k4.standard_error, 0.05);
}

TEST(DirectionalCumulant, CumulantSpikeAlongV) {
  // Whitened direction: variance 1 and k4 = -2 beta^2 / (1 + beta)^2.
  const Eigen::Index d = 32;
  const auto p = single_spike_params(SpikeKind::CumulantOnly, 10.0, d);
  RngHandle r(2);
  RngHandle sr = r.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(d, sr);
  const auto proj = planted_projections(p, spikes, spikes.v, 200000, r);
  const auto k2 = directional_cumulant(proj, 2);
  const auto k4 = directional_cumulant(proj, 4);
  EXPECT_NEAR(k2.estimate, 1.0, 0.03);
  EXPECT_NEAR(k4.estimate, -200.0 / 121.0, 0.08);
  // A direction orthogonal to the spikes is standard normal.
  const auto flat = planted_projections(p, spikes, spikes.m, 100000, r);
  EXPECT_NEAR(directional_cumulant(flat, 4).estimate, 0.0, 0.1);
}

TEST(DirectionalCumulant, RejectsSmallSamples) {
  const std::vector<double> few(100, 1.0);
  EXPECT_THROW(directional_cumulant(few, 2), InvalidParameter);
  EXPECT_THROW(directional_cumulant(std::vector<double>(20000, 0.0), 5), InvalidParameter);
  EXPECT_THROW(directional_cumulant(Mat::Zero(3, 20000), Vec::Zero(4), 2), InvalidDimension);
}

TEST(McLoss, OriginIsOne) {
  const auto p = both_spikes(16);
  RngHandle r(3);
  RngHandle sr = r.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(16, sr);
  const auto est = mc_population_loss(p, spikes, ActivationSpec::relu(), 0.0, 0.0, 100000, r);
  EXPECT_NEAR(est.estimate, 1.0, 5 * est.standard_error);
  EXPECT_THROW(mc_population_loss(p, spikes, ActivationSpec::relu(), 0.0, 0.0, 1, r), InvalidParameter);
}

TEST(McLoss, FlatWithoutSignal) {
  McmParams p;
  p.d = 16;
  RngHandle r(4);
  RngHandle sr = r.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(16, sr);
  const std::vector<std::pair<double, double>> grid{{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.7}, {-0.4, 0.4}};
  const auto est = mc_population_loss_grid(p, spikes, ActivationSpec::relu(), grid, 100000, r);
  for (const auto& e : est) EXPECT_NEAR(e.estimate, 1.0, 5 * e.standard_error);
  EXPECT_THROW(mc_population_loss_grid(p, spikes, ActivationSpec::relu(), {{0.9, 0.9}}, 10, r), DomainError);
}

TEST(McLoss, GridAgreesWithSeries) {
  const auto p = both_spikes(32);
  const auto sigma = ActivationSpec::relu();
  const auto series = HermiteSeries::exact(p, sigma, 12);
  RngHandle r(5);
  RngHandle sr = r.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(32, sr);
  const std::vector<std::pair<double, double>> grid{{0.0, 0.0}, {0.25, 0.0}, {0.0, 0.25}, {0.2, 0.2}, {-0.25, 0.1}};
  const auto est = mc_population_loss_grid(p, spikes, sigma, grid, 300000, r);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double s = population_loss(series, grid[k].first, grid[k].second);
    EXPECT_NEAR(est[k].estimate, s, 4 * est[k].standard_error) << "point " << k;
  }
  // The single-point estimator sees the same population value.
  const auto one = mc_population_loss(p, spikes, sigma, 0.25, 0.0, 300000, r);
  EXPECT_NEAR(one.estimate, population_loss(series, 0.25, 0.0), 4 * one.standard_error);
}

TEST(AssumptionCheck, ReluPassesIdentityFails) {
  const auto p = both_spikes(16);
  RngHandle r(6);
  AssumptionCheckOptions opt;
  opt.directions = 10;
  opt.samples_per_direction = 500;
  const auto relu = assumption_check(ActivationSpec::relu(), p, r, opt);
  EXPECT_TRUE(relu.passes());
  EXPECT_NEAR(relu.c2, 0.28209479177387814, 1e-9);
  EXPECT_NEAR(relu.c4, -0.081433751983819987, 1e-9);
  EXPECT_LE(relu.max_derivative_moment_4, 1.0);
  EXPECT_GT(relu.max_derivative_moment_4, 0.3);
  ASSERT_EQ(relu.weighted_partial_sums.size(), static_cast<std::size_t>(opt.max_degree + 1));
  EXPECT_NEAR(relu.weighted_partial_sums[1], 0.5, 1e-9);
  const auto id = assumption_check(ActivationSpec::identity(), p, r, opt);
  EXPECT_FALSE(id.passes());
  EXPECT_NEAR(id.max_derivative_moment_8, 1.0, 1e-12);
}
