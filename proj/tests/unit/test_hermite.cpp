#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "stairs/hermite.hpp"

using namespace stairs;

namespace {

// Oracle values below were computed offline with 30-digit adaptive quadrature.
constexpr double kReluC[] = {0.39894228040143268, 0.5, 0.28209479177387814, 0.0, -0.081433751983819987,
                             0.0, 0.044603102903819278, 0.0, -0.029801701688056006};
constexpr double kSoftplus4C[] = {0.43745168669819664, 0.5, 0.2579092546185294, 0.0, -0.062664150037885383};

McmParams mcm(double bu, double bv, LatentCoupling c, Eigen::Index d = 64) {
  McmParams p;
  p.d = d;
  p.beta_u = bu;
  p.beta_v = bv;
  p.coupling = c;
  return p;
}

}  // namespace

TEST(HermiteEval, ProbabilistsValues) {
  EXPECT_DOUBLE_EQ(hermite_eval(2, 1.0, HermiteConvention::Probabilists), 0.0);
  EXPECT_DOUBLE_EQ(hermite_eval(3, 2.0, HermiteConvention::Probabilists), 2.0);
  EXPECT_DOUBLE_EQ(hermite_eval(4, 1.0, HermiteConvention::Probabilists), -2.0);
  EXPECT_DOUBLE_EQ(hermite_eval(4, -1.0, HermiteConvention::Probabilists), -2.0);
}

TEST(HermiteEval, NormalizedIsScaledProbabilists) {
  for (int k = 0; k <= 20; ++k) {
    for (double z : {-3.1, -0.4, 0.0, 0.7, 2.5}) {
      const double he = hermite_eval(k, z, HermiteConvention::Probabilists);
      EXPECT_NEAR(hermite_eval(k, z), he / std::sqrt(factorial(k)), 1e-12 * std::max(1.0, std::abs(he)));
    }
  }
}

TEST(HermiteEval, DegreeCap) {
  EXPECT_NO_THROW(hermite_eval(30, 0.3));
  EXPECT_THROW(hermite_eval(31, 0.3), InvalidParameter);
  EXPECT_THROW(hermite_eval(-1, 0.3), InvalidParameter);
}

TEST(HermiteBasis, Orthonormality) {
  const QuadratureRule& gh = gauss_hermite(40);
  for (int i = 0; i <= 14; ++i) {
    for (int j = 0; j <= 14; ++j) {
      const double e = gh.expect([&](double z) { return hermite_eval(i, z) * hermite_eval(j, z); });
      EXPECT_NEAR(e, i == j ? 1.0 : 0.0, 1e-9) << i << "," << j;
    }
  }
}

TEST(HermiteBasis, ConversionRoundTripAndValue) {
  const std::vector<double> a{0.3, -1.2, 0.5, 2.0, -0.7, 0.1};
  const auto b = normalized_to_probabilists(a);
  const auto back = probabilists_to_normalized(b);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(back[k], a[k], 1e-15);
  for (double z : {-2.0, -0.3, 0.0, 1.1, 3.0}) {
    double fa = 0.0, fb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      fa += a[k] * hermite_eval(static_cast<int>(k), z);
      fb += b[k] * hermite_eval(static_cast<int>(k), z, HermiteConvention::Probabilists);
    }
    EXPECT_NEAR(fa, fb, 1e-12);
  }
}

TEST(Quadrature, GaussLegendreIntegratesPolynomials) {
  const QuadratureRule& gl = gauss_legendre(10);
  // Weights sum to 2 on [-1, 1]; x^18 integrates to 2/19.
  EXPECT_NEAR(gl.expect([](double) { return 1.0; }), 2.0, 1e-13);
  EXPECT_NEAR(gl.expect([](double x) { return std::pow(x, 18); }), 2.0 / 19.0, 1e-13);
}

TEST(ActivationCoeffs, ReluOracle) {
  const auto c = activation_coeffs(ActivationSpec::relu(), 8);
  for (int k = 0; k <= 8; ++k) EXPECT_NEAR(c[k], kReluC[k], 1e-10) << k;
  EXPECT_NEAR(c[2], 1.0 / std::sqrt(4.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(c[4], -1.0 / (std::sqrt(24.0) * std::sqrt(2.0 * std::numbers::pi)), 1e-12);
}

TEST(ActivationCoeffs, SmoothedReluOracle) {
  const auto c = activation_coeffs(ActivationSpec::smoothed_relu(4.0), 4);
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(c[k], kSoftplus4C[k], 1e-10) << k;
}

TEST(ActivationCoeffs, PolynomialIsExact) {
  // z^4 = He_4 + 6 He_2 + 3 = sqrt(24) h_4 + 6 sqrt(2) h_2 + 3.
  const auto c = activation_coeffs(ActivationSpec::polynomial({0, 0, 0, 0, 1}), 6);
  EXPECT_NEAR(c[0], 3.0, 1e-10);
  EXPECT_NEAR(c[2], 6.0 * std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(c[4], std::sqrt(24.0), 1e-10);
  EXPECT_NEAR(c[6], 0.0, 1e-10);
}

TEST(ActivationCoeffs, UndeclaredKinkFailsConvergenceCheck) {
  const auto step = ActivationSpec::custom(
      "step", [](double z) { return z > 0.0 ? 1.0 : 0.0; }, [](double) { return 0.0; });
  EXPECT_THROW(activation_coeff(step, 1), NumericalAccuracy);
  const auto declared = ActivationSpec::custom(
      "step", [](double z) { return z > 0.0 ? 1.0 : 0.0; }, [](double) { return 0.0; }, {0.0});
  EXPECT_NEAR(activation_coeff(declared, 1), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-12);
}

TEST(SignConditions, ReluPassesLinearAndH4Fail) {
  EXPECT_TRUE(satisfies_sign_conditions(ActivationSpec::relu()));
  EXPECT_TRUE(satisfies_sign_conditions(ActivationSpec::smoothed_relu(4.0)));
  EXPECT_FALSE(satisfies_sign_conditions(ActivationSpec::identity()));
  // h_4 = (z^4 - 6 z^2 + 3) / sqrt(24) has c_2 = 0.
  const double s = 1.0 / std::sqrt(24.0);
  EXPECT_FALSE(satisfies_sign_conditions(ActivationSpec::polynomial({3 * s, 0, -6 * s, 0, s})));
  EXPECT_THROW(require_sign_conditions(ActivationSpec::identity()), AssumptionViolation);
}

TEST(LikelihoodCoeffs, ClosedFormOracles) {
  const auto p = mcm(5.0, 10.0, LatentCoupling::sign_matched());
  EXPECT_DOUBLE_EQ(likelihood_coeff_exact(p, 0, 0), 1.0);
  EXPECT_NEAR(likelihood_coeff_exact(p, 2, 0), 3.5355339059327376, 1e-13);
  EXPECT_NEAR(likelihood_coeff_exact(p, 1, 1), 1.7010955993225251, 1e-13);
  EXPECT_NEAR(likelihood_coeff_exact(p, 0, 4), -0.3373952813750934, 1e-13);
  // Whitening removes the second-order term along v.
  EXPECT_NEAR(likelihood_coeff_exact(p, 0, 2), 0.0, 1e-14);
  EXPECT_NEAR(likelihood_coeff_exact(p, 0, 1), 0.0, 1e-14);
}

TEST(LikelihoodCoeffs, IndependentCouplingSplits) {
  const auto p = mcm(5.0, 10.0, LatentCoupling::independent());
  for (int i = 0; i <= 6; ++i) {
    for (int j = 0; i + j <= 8; ++j) {
      EXPECT_NEAR(likelihood_coeff_exact(p, i, j), likelihood_coeff_exact(p, i, 0) * likelihood_coeff_exact(p, 0, j),
                  1e-12);
    }
  }
  EXPECT_NEAR(likelihood_coeff_exact(p, 1, 1), 0.0, 1e-15);
}

TEST(LikelihoodCoeffs, MonteCarloAgreesWithClosedForm) {
  for (const auto& coupling : {LatentCoupling::independent(), LatentCoupling::sign_matched()}) {
    const auto p = mcm(2.0, 4.0, coupling, 12);
    RngHandle rng(21);
    const auto table = likelihood_table_mc(p, 4, 200000, rng);
    for (int i = 0; i <= 4; ++i) {
      for (int j = 0; i + j <= 4; ++j) {
        if (i + j == 0) continue;
        const double exact = likelihood_coeff_exact(p, i, j);
        EXPECT_NEAR(table.estimate(i, j), exact, 4.5 * table.standard_error(i, j) + 1e-12)
            << coupling.name() << " " << i << "," << j;
      }
    }
  }
}

TEST(LikelihoodCoeffs, AccuracyWarning) {
  const auto p = mcm(5.0, 0.0, LatentCoupling::independent(), 8);
  RngHandle rng(22);
  const auto loose = likelihood_coeff(p, 2, 0, 20000, rng, 1.0);
  EXPECT_FALSE(loose.accuracy_warning.has_value());
  EXPECT_NEAR(loose.estimate, 5.0 / std::sqrt(2.0), 5.0 * loose.standard_error);
  const auto tight = likelihood_coeff(p, 2, 0, 20000, rng, 1e-6);
  ASSERT_TRUE(tight.accuracy_warning.has_value());
  EXPECT_DOUBLE_EQ(*tight.accuracy_warning, tight.standard_error);
  EXPECT_DOUBLE_EQ(likelihood_coeff(p, 0, 0, 100, rng).estimate, 1.0);
}

TEST(PopulationLoss, OriginIsOne) {
  for (const auto& coupling : {LatentCoupling::independent(), LatentCoupling::sign_matched()}) {
    const auto s = HermiteSeries::exact(mcm(5.0, 10.0, coupling), ActivationSpec::relu());
    EXPECT_NEAR(population_loss(s, 0.0, 0.0), 1.0, 1e-14);
  }
}

TEST(PopulationLoss, IncrementMatchesDifference) {
  const auto s = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu(), 12);
  for (const auto& [au, av] : std::vector<std::pair<double, double>>{{0.1, 0.2}, {-0.3, 0.15}, {0.0, 0.4}}) {
    EXPECT_NEAR(loss_increment(s, au, av), population_loss(s, au, av) - population_loss(s, 0.0, 0.0), 1e-14);
  }
  // Pure quartic along v under independent latents: increment = -c04 a^4 to leading order.
  const auto ind = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::independent()), ActivationSpec::relu(), 12);
  const double c04 = effective_search_coeffs(ind).c04;
  EXPECT_NEAR(loss_increment(ind, 0.0, 1e-3) / -1e-12, c04, 1e-4 * c04);
}

TEST(PopulationLoss, DomainError) {
  const auto s = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::independent()), ActivationSpec::relu());
  EXPECT_THROW(population_loss(s, 0.5, 0.0), DomainError);
  EXPECT_THROW(population_loss(s, 0.0, -0.6), DomainError);
  EXPECT_THROW(population_gradient(s, 0.7, 0.0), DomainError);
}

TEST(PopulationGradient, MatchesFiniteDifferences) {
  const auto s = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu(), 12);
  const double h = 1e-5;
  for (const auto& [au, av] : std::vector<std::pair<double, double>>{{0.1, 0.2}, {-0.3, 0.15}, {0.4, -0.35}}) {
    const auto g = population_gradient(s, au, av);
    const double fu = (population_loss(s, au + h, av) - population_loss(s, au - h, av)) / (2 * h);
    const double fv = (population_loss(s, au, av + h) - population_loss(s, au, av - h)) / (2 * h);
    EXPECT_NEAR(g.d_alpha_u, fu, 1e-6 * std::abs(fu) + 1e-10);
    EXPECT_NEAR(g.d_alpha_v, fv, 1e-6 * std::abs(fv) + 1e-10);
  }
}

TEST(PopulationGradient, VanishesAtOriginWithCrossHessian) {
  const auto s = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu());
  const auto g0 = population_gradient(s, 0.0, 0.0);
  EXPECT_NEAR(g0.d_alpha_u, 0.0, 1e-14);
  EXPECT_NEAR(g0.d_alpha_v, 0.0, 1e-14);
  const double h = 1e-4;
  const double cross = (population_gradient(s, h, 0.0).d_alpha_v - population_gradient(s, -h, 0.0).d_alpha_v) / (2 * h);
  // -(1/2) sqrt(2) c^L_11 c^s_2 with c^L_11 = 1.70109..., c^s_2 = 0.28209...
  EXPECT_NEAR(cross, -0.339319478787285, 1e-8);
}

TEST(SearchCoeffs, ReluOracle) {
  const auto sm = effective_search_coeffs(
      HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu()));
  EXPECT_NEAR(sm.c20, 0.49867785050179085, 1e-10);
  EXPECT_NEAR(sm.c11, 0.33931947878728497, 1e-10);
  EXPECT_NEAR(sm.c04, 0.013737681832005258, 1e-10);
  const auto ind = effective_search_coeffs(
      HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::independent()), ActivationSpec::relu()));
  EXPECT_NEAR(ind.c11, 0.0, 1e-15);
  const auto nou = effective_search_coeffs(
      HermiteSeries::exact(mcm(0.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu()));
  EXPECT_EQ(nou.c20, 0.0);
  EXPECT_EQ(nou.c11, 0.0);
}

TEST(SearchCoeffs, RepellingActivationRejected) {
  // z^4 has c_4 > 0, so the cumulant direction is repelled.
  const auto s = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::independent()),
                                      ActivationSpec::polynomial({0, 0, 0, 0, 1}));
  EXPECT_THROW(effective_search_coeffs(s), AssumptionViolation);
}

TEST(SearchCoeffs, NormalFormMatchesSeriesNearOrigin) {
  // Property: l(a_u, a_v) - 1 = -(c20 a_u^2 + c11 a_u a_v + c04 a_v^4) + higher order.
  const auto series = HermiteSeries::exact(mcm(5.0, 10.0, LatentCoupling::sign_matched()), ActivationSpec::relu());
  const auto c = effective_search_coeffs(series);
  const double a = 1e-3;
  EXPECT_NEAR((population_loss(series, a, 0) - 1.0) / (a * a), -c.c20, 1e-5);
  const double mixed = population_loss(series, a, a) - population_loss(series, a, -a);
  EXPECT_NEAR(mixed / (2 * a * a), -c.c11, 1e-5);
}
