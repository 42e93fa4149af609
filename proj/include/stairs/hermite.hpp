#pragma once

// Hermite machinery for the population loss of a spherical perceptron on the
// mixed-cumulant model.
//
// Conventions: He_k are the probabilists' polynomials (He_{k+1} = z He_k - k He_{k-1}),
// h_k = He_k / sqrt(k!) are orthonormal under N(0, 1). Everything stored in a
// HermiteSeries is in the orthonormal convention.
//
// With y_u = u . x, y_v = v . x and orthogonal spikes (beta_m = 0), the likelihood
// ratio has coefficients c^L_ij = E_plant[h_i(y_u) h_j(y_v)], the activation has
// c^s_k = E[s(z) h_k(z)], and the population correlation loss is
//
//   l(a_u, a_v) = 1 + c^s_0 / 2 - 1/2 sum_{i,j} c^L_ij c^s_{i+j} a_u^i a_v^j.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stairs/errors.hpp"
#include "stairs/mcm.hpp"
#include "stairs/rng.hpp"
#include "stairs/sampling.hpp"

namespace stairs {

enum class HermiteConvention { Normalized, Probabilists };

inline constexpr int kMaxHermiteDegree = 30;

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

/// sqrt(k!), the factor between He_k and h_k.
inline double hermite_norm(int k) { return std::sqrt(factorial(k)); }

inline void check_degree(int k) {
  if (k < 0 || k > kMaxHermiteDegree) {
    throw InvalidParameter("hermite: unsupported degree " + std::to_string(k) + " (cap " +
                           std::to_string(kMaxHermiteDegree) + ")");
  }
}

/// Values of h_0..h_K (or He_0..He_K) at z, written into out[0..K].
inline void hermite_all(int max_degree, double z, HermiteConvention conv, double* out) {
  check_degree(max_degree);
  out[0] = 1.0;
  if (max_degree == 0) return;
  if (conv == HermiteConvention::Probabilists) {
    out[1] = z;
    for (int k = 1; k < max_degree; ++k) out[k + 1] = z * out[k] - k * out[k - 1];
    return;
  }
  // Orthonormal recurrence: h_{k+1} = (z h_k - sqrt(k) h_{k-1}) / sqrt(k+1).
  out[1] = z;
  for (int k = 1; k < max_degree; ++k) {
    out[k + 1] = (z * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) / std::sqrt(k + 1.0);
  }
}

inline double hermite_eval(int k, double z, HermiteConvention conv = HermiteConvention::Normalized) {
  check_degree(k);
  double buf[kMaxHermiteDegree + 1];
  hermite_all(k, z, conv, buf);
  return buf[k];
}

/// Coefficients in the h basis -> coefficients in the He basis (a_k h_k = (a_k / sqrt(k!)) He_k).
inline std::vector<double> normalized_to_probabilists(const std::vector<double>& coeffs) {
  std::vector<double> out(coeffs.size());
  for (std::size_t k = 0; k < coeffs.size(); ++k) out[k] = coeffs[k] / hermite_norm(static_cast<int>(k));
  return out;
}

inline std::vector<double> probabilists_to_normalized(const std::vector<double>& coeffs) {
  std::vector<double> out(coeffs.size());
  for (std::size_t k = 0; k < coeffs.size(); ++k) out[k] = coeffs[k] * hermite_norm(static_cast<int>(k));
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Nodes and weights for an expectation: E[f] ~ sum_i w_i f(x_i).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

namespace detail {

// Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix with zero diagonal
// and off-diagonal b_k. Weights are mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(int n, const std::function<double(int)>& offdiag, double mu0) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 0; k < n - 1; ++k) sub[k] = offdiag(k + 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double c = solver.eigenvectors()(0, i);
    rule.weights[i] = mu0 * c * c;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Hermite rule for expectations under N(0, 1) (probabilists' weight, sum of weights 1).
inline const QuadratureRule& gauss_hermite(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    if (n < 1) throw InvalidParameter("gauss_hermite: need at least one node");
    QuadratureRule rule =
        n == 1 ? QuadratureRule{{0.0}, {1.0}}
               : detail::golub_welsch(n, [](int k) { return std::sqrt(static_cast<double>(k)); }, 1.0);
    it = cache.emplace(n, std::move(rule)).first;
  }
  return it->second;
}

/// Gauss-Legendre rule on [-1, 1] with weights summing to 2.
inline const QuadratureRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    if (n < 2) throw InvalidParameter("gauss_legendre: need at least two nodes");
    QuadratureRule rule = detail::golub_welsch(
        n, [](int k) { return k / std::sqrt(4.0 * k * k - 1.0); }, 2.0);
    it = cache.emplace(n, std::move(rule)).first;
  }
  return it->second;
}

/// E[f(z)], z ~ N(0, 1), for f smooth on each interval between breakpoints. The line is
/// cut at the breakpoints and at +-half_width, every piece is split into unit panels and
/// each panel gets an n-point Gauss-Legendre rule.
template <typename F>
double gaussian_expectation_piecewise(F&& f, const std::vector<double>& breakpoints, int n,
                                      double half_width = 16.0) {
  std::vector<double> cuts{-half_width};
  for (double b : breakpoints) {
    if (b > -half_width && b < half_width) cuts.push_back(b);
  }
  cuts.push_back(half_width);
  std::sort(cuts.begin(), cuts.end());
  const QuadratureRule& gl = gauss_legendre(n);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double b = cuts[p + 1];
    if (b <= a) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil(b - a)));
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
      const double lo = a + k * h;
      const double mid = lo + 0.5 * h;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double z = mid + 0.5 * h * gl.nodes[i];
        acc += 0.5 * h * gl.weights[i] * f(z) * std::exp(-0.5 * z * z) * inv_sqrt_2pi;
      }
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Activations

class ActivationSpec {
 public:
  enum class Kind { Relu, SmoothedRelu, Polynomial, Custom };
  using Fn = std::function<double(double)>;

  static ActivationSpec relu() {
    ActivationSpec a(Kind::Relu, "relu");
    a.breakpoints_ = {0.0};
    return a;
  }

  /// Softplus log(1 + exp(tau z)) / tau; converges to ReLU as tau grows.
  static ActivationSpec smoothed_relu(double tau) {
    if (!(tau > 0.0)) throw InvalidParameter("smoothed_relu: sharpness must be positive");
    ActivationSpec a(Kind::SmoothedRelu, "smoothed_relu(" + std::to_string(tau) + ")");
    a.tau_ = tau;
    return a;
  }

  /// sum_k coeffs[k] z^k (monomial basis).
  static ActivationSpec polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw InvalidParameter("polynomial activation needs coefficients");
    ActivationSpec a(Kind::Polynomial, "polynomial");
    a.poly_ = std::move(coeffs);
    return a;
  }

  static ActivationSpec identity() { return polynomial({0.0, 1.0}); }

  static ActivationSpec custom(std::string name, Fn value, Fn derivative, std::vector<double> breakpoints = {}) {
    ActivationSpec a(Kind::Custom, std::move(name));
    a.value_ = std::move(value);
    a.derivative_ = std::move(derivative);
    a.breakpoints_ = std::move(breakpoints);
    return a;
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double sharpness() const noexcept { return tau_; }
  bool has_derivative() const noexcept { return kind_ != Kind::Custom || static_cast<bool>(derivative_); }

  /// Points where the activation or its derivative is not smooth.
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

  double operator()(double z) const { return value(z); }

  double value(double z) const {
    switch (kind_) {
      case Kind::Relu: return z > 0.0 ? z : 0.0;
      case Kind::SmoothedRelu: {
        const double t = tau_ * z;
        return (t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t))) / tau_;
      }
      case Kind::Polynomial: {
        double acc = 0.0;
        for (auto it = poly_.rbegin(); it != poly_.rend(); ++it) acc = acc * z + *it;
        return acc;
      }
      case Kind::Custom: return value_(z);
    }
    return 0.0;
  }

  double derivative(double z) const {
    switch (kind_) {
      case Kind::Relu: return z > 0.0 ? 1.0 : 0.0;
      case Kind::SmoothedRelu: {
        const double t = tau_ * z;
        return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
      }
      case Kind::Polynomial: {
        double acc = 0.0;
        for (std::size_t k = poly_.size(); k-- > 1;) acc = acc * z + k * poly_[k];
        return acc;
      }
      case Kind::Custom:
        if (!derivative_) throw InvalidParameter("activation '" + name_ + "' has no derivative");
        return derivative_(z);
    }
    return 0.0;
  }

 private:
  ActivationSpec(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  double tau_ = 0.0;
  std::vector<double> poly_;
  Fn value_;
  Fn derivative_;
  std::vector<double> breakpoints_;
};

inline constexpr int kActivationQuadratureNodes = 200;
inline constexpr double kActivationQuadratureTolerance = 1e-8;

namespace detail {

inline double activation_coeff_at(const ActivationSpec& sigma, int k, int nodes) {
  const auto integrand = [&](double z) { return sigma.value(z) * hermite_eval(k, z); };
  if (sigma.breakpoints().empty()) return gauss_hermite(nodes).expect(integrand);
  // Kinks spoil the spectral convergence of Gauss-Hermite; integrate piecewise instead.
  return gaussian_expectation_piecewise(integrand, sigma.breakpoints(), nodes / 10);
}

}  // namespace detail

/// c^s_k = E[s(z) h_k(z)] (orthonormal convention). Gauss-Hermite with 200 nodes for
/// smooth activations, panel Gauss-Legendre split at the kinks otherwise; in both cases
/// the result is checked against a rule with twice the nodes.
inline double activation_coeff(const ActivationSpec& sigma, int k) {
  check_degree(k);
  const double coarse = detail::activation_coeff_at(sigma, k, kActivationQuadratureNodes);
  const double fine = detail::activation_coeff_at(sigma, k, 2 * kActivationQuadratureNodes);
  const double diff = std::abs(fine - coarse);
  if (diff > kActivationQuadratureTolerance * std::max(1.0, std::abs(fine))) {
    throw NumericalAccuracy("activation_coeff: quadrature did not converge for " + sigma.name() + ", k = " +
                                std::to_string(k),
                            diff);
  }
  return fine;
}

inline std::vector<double> activation_coeffs(const ActivationSpec& sigma, int max_degree) {
  std::vector<double> c(max_degree + 1);
  for (int k = 0; k <= max_degree; ++k) c[k] = activation_coeff(sigma, k);
  return c;
}

/// Coefficients within this distance of zero count as zero in the sign conditions, so
/// that quadrature round-off on an exactly vanishing coefficient cannot pass them.
inline constexpr double kSignConditionTolerance = 1e-12;

/// Sign conditions c^s_2 > 0 and c^s_4 < 0 required for the perceptron analysis.
inline bool satisfies_sign_conditions(const ActivationSpec& sigma) {
  return activation_coeff(sigma, 2) > kSignConditionTolerance &&
         activation_coeff(sigma, 4) < -kSignConditionTolerance;
}

inline void require_sign_conditions(const ActivationSpec& sigma) {
  const double c2 = activation_coeff(sigma, 2);
  const double c4 = activation_coeff(sigma, 4);
  if (!(c2 > kSignConditionTolerance && c4 < -kSignConditionTolerance)) {
    throw AssumptionViolation("activation " + sigma.name() + " needs c2 > 0 and c4 < 0 (got c2 = " +
                              std::to_string(c2) + ", c4 = " + std::to_string(c4) + ")");
  }
}

// ---------------------------------------------------------------------------
// Likelihood-ratio coefficients

namespace detail {

/// E[lambda^i nu^p] for p in {0, 1} under the coupling.
inline double latent_moment(const LatentCoupling& coupling, int i, int p) {
  if (p == 0) {
    if (i % 2 == 1) return 0.0;
    double m = 1.0;
    for (int k = i - 1; k > 0; k -= 2) m *= k;
    return m;
  }
  if (i % 2 == 0) return 0.0;
  // E[lambda^i sign(lambda)] = E|lambda|^i = 2^{i/2} Gamma((i+1)/2) / sqrt(pi)
  const double abs_moment = std::pow(2.0, 0.5 * i) * std::tgamma(0.5 * (i + 1)) / std::sqrt(std::numbers::pi);
  return coupling.match_probability() * abs_moment;
}

/// E[He_j(mu nu + s z)] / nu^{j mod 2} for Rademacher nu, z ~ N(0, 1): the Hermite
/// moment of a Gaussian with mean mu nu and variance s^2.
inline double shifted_hermite_moment(int j, double mu, double s) {
  const double c = 0.5 * (s * s - 1.0);
  double acc = 0.0;
  for (int m = 0; 2 * m <= j; ++m) {
    const double comb = factorial(j) / (factorial(m) * factorial(j - 2 * m));
    acc += comb * std::pow(mu, j - 2 * m) * std::pow(c, m);
  }
  return acc;
}

}  // namespace detail

/// Exact c^L_ij (orthonormal convention) for beta_m = 0 and orthogonal spikes.
///
/// Conditionally on (lambda, nu): y_u ~ N(sqrt(beta_u) lambda, 1) and
/// y_v ~ N(sqrt(beta_v / (1 + beta_v)) nu, 1 / (1 + beta_v)), independent.
inline double likelihood_coeff_exact(const McmParams& params, int i, int j) {
  check_degree(i);
  check_degree(j);
  if (params.beta_m != 0.0) throw InvalidParameter("likelihood coefficients assume beta_m = 0");
  if (i == 0 && j == 0) return 1.0;
  const double s = 1.0 / std::sqrt(1.0 + params.beta_v);
  const double mu = std::sqrt(params.beta_v) * s;
  const double v_part = detail::shifted_hermite_moment(j, mu, s);
  const double u_part = std::pow(params.beta_u, 0.5 * i) * detail::latent_moment(params.coupling, i, j % 2);
  return u_part * v_part / (hermite_norm(i) * hermite_norm(j));
}

struct CoeffEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  /// Set when the standard error exceeds the requested tolerance.
  std::optional<double> accuracy_warning;
};

/// Monte-Carlo table of E_plant[h_i(u . x) h_j(v . x)] for i + j <= max_degree, drawn
/// from full d-dimensional planted samples with freshly drawn orthogonal spikes.
struct LikelihoodTableMc {
  int max_degree = 0;
  Mat estimate;
  Mat standard_error;
};

inline LikelihoodTableMc likelihood_table_mc(const McmParams& params, int max_degree, std::int64_t n_mc,
                                             RngHandle& rng) {
  check_degree(max_degree);
  if (n_mc < 2) throw InvalidParameter("likelihood_table_mc: need at least two samples");
  if (params.beta_m != 0.0) throw InvalidParameter("likelihood coefficients assume beta_m = 0");
  RngHandle spike_rng = rng.derive(0, 1);
  const SpikeSet spikes = SpikeSet::orthogonal(params.d, spike_rng);
  const McmSampler sampler(params, spikes);
  RngHandle data_rng = rng.derive(0, 2);

  const int n = max_degree + 1;
  Mat sum = Mat::Zero(n, n);
  Mat sum_sq = Mat::Zero(n, n);
  std::vector<double> hu(n), hv(n);
  LabeledSample s;
  std::int64_t planted = 0;
  while (planted < n_mc) {
    sampler.draw(data_rng, s);
    if (s.y < 0.0) continue;
    ++planted;
    hermite_all(max_degree, spikes.u.dot(s.x), HermiteConvention::Normalized, hu.data());
    hermite_all(max_degree, spikes.v.dot(s.x), HermiteConvention::Normalized, hv.data());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; i + j < n; ++j) {
        const double val = hu[i] * hv[j];
        sum(i, j) += val;
        sum_sq(i, j) += val * val;
      }
    }
  }
  LikelihoodTableMc table{max_degree, Mat::Zero(n, n), Mat::Zero(n, n)};
  const double nn = static_cast<double>(n_mc);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; i + j < n; ++j) {
      const double mean = sum(i, j) / nn;
      const double var = std::max(0.0, sum_sq(i, j) / nn - mean * mean) * nn / (nn - 1.0);
      table.estimate(i, j) = mean;
      table.standard_error(i, j) = std::sqrt(var / nn);
    }
  }
  return table;
}

/// Monte-Carlo estimate of a single c^L_ij with its standard error. When `tolerance`
/// is given and the standard error exceeds it, the estimate carries a warning with the
/// achieved error.
inline CoeffEstimate likelihood_coeff(const McmParams& params, int i, int j, std::int64_t n_mc, RngHandle& rng,
                                      std::optional<double> tolerance = std::nullopt) {
  const LikelihoodTableMc table = likelihood_table_mc(params, i + j, n_mc, rng);
  CoeffEstimate out{table.estimate(i, j), table.standard_error(i, j), std::nullopt};
  if (i == 0 && j == 0) out = {1.0, 0.0, std::nullopt};
  if (tolerance && out.standard_error > *tolerance) out.accuracy_warning = out.standard_error;
  return out;
}

// ---------------------------------------------------------------------------
// Population loss

inline constexpr int kDefaultTruncation = 8;

/// Truncated double series c^L_ij, c^s_k, i + j <= K (orthonormal convention).
struct HermiteSeries {
  std::vector<double> c_sigma;
  Mat c_L;
  int truncation = kDefaultTruncation;
  HermiteConvention convention = HermiteConvention::Normalized;

  /// Closed-form likelihood coefficients and quadrature activation coefficients.
  static HermiteSeries exact(const McmParams& params, const ActivationSpec& sigma,
                             int truncation = kDefaultTruncation) {
    check_degree(truncation);
    HermiteSeries s;
    s.truncation = truncation;
    s.c_sigma = activation_coeffs(sigma, truncation);
    s.c_L = Mat::Zero(truncation + 1, truncation + 1);
    for (int i = 0; i <= truncation; ++i) {
      for (int j = 0; i + j <= truncation; ++j) s.c_L(i, j) = likelihood_coeff_exact(params, i, j);
    }
    return s;
  }

  /// Likelihood coefficients from a Monte-Carlo table (c^L_00 pinned to 1).
  static HermiteSeries from_table(const LikelihoodTableMc& table, const ActivationSpec& sigma) {
    HermiteSeries s;
    s.truncation = table.max_degree;
    s.c_sigma = activation_coeffs(sigma, table.max_degree);
    s.c_L = table.estimate;
    s.c_L(0, 0) = 1.0;
    return s;
  }
};

inline void check_series_domain(double alpha_u, double alpha_v) {
  if (!(std::abs(alpha_u) < 0.5 && std::abs(alpha_v) < 0.5)) {
    throw DomainError("population loss series needs |alpha_u|, |alpha_v| < 1/2");
  }
}

/// sqrt(binom(i + j, i)): weight of alpha_u^i alpha_v^j in h_{i+j}(alpha_u y_u + alpha_v y_v + ...).
inline double series_weight(int i, int j) { return std::sqrt(factorial(i + j) / (factorial(i) * factorial(j))); }

/// 1 + c^s_0 / 2 - (1/2) sum_{i+j<=K} sqrt(binom(i+j, i)) c^L_ij c^s_{i+j} alpha_u^i alpha_v^j.
inline double population_loss(const HermiteSeries& series, double alpha_u, double alpha_v) {
  check_series_domain(alpha_u, alpha_v);
  const int K = series.truncation;
  double acc = 0.0;
  double pu = 1.0;
  for (int i = 0; i <= K; ++i) {
    double pv = 1.0;
    for (int j = 0; i + j <= K; ++j) {
      acc += series_weight(i, j) * series.c_L(i, j) * series.c_sigma[i + j] * pu * pv;
      pv *= alpha_v;
    }
    pu *= alpha_u;
  }
  return 1.0 + 0.5 * series.c_sigma[0] - 0.5 * acc;
}

/// population_loss(a_u, a_v) - population_loss(0, 0), summed without the constant term so
/// that tiny increments do not cancel against 1.
inline double loss_increment(const HermiteSeries& series, double alpha_u, double alpha_v) {
  check_series_domain(alpha_u, alpha_v);
  const int K = series.truncation;
  double acc = 0.0;
  double pu = 1.0;
  for (int i = 0; i <= K; ++i) {
    double pv = 1.0;
    for (int j = 0; i + j <= K; ++j) {
      if (i + j > 0) acc += series_weight(i, j) * series.c_L(i, j) * series.c_sigma[i + j] * pu * pv;
      pv *= alpha_v;
    }
    pu *= alpha_u;
  }
  return -0.5 * acc;
}

struct OverlapGradient {
  double d_alpha_u = 0.0;
  double d_alpha_v = 0.0;
};

inline OverlapGradient population_gradient(const HermiteSeries& series, double alpha_u, double alpha_v) {
  check_series_domain(alpha_u, alpha_v);
  const int K = series.truncation;
  OverlapGradient g;
  for (int i = 0; i <= K; ++i) {
    for (int j = 0; i + j <= K; ++j) {
      const double c = series_weight(i, j) * series.c_L(i, j) * series.c_sigma[i + j];
      if (c == 0.0) continue;
      if (i > 0) g.d_alpha_u += c * i * std::pow(alpha_u, i - 1) * std::pow(alpha_v, j);
      if (j > 0) g.d_alpha_v += c * j * std::pow(alpha_u, i) * std::pow(alpha_v, j - 1);
    }
  }
  g.d_alpha_u *= -0.5;
  g.d_alpha_v *= -0.5;
  return g;
}

/// Coefficients of the search-phase normal form l = const - (c20 a_u^2 + c11 a_u a_v + c04 a_v^4).
struct SearchCoeffs {
  double c20 = 0.0;
  double c11 = 0.0;
  double c04 = 0.0;
};

/// Throws AssumptionViolation when the activation makes c20 or c04 negative, i.e. when
/// the covariance or cumulant direction would be repelled rather than attracted.
inline SearchCoeffs effective_search_coeffs(const HermiteSeries& series) {
  if (series.truncation < 4) throw InvalidParameter("effective_search_coeffs: truncation must be >= 4");
  SearchCoeffs c;
  c.c20 = 0.5 * series.c_L(2, 0) * series.c_sigma[2];
  c.c11 = 0.5 * std::numbers::sqrt2 * series.c_L(1, 1) * series.c_sigma[2];
  c.c04 = 0.5 * series.c_L(0, 4) * series.c_sigma[4];
  if (c.c20 < 0.0 || c.c04 < 0.0) {
    throw AssumptionViolation("search coefficients c20 = " + std::to_string(c.c20) + ", c04 = " +
                              std::to_string(c.c04) + " must be non-negative");
  }
  return c;
}

}  // namespace stairs
