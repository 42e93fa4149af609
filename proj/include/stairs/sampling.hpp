#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "stairs/errors.hpp"
#include "stairs/rng.hpp"

namespace stairs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline void fill_normal(Eigen::Ref<Vec> out, RngHandle& rng) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = rng.normal();
}

inline Vec sample_normal_vector(Eigen::Index d, RngHandle& rng) {
  Vec z(d);
  fill_normal(z, rng);
  return z;
}

inline Vec sample_unit_sphere(Eigen::Index d, RngHandle& rng) {
  if (d < 1) throw InvalidDimension("sample_unit_sphere: dimension must be >= 1");
  for (;;) {
    Vec w = sample_normal_vector(d, rng);
    const double norm = w.norm();
    if (norm > 0.0) return w / norm;
  }
}

/// How the covariance latent lambda and the cumulant latent nu are coupled.
///
/// Independent: nu is an independent Rademacher sign.
/// SignMatched: nu = sign(lambda).
/// PartialSign(q): nu = sign(lambda) with probability q, otherwise an independent sign.
class LatentCoupling {
 public:
  enum class Mode { Independent, SignMatched, PartialSign };

  static LatentCoupling independent() { return LatentCoupling(Mode::Independent, 0.0); }
  static LatentCoupling sign_matched() { return LatentCoupling(Mode::SignMatched, 1.0); }
  static LatentCoupling partial_sign(double q) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw InvalidParameter("PartialSign coupling needs q in [0, 1], got " + std::to_string(q));
    }
    return LatentCoupling(Mode::PartialSign, q);
  }

  Mode mode() const noexcept { return mode_; }

  /// Probability that nu equals sign(lambda) through the coupling.
  double match_probability() const noexcept { return q_; }

  /// Population E[lambda nu] = q sqrt(2/pi).
  double latent_correlation() const noexcept { return q_ * std::sqrt(2.0 / std::numbers::pi); }

  std::string name() const {
    switch (mode_) {
      case Mode::Independent: return "independent";
      case Mode::SignMatched: return "sign_matched";
      case Mode::PartialSign: return "partial_sign(" + std::to_string(q_) + ")";
    }
    return "unknown";
  }

  friend bool operator==(const LatentCoupling&, const LatentCoupling&) = default;

 private:
  LatentCoupling(Mode mode, double q) : mode_(mode), q_(q) {}
  Mode mode_;
  double q_;
};

struct LatentPair {
  double lambda;
  double nu;
};

inline LatentPair sample_latent_pair(const LatentCoupling& coupling, RngHandle& rng) {
  const double lambda = rng.normal();
  const double sign_lambda = lambda < 0.0 ? -1.0 : 1.0;
  switch (coupling.mode()) {
    case LatentCoupling::Mode::Independent:
      return {lambda, rng.rademacher()};
    case LatentCoupling::Mode::SignMatched:
      return {lambda, sign_lambda};
    case LatentCoupling::Mode::PartialSign: {
      // Both draws are always consumed so the stream layout does not depend on q.
      const bool matched = rng.bernoulli(coupling.match_probability());
      const double free_sign = rng.rademacher();
      return {lambda, matched ? sign_lambda : free_sign};
    }
  }
  return {lambda, sign_lambda};
}

}  // namespace stairs
