#pragma once

// Mixed-cumulant data model.
//
// Class y = -1 is standard Gaussian. Class y = +1 ("planted") is
//
//   x = beta_m m + sqrt(beta_u) lambda u + S (sqrt(beta_v) nu v + z),
//   S = 1 - kappa v v^T,  kappa = beta_v / (1 + beta_v + sqrt(1 + beta_v)),
//
// so that S v = v / sqrt(1 + beta_v) and the cumulant spike is invisible in the
// covariance unless lambda and nu are correlated. Every operation stays O(d): S is
// applied through its rank-one structure and covariances are stored as identity plus
// low-rank terms in span(u, v).

#include <cmath>
#include <optional>
#include <string>

#include "stairs/errors.hpp"
#include "stairs/rng.hpp"
#include "stairs/sampling.hpp"

namespace stairs {

inline constexpr double kUnitTolerance = 1e-10;

struct SpikeSet {
  Vec m;
  Vec u;
  Vec v;

  Eigen::Index dim() const noexcept { return u.size(); }
  double overlap_uv() const { return u.dot(v); }

  bool orthogonal(double tol = kUnitTolerance) const {
    return std::abs(m.dot(u)) < tol && std::abs(m.dot(v)) < tol && std::abs(u.dot(v)) < tol;
  }

  void validate() const {
    if (m.size() != u.size() || v.size() != u.size()) {
      throw InvalidParameter("SpikeSet: spike dimensions differ");
    }
    for (const Vec* s : {&m, &u, &v}) {
      if (std::abs(s->norm() - 1.0) > kUnitTolerance) {
        throw InvalidParameter("SpikeSet: spikes must be unit vectors");
      }
    }
  }

  /// Three mutually orthogonal spikes, uniformly oriented.
  static SpikeSet orthogonal(Eigen::Index d, RngHandle& rng) {
    if (d < 3) throw InvalidDimension("SpikeSet::orthogonal needs d >= 3");
    Mat basis(d, 3);
    for (int k = 0; k < 3; ++k) basis.col(k) = sample_normal_vector(d, rng);
    Eigen::HouseholderQR<Mat> qr(basis);
    Mat q = qr.householderQ() * Mat::Identity(d, 3);
    // Fix the sign ambiguity of the QR factors so the draw stays rotation invariant.
    for (int k = 0; k < 3; ++k) {
      if (q.col(k).dot(basis.col(k)) < 0.0) q.col(k) *= -1.0;
    }
    return SpikeSet{q.col(0), q.col(1), q.col(2)};
  }

  /// Spikes with u . v = rho and m orthogonal to both.
  static SpikeSet with_overlap(Eigen::Index d, double rho, RngHandle& rng) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw InvalidParameter("SpikeSet: overlap must lie in [-1, 1]");
    SpikeSet base = orthogonal(d, rng);
    Vec v = rho * base.u + std::sqrt(1.0 - rho * rho) * base.v;
    return SpikeSet{base.m, base.u, v / v.norm()};
  }
};

struct McmParams {
  Eigen::Index d = 64;
  double beta_m = 0.0;
  double beta_u = 0.0;
  double beta_v = 0.0;
  LatentCoupling coupling = LatentCoupling::independent();

  void validate() const {
    if (d < 2) throw InvalidDimension("McmParams: d must be >= 2");
    if (!(beta_m >= 0.0 && beta_u >= 0.0 && beta_v >= 0.0)) {
      throw InvalidParameter("McmParams: signal-to-noise ratios must be non-negative");
    }
  }
};

struct LabeledSample {
  Vec x;
  double y = -1.0;
  std::optional<LatentPair> latents;
};

/// Which parts of the planted class a test distribution keeps.
enum class CensorMode { Full, MeanOnly, MeanCov, GaussianEquivalent };

inline std::string to_string(CensorMode mode) {
  switch (mode) {
    case CensorMode::Full: return "full";
    case CensorMode::MeanOnly: return "mean_only";
    case CensorMode::MeanCov: return "mean_cov";
    case CensorMode::GaussianEquivalent: return "gauss_equiv";
  }
  return "unknown";
}

enum class SpikeKind { CovarianceOnly, CumulantOnly };

inline double whitening_coefficient(double beta_v) {
  if (!(beta_v >= 0.0)) throw InvalidParameter("whitening: beta_v must be non-negative");
  return beta_v / (1.0 + beta_v + std::sqrt(1.0 + beta_v));
}

/// S x for the whitening matrix S = 1 - kappa v v^T.
inline Vec whitening_apply(double beta_v, const Vec& v, const Vec& x) {
  const double kappa = whitening_coefficient(beta_v);
  if (v.size() != x.size()) throw InvalidParameter("whitening_apply: dimension mismatch");
  return x - (kappa * v.dot(x)) * v;
}

/// Symmetric operator 1 + c_uu u u^T + c_uv (u v^T + v u^T) + c_vv v v^T.
struct LowRankCovariance {
  Vec u;
  Vec v;
  double c_uu = 0.0;
  double c_uv = 0.0;
  double c_vv = 0.0;

  Eigen::Index dim() const noexcept { return u.size(); }

  Vec apply(const Vec& x) const {
    const double xu = u.dot(x);
    const double xv = v.dot(x);
    return x + (c_uu * xu + c_uv * xv) * u + (c_uv * xu + c_vv * xv) * v;
  }

  double quadratic(const Vec& a, const Vec& b) const { return a.dot(apply(b)); }

  Mat dense() const {
    Mat c = Mat::Identity(dim(), dim());
    c += c_uu * u * u.transpose() + c_vv * v * v.transpose();
    c += c_uv * (u * v.transpose() + v * u.transpose());
    return c;
  }

  /// Leading eigenvector by power iteration on the factored form.
  Vec leading_eigenvector(int iterations = 500) const {
    Vec w = u + v;
    if (w.norm() == 0.0) w = u;
    w.normalize();
    for (int it = 0; it < iterations; ++it) {
      Vec next = apply(w);
      next.normalize();
      if ((next - w).norm() < 1e-14) return next;
      w = next;
    }
    return w;
  }
};

/// Draws from the mixed-cumulant model. Holds the per-parameter constants so that a
/// draw costs O(d) with no allocation when the output buffer is reused.
///
/// Draw layout (identical across censor modes, which gives common random numbers
/// between censored test sets built from the same stream): label, lambda, nu, z.
class McmSampler {
 public:
  McmSampler(McmParams params, SpikeSet spikes) : params_(std::move(params)), spikes_(std::move(spikes)) {
    params_.validate();
    spikes_.validate();
    if (spikes_.dim() != params_.d) throw InvalidParameter("McmSampler: spike dimension does not match d");
    kappa_ = whitening_coefficient(params_.beta_v);
    prepare_gaussian_equivalent();
  }

  const McmParams& params() const noexcept { return params_; }
  const SpikeSet& spikes() const noexcept { return spikes_; }

  void draw(RngHandle& rng, LabeledSample& out, bool keep_latents = false,
            CensorMode mode = CensorMode::Full) const {
    const Eigen::Index d = params_.d;
    out.x.resize(d);
    out.y = rng.rademacher();
    const LatentPair latents = sample_latent_pair(params_.coupling, rng);
    fill_normal(out.x, rng);
    out.latents.reset();
    if (out.y < 0.0) return;
    if (keep_latents) out.latents = latents;

    switch (mode) {
      case CensorMode::Full:
        plant(out.x, latents, params_.beta_m, params_.beta_u, kappa_, std::sqrt(params_.beta_v));
        break;
      case CensorMode::MeanOnly:
        plant(out.x, latents, params_.beta_m, 0.0, 0.0, 0.0);
        break;
      case CensorMode::MeanCov:
        plant(out.x, latents, params_.beta_m, params_.beta_u, 0.0, 0.0);
        break;
      case CensorMode::GaussianEquivalent:
        plant_gaussian_equivalent(out.x);
        break;
    }
  }

  LabeledSample draw(RngHandle& rng, bool keep_latents = false, CensorMode mode = CensorMode::Full) const {
    LabeledSample s;
    draw(rng, s, keep_latents, mode);
    return s;
  }

  /// Covariance of the planted class: 1 + beta_u u u^T + sqrt(beta_u beta_v / (1 + beta_v)) E[lambda nu] (u v^T + v u^T).
  LowRankCovariance planted_covariance() const {
    if (!spikes_.orthogonal()) throw InvalidParameter("planted_covariance: spikes must be orthogonal");
    LowRankCovariance c{spikes_.u, spikes_.v};
    c.c_uu = params_.beta_u;
    c.c_uv = std::sqrt(params_.beta_u * params_.beta_v / (1.0 + params_.beta_v)) *
             params_.coupling.latent_correlation();
    return c;
  }

 private:
  // x holds z on entry. sqrt_beta_v is sqrt(beta_v), or 0 to drop the cumulant spike.
  void plant(Vec& x, const LatentPair& lat, double beta_m, double beta_u, double kappa, double sqrt_beta_v) const {
    const double zv = kappa != 0.0 ? spikes_.v.dot(x) : 0.0;
    if (beta_m != 0.0) x.noalias() += beta_m * spikes_.m;
    if (beta_u != 0.0) x.noalias() += (std::sqrt(beta_u) * lat.lambda) * spikes_.u;
    // S (sqrt(beta_v) nu v + z) = z + (sqrt(beta_v) nu (1 - kappa) - kappa (v . z)) v
    const double coef_v = sqrt_beta_v * lat.nu * (1.0 - kappa) - kappa * zv;
    if (coef_v != 0.0) x.noalias() += coef_v * spikes_.v;
  }

  void plant_gaussian_equivalent(Vec& x) const {
    if (!ge_ready_) throw InvalidParameter("gaussian equivalent: spikes must be orthogonal");
    const double zu = spikes_.u.dot(x);
    const double zv = spikes_.v.dot(x);
    const double du = (ge_l11_ - 1.0) * zu;
    const double dv = ge_l21_ * zu + (ge_l22_ - 1.0) * zv;
    x.noalias() += du * spikes_.u + dv * spikes_.v;
    if (params_.beta_m != 0.0) x.noalias() += params_.beta_m * spikes_.m;
  }

  // Cholesky factor of the 2x2 block [[1 + c_uu, c_uv], [c_uv, 1]] in the orthonormal basis (u, v).
  void prepare_gaussian_equivalent() {
    if (!spikes_.orthogonal()) return;
    const LowRankCovariance cov = planted_covariance();
    ge_l11_ = std::sqrt(1.0 + cov.c_uu);
    ge_l21_ = cov.c_uv / ge_l11_;
    const double l22_sq = 1.0 - ge_l21_ * ge_l21_;
    if (!(l22_sq > 0.0)) throw InvalidParameter("gaussian equivalent: planted covariance is not positive definite");
    ge_l22_ = std::sqrt(l22_sq);
    ge_ready_ = true;
  }

  McmParams params_;
  SpikeSet spikes_;
  double kappa_ = 0.0;
  bool ge_ready_ = false;
  double ge_l11_ = 1.0;
  double ge_l21_ = 0.0;
  double ge_l22_ = 1.0;
};

inline LabeledSample sample_mcm(const McmParams& params, const SpikeSet& spikes, RngHandle& rng,
                                bool keep_latents = false) {
  return McmSampler(params, spikes).draw(rng, keep_latents);
}

inline LabeledSample sample_censored(const McmParams& params, const SpikeSet& spikes, CensorMode mode,
                                     RngHandle& rng) {
  return McmSampler(params, spikes).draw(rng, false, mode);
}

inline LowRankCovariance planted_covariance(const McmParams& params, const SpikeSet& spikes) {
  return McmSampler(params, spikes).planted_covariance();
}

/// Parameters of the two single-spike models: covariance spike only (x = sqrt(beta) lambda u + z)
/// or cumulant spike only (x = S (sqrt(beta) nu v + z)).
inline McmParams single_spike_params(SpikeKind kind, double beta, Eigen::Index d) {
  if (!(beta > 0.0)) throw InvalidParameter("single_spike_params: beta must be positive");
  McmParams p;
  p.d = d;
  if (kind == SpikeKind::CovarianceOnly) {
    p.beta_u = beta;
  } else {
    p.beta_v = beta;
  }
  p.validate();
  return p;
}

}  // namespace stairs
