#ifndef GEOSYNTH_MCMC_HPP
#define GEOSYNTH_MCMC_HPP

// Gibbs-within-Metropolis sampler for the spatial regression
//
//   Y | beta, w, tau2 ~ N(X beta + A w, tau2 I)
//   w | sigma2, phi   ~ N(0, sigma2 R(phi)),  R_ij = exp(-phi ||s_i - s_j||)
//
// A = I gives the unrestricted model; a risk profile's diagonal gives the
// restricted (differentially smoothed) one. Each sweep draws (beta, w) as a
// block (beta from its marginal with w integrated out, then w | beta), then
// sigma2, tau2 and, unless phi is held fixed, phi by a random walk on log(phi).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/covariance.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/random.hpp"
#include "geosynth/risk.hpp"

namespace geosynth {

struct InvGammaPrior {
  double shape = 2.0;
  double rate = 1.0;
};

struct Priors {
  Eigen::VectorXd beta_mean;
  Eigen::MatrixXd beta_prec;  // zero matrix = flat prior
  InvGammaPrior sigma2{0.01, 0.01};
  InvGammaPrior tau2{0.01, 0.01};
  double phi_lower = 0.0;
  double phi_upper = 0.0;

  /// Flat beta, IG(0.01, 0.01) on both variances and a uniform phi prior
  /// scaled to the data extent: correlation at the largest distance between
  /// ~0.955 (lower bound) and 0.01 reached at 2% of that distance (upper).
  static Priors defaults(Eigen::Index p, const DistanceMatrix& d) {
    Priors pr;
    pr.beta_mean = Eigen::VectorXd::Zero(p);
    pr.beta_prec = Eigen::MatrixXd::Zero(p, p);
    const double extent = d.max();
    require(extent > 0.0, ErrorCode::kValidation, "all locations coincide; phi prior is undefined");
    const double log100 = std::log(100.0);
    pr.phi_lower = 0.01 * log100 / extent;
    pr.phi_upper = 50.0 * log100 / extent;
    return pr;
  }

  void validate(Eigen::Index p) const {
    require(beta_mean.size() == p && beta_prec.rows() == p && beta_prec.cols() == p,
            ErrorCode::kDimensionMismatch, "beta prior does not match the number of covariates");
    require(sigma2.shape > 0 && sigma2.rate > 0 && tau2.shape > 0 && tau2.rate > 0, ErrorCode::kDomain,
            "inverse-gamma shapes and rates must be positive");
    require(phi_lower > 0.0 && phi_lower < phi_upper, ErrorCode::kDomain,
            "phi prior range must satisfy 0 < lower < upper");
  }
};

struct PosteriorSample {
  Eigen::VectorXd beta;
  Eigen::VectorXd w;
  double tau2 = 1.0;
  double sigma2 = 1.0;
  double phi = 1.0;
};

struct ChainConfig {
  int burn_in = 10000;
  int iterations = 50000;
  int thin = 100;
  std::uint64_t seed = 1;
  /// Random-walk SD on log(phi); tuned during burn-in when adapt_proposal is set.
  double phi_proposal_sd = 0.1;
  bool adapt_proposal = true;
  double target_acceptance = 0.4;
  /// Holds tau2 at a known value instead of sampling it.
  std::optional<double> fixed_tau2;

  int retained() const { return iterations / thin; }

  void validate() const {
    require(burn_in >= 0 && iterations >= 1 && thin >= 1, ErrorCode::kValidation,
            "chain config needs burn_in >= 0, iterations >= 1, thin >= 1");
    require(iterations >= thin, ErrorCode::kValidation, "iterations must be at least thin");
    require(phi_proposal_sd >= 0.0, ErrorCode::kValidation, "proposal SD must be nonnegative");
    require(target_acceptance > 0.0 && target_acceptance < 1.0, ErrorCode::kValidation,
            "target acceptance must lie in (0, 1)");
    require(!fixed_tau2 || *fixed_tau2 > 0.0, ErrorCode::kValidation, "fixed tau2 must be positive");
  }
};

enum class ModelKind { kUnrestricted, kRestricted, kSuppressed };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kUnrestricted: return "unrestricted";
    case ModelKind::kRestricted: return "restricted";
    case ModelKind::kSuppressed: return "suppressed";
  }
  return "unknown";
}

struct Chain {
  std::vector<PosteriorSample> samples;
  ChainConfig config;
  ModelKind kind = ModelKind::kUnrestricted;
  double acceptance_rate_phi = 0.0;
  double final_proposal_sd = 0.0;
  std::optional<double> phi_fixed;
  Eigen::VectorXd a_diag;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// ---------------------------------------------------------------------------
// w | rest

/// Moments of w | rest in data-space form, precision A Sigma_Y^-1 A + Sigma_W^-1,
/// computed as mean = Sigma_W A C^-1 r and cov = Sigma_W - Sigma_W A C^-1 A Sigma_W
/// with C = A Sigma_W A + tau2 I. `resid` is Y - X beta.
inline GaussianMoments w_full_conditional(const CovMatrix& corr, const Eigen::VectorXd& a_diag,
                                          double sigma2, double tau2, const Eigen::VectorXd& resid) {
  const Eigen::MatrixXd sw = sigma2 * corr.factored_matrix();
  Eigen::MatrixXd c = a_diag.asDiagonal() * sw * a_diag.asDiagonal();
  c.diagonal().array() += tau2;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  require(llt.info() == Eigen::Success, ErrorCode::kNumerical, "w conditional: data covariance not SPD");
  const Eigen::MatrixXd gain = sw * a_diag.asDiagonal() * llt.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
  GaussianMoments m;
  m.mean = gain * resid;
  m.cov = sw - gain * a_diag.asDiagonal() * sw;
  return m;
}

/// Data covariance C = sigma2 A R A + tau2 I, factored.
inline Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> factor_data_covariance(const CovMatrix& corr,
                                                                       const Eigen::VectorXd& a_diag, double sigma2,
                                                                       double tau2) {
  const Eigen::MatrixXd& r = corr.factored_matrix();
  Eigen::MatrixXd c = (a_diag.array() == 1.0).all() ? Eigen::MatrixXd(sigma2 * r)
                                                      : Eigen::MatrixXd(sigma2 * (a_diag * a_diag.transpose()).cwiseProduct(r));
  c.diagonal().array() += tau2;
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(c);
  require(llt.info() == Eigen::Success, ErrorCode::kNumerical, "w draw: data covariance not SPD");
  return llt;
}

/// Exact draw of w | rest by prior perturbation: w0 = sigma L z_prior,
/// e0 = tau z_noise, w = w0 + sigma2 R A C^-1 (resid - A w0 - e0).
inline Eigen::VectorXd draw_w_direct(const CovMatrix& corr, const Eigen::VectorXd& a_diag, double sigma2,
                                     double tau2, const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower>& c_llt,
                                     const Eigen::VectorXd& resid, const Eigen::VectorXd& z_prior,
                                     const Eigen::VectorXd& z_noise) {
  Eigen::VectorXd w0 = corr.lower() * z_prior;
  w0 *= std::sqrt(sigma2);
  const Eigen::VectorXd v = resid - a_diag.cwiseProduct(w0) - std::sqrt(tau2) * z_noise;
  const Eigen::VectorXd u = a_diag.cwiseProduct(c_llt.solve(v));
  return w0 + sigma2 * (corr.factored_matrix() * u);
}

/// As above, factoring C itself. Costs one O(N^3) factorization.
inline Eigen::VectorXd draw_w_direct(const CovMatrix& corr, const Eigen::VectorXd& a_diag, double sigma2,
                                     double tau2, const Eigen::VectorXd& resid, const Eigen::VectorXd& z_prior,
                                     const Eigen::VectorXd& z_noise) {
  return draw_w_direct(corr, a_diag, sigma2, tau2, factor_data_covariance(corr, a_diag, sigma2, tau2), resid,
                       z_prior, z_noise);
}

/// Draws of w | rest for a fixed correlation matrix and fixed A. One spectral
/// decomposition A R A = V diag(lambda) V' up front; then C^-1 is diagonal in V
/// for any (sigma2, tau2) and each draw is O(N^2).
class FixedRangeWSampler {
 public:
  FixedRangeWSampler(const CovMatrix& corr, Eigen::VectorXd a_diag)
      : a_(std::move(a_diag)), lower_(corr.lower()) {
    const Eigen::MatrixXd& r = corr.factored_matrix();
    require(a_.size() == r.rows(), ErrorCode::kDimensionMismatch, "A diagonal does not match correlation");
    const Eigen::MatrixXd b = (a_ * a_.transpose()).cwiseProduct(r);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    require(es.info() == Eigen::Success, ErrorCode::kNumerical, "eigendecomposition of A R A failed");
    lambda_ = es.eigenvalues().cwiseMax(0.0);
    basis_ = es.eigenvectors();
    gain_ = r * a_.asDiagonal() * basis_;
  }

  Eigen::VectorXd draw(double sigma2, double tau2, const Eigen::VectorXd& resid, const Eigen::VectorXd& z_prior,
                       const Eigen::VectorXd& z_noise) const {
    Eigen::VectorXd w0 = lower_.triangularView<Eigen::Lower>() * z_prior;
    w0 *= std::sqrt(sigma2);
    const Eigen::VectorXd v = resid - a_.cwiseProduct(w0) - std::sqrt(tau2) * z_noise;
    const Eigen::VectorXd u =
        (basis_.transpose() * v).cwiseQuotient((sigma2 * lambda_.array() + tau2).matrix());
    return w0 + sigma2 * (gain_ * u);
  }

  /// V' m, for caching V' X and V' Y.
  Eigen::MatrixXd rotate(const Eigen::MatrixXd& m) const { return basis_.transpose() * m; }

  /// Diagonal of V' C^-1 V.
  Eigen::VectorXd inverse_spectrum(double sigma2, double tau2) const {
    return (sigma2 * lambda_.array() + tau2).inverse().matrix();
  }

 private:
  Eigen::VectorXd a_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd gain_;
};

// ---------------------------------------------------------------------------
// beta, sigma2, tau2 | rest

/// beta | rest ~ N(V [X' (Y - A w) / tau2 + P0 m0], V), V = (X'X / tau2 + P0)^-1.
inline GaussianMoments beta_full_conditional(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_minus_aw,
                                             double tau2, const Priors& priors) {
  Eigen::MatrixXd prec = x.transpose() * x / tau2 + priors.beta_prec;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  require(llt.info() == Eigen::Success, ErrorCode::kNumerical,
          "beta conditional precision is singular (rank-deficient design with flat prior)");
  const Eigen::VectorXd rhs = x.transpose() * y_minus_aw / tau2 + priors.beta_prec * priors.beta_mean;
  GaussianMoments m;
  m.mean = llt.solve(rhs);
  m.cov = llt.solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
  return m;
}

/// beta | sigma2, tau2, phi, Y with w integrated out, where Y ~ N(X beta, C):
/// precision X' C^-1 X + P0, right-hand side X' C^-1 Y + P0 m0.
struct CanonicalGaussian {
  Eigen::MatrixXd prec;
  Eigen::VectorXd rhs;
};

inline CanonicalGaussian beta_marginal(const Eigen::MatrixXd& xt_cinv_x, const Eigen::VectorXd& xt_cinv_y,
                                       const Priors& priors) {
  return {xt_cinv_x + priors.beta_prec, xt_cinv_y + priors.beta_prec * priors.beta_mean};
}

inline Eigen::LLT<Eigen::MatrixXd> factor_beta_precision(const Eigen::MatrixXd& prec) {
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  require(llt.info() == Eigen::Success, ErrorCode::kNumerical,
          "beta precision is singular (rank-deficient design with flat prior)");
  return llt;
}

inline GaussianMoments moments_of(const CanonicalGaussian& g) {
  const auto llt = factor_beta_precision(g.prec);
  return {llt.solve(g.rhs), llt.solve(Eigen::MatrixXd::Identity(g.prec.rows(), g.prec.cols()))};
}

inline Eigen::VectorXd draw_canonical(const CanonicalGaussian& g, Rng& rng) {
  const auto llt = factor_beta_precision(g.prec);
  // prec = L L'  =>  L'^-1 z has covariance prec^-1.
  const Eigen::VectorXd z = standard_normal_vector(rng, g.rhs.size());
  return llt.solve(g.rhs) + llt.matrixU().solve(z);
}

/// sigma2 | w, phi ~ IG(a + N/2, b + w' R^-1 w / 2).
inline InvGammaPrior sigma2_full_conditional(const CovMatrix& corr, const Eigen::VectorXd& w,
                                             const InvGammaPrior& prior) {
  return {prior.shape + 0.5 * static_cast<double>(w.size()), prior.rate + 0.5 * corr.quadratic_form(w)};
}

/// tau2 | rest ~ IG(a + N/2, b + ||Y - X beta - A w||^2 / 2).
inline InvGammaPrior tau2_full_conditional(const Eigen::VectorXd& residual, const InvGammaPrior& prior) {
  return {prior.shape + 0.5 * static_cast<double>(residual.size()),
          prior.rate + 0.5 * residual.squaredNorm()};
}

inline double draw_inverse_gamma(const InvGammaPrior& p, Rng& rng) {
  return inverse_gamma(rng, p.shape, p.rate);
}

// ---------------------------------------------------------------------------
// phi | w, sigma2

/// log N(w | 0, sigma2 R(phi)); the uniform prior contributes a constant.
inline double phi_log_target(const CovMatrix& corr, const Eigen::VectorXd& w, double sigma2) {
  return gaussian_logpdf_scaled(corr, sigma2, w);
}

struct PhiStep {
  double phi = 0.0;
  bool accepted = false;
  double log_ratio = 0.0;
  std::optional<CovMatrix> corr;  // factor at the proposal, set when accepted
};

/// Random walk on log(phi). The acceptance ratio includes the Jacobian
/// phi'/phi of the log transform; proposals outside the prior range, or
/// whose correlation matrix cannot be factored, are rejected.
inline PhiStep metropolis_step_phi(const DistanceMatrix& d, const Eigen::VectorXd& w, double sigma2, double phi,
                                   const CovMatrix& corr, const Priors& priors, double proposal_sd, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const double proposal = phi * std::exp(proposal_sd * normal(rng));
  const double log_u = std::log(unif(rng));
  PhiStep step;
  step.phi = phi;
  if (!(proposal > priors.phi_lower && proposal < priors.phi_upper)) {
    step.log_ratio = -std::numeric_limits<double>::infinity();
    return step;
  }
  std::optional<CovMatrix> candidate;
  try {
    candidate = build_correlation(proposal, d, JitterPolicy{.warn = false});
  } catch (const Error&) {
    step.log_ratio = -std::numeric_limits<double>::infinity();
    return step;
  }
  step.log_ratio = phi_log_target(*candidate, w, sigma2) - phi_log_target(corr, w, sigma2) +
                   std::log(proposal) - std::log(phi);
  if (log_u < step.log_ratio) {
    step.phi = proposal;
    step.accepted = true;
    step.corr = std::move(candidate);
  }
  return step;
}

// ---------------------------------------------------------------------------
// Chains

/// OLS beta, w = 0, residual variance split evenly between sigma2 and tau2,
/// phi at the value whose correlation drops to 0.05 at a fifth of the extent.
inline PosteriorSample default_init(const GeoDataset& d, const DistanceMatrix& dist, const Priors& priors) {
  PosteriorSample s;
  const Eigen::MatrixXd& x = d.covariates();
  s.beta = x.colPivHouseholderQr().solve(d.responses());
  const Eigen::VectorXd r = d.responses() - x * s.beta;
  const double v = std::max(r.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, d.size() - x.cols())),
                            1e-6);
  s.w = Eigen::VectorXd::Zero(d.size());
  s.sigma2 = 0.5 * v;
  s.tau2 = 0.5 * v;
  const double guess = -std::log(0.05) / (0.2 * dist.max());
  s.phi = std::clamp(guess, priors.phi_lower * 1.01, priors.phi_upper * 0.99);
  return s;
}

namespace detail {

inline void check_finite(const PosteriorSample& s, long iteration) {
  if (!(s.w.allFinite() && s.beta.allFinite() && std::isfinite(s.sigma2) && std::isfinite(s.tau2) &&
        std::isfinite(s.phi))) {
    fail(ErrorCode::kNumerical, "non-finite state at iteration " + std::to_string(iteration));
  }
}

}  // namespace detail

/// Runs one chain. `phi_fixed` holds phi constant (no Metropolis step) and
/// switches the w update to the fixed-range spectral sampler.
inline Chain run_chain(const GeoDataset& d, const DistanceMatrix& dist, const Priors& priors,
                       const Eigen::VectorXd& a_diag, std::optional<double> phi_fixed, PosteriorSample state,
                       const ChainConfig& config, ModelKind kind) {
  config.validate();
  const Eigen::Index n = d.size();
  const Eigen::Index p = d.num_covariates();
  priors.validate(p);
  require(p < n, ErrorCode::kValidation, "need more records than covariates");
  require(dist.size() == n && a_diag.size() == n, ErrorCode::kDimensionMismatch,
          "distance matrix / risk profile do not match the dataset");
  require(state.beta.size() == p && state.w.size() == n, ErrorCode::kDimensionMismatch,
          "initial state does not match the dataset");
  if (n < 10) warn("fitting " + std::to_string(n) + " records; inference is desk-scale only");
  if (phi_fixed) {
    require(*phi_fixed > 0.0, ErrorCode::kDomain, "fixed phi must be positive");
    state.phi = *phi_fixed;
  }
  state.phi = std::clamp(state.phi, priors.phi_lower, priors.phi_upper);
  if (config.fixed_tau2) state.tau2 = *config.fixed_tau2;

  const Eigen::MatrixXd& x = d.covariates();
  const Eigen::VectorXd& y = d.responses();
  Rng rng = make_rng(config.seed, Stream::kChain);
  std::normal_distribution<double> normal;

  CovMatrix corr = build_correlation(state.phi, dist);
  std::optional<FixedRangeWSampler> fixed_sampler;
  Eigen::MatrixXd rot_x;
  Eigen::VectorXd rot_y;
  if (phi_fixed) {
    fixed_sampler.emplace(corr, a_diag);
    rot_x = fixed_sampler->rotate(x);
    rot_y = fixed_sampler->rotate(y);
  }

  Chain chain;
  chain.config = config;
  chain.kind = kind;
  chain.phi_fixed = phi_fixed;
  chain.a_diag = a_diag;
  chain.samples.reserve(static_cast<std::size_t>(config.retained()));

  double proposal_sd = config.phi_proposal_sd;
  int batch_accepts = 0;
  int batch_index = 0;
  long accepted_after_burn = 0;
  constexpr int kBatch = 50;
  const long total = static_cast<long>(config.burn_in) + config.iterations;

  for (long it = 1; it <= total; ++it) {
    // (beta, w) jointly: beta with w integrated out, then w | beta.
    const Eigen::VectorXd z_prior = standard_normal_vector(rng, n);
    const Eigen::VectorXd z_noise = standard_normal_vector(rng, n);
    if (fixed_sampler) {
      const Eigen::VectorXd dinv = fixed_sampler->inverse_spectrum(state.sigma2, state.tau2);
      state.beta = draw_canonical(
          beta_marginal(rot_x.transpose() * dinv.asDiagonal() * rot_x, rot_x.transpose() * dinv.cwiseProduct(rot_y),
                        priors),
          rng);
      state.w = fixed_sampler->draw(state.sigma2, state.tau2, y - x * state.beta, z_prior, z_noise);
    } else {
      const auto c_llt = factor_data_covariance(corr, a_diag, state.sigma2, state.tau2);
      const Eigen::MatrixXd cinv_x = c_llt.solve(x);
      state.beta = draw_canonical(beta_marginal(x.transpose() * cinv_x, cinv_x.transpose() * y, priors), rng);
      state.w = draw_w_direct(corr, a_diag, state.sigma2, state.tau2, c_llt, y - x * state.beta, z_prior, z_noise);
    }
    const Eigen::VectorXd aw = a_diag.cwiseProduct(state.w);
    state.sigma2 = draw_inverse_gamma(sigma2_full_conditional(corr, state.w, priors.sigma2), rng);
    if (!config.fixed_tau2) {
      state.tau2 = draw_inverse_gamma(tau2_full_conditional(y - x * state.beta - aw, priors.tau2), rng);
    }
    if (!phi_fixed) {
      PhiStep step = metropolis_step_phi(dist, state.w, state.sigma2, state.phi, corr, priors, proposal_sd, rng);
      if (step.accepted) {
        state.phi = step.phi;
        corr = std::move(*step.corr);
      }
      if (it <= config.burn_in) {
        batch_accepts += step.accepted ? 1 : 0;
        if (config.adapt_proposal && it % kBatch == 0) {
          ++batch_index;
          const double rate = static_cast<double>(batch_accepts) / kBatch;
          proposal_sd *= std::exp((rate - config.target_acceptance) / std::sqrt(static_cast<double>(batch_index)));
          proposal_sd = std::clamp(proposal_sd, 1e-4, 5.0);
          batch_accepts = 0;
        }
      } else if (step.accepted) {
        ++accepted_after_burn;
      }
    }
    detail::check_finite(state, it);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) chain.samples.push_back(state);
  }
  chain.acceptance_rate_phi =
      phi_fixed ? 0.0 : static_cast<double>(accepted_after_burn) / static_cast<double>(config.iterations);
  chain.final_proposal_sd = proposal_sd;
  return chain;
}

/// Unrestricted model (A = I). With `phi_fixed` the chain shares the fixed-range
/// kernel with fit_restricted, so gamma = 0 reproduces it bit for bit.
inline Chain fit_unrestricted(const GeoDataset& d, const Priors& priors, const ChainConfig& config,
                              std::optional<double> phi_fixed = std::nullopt,
                              std::optional<PosteriorSample> init = std::nullopt,
                              ModelKind kind = ModelKind::kUnrestricted) {
  const DistanceMatrix dist = pairwise_distances(d);
  PosteriorSample start = init ? *init : default_init(d, dist, priors);
  return run_chain(d, dist, priors, Eigen::VectorXd::Ones(d.size()), phi_fixed, std::move(start), config, kind);
}

/// Restricted model: likelihood mean X beta + A w with phi held at `phi_fixed`.
/// Coordinates with A_ii = 0 receive draws from the conditional prior
/// w_i | w_(i), as the data carry no information about them.
inline Chain fit_restricted(const GeoDataset& d, const Priors& priors, const RiskProfile& profile, double phi_fixed,
                            const PosteriorSample& init, const ChainConfig& config) {
  require(profile.size() == d.size(), ErrorCode::kDimensionMismatch, "risk profile does not match dataset");
  const DistanceMatrix dist = pairwise_distances(d);
  return run_chain(d, dist, priors, profile.a_diag, phi_fixed, init, config, ModelKind::kRestricted);
}

// ---------------------------------------------------------------------------
// Summaries

/// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::kValidation, "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, ErrorCode::kDomain, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<std::string> parameter_names(const Chain& chain) {
  require(!chain.empty(), ErrorCode::kValidation, "empty chain");
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < chain.samples.front().beta.size(); ++k) names.push_back("beta_" + std::to_string(k));
  names.insert(names.end(), {"sigma2", "tau2", "phi"});
  return names;
}

/// Trace of a scalar parameter: beta_k, sigma2, tau2 or phi.
inline std::vector<double> trace(const Chain& chain, const std::string& name) {
  require(!chain.empty(), ErrorCode::kValidation, "empty chain");
  std::vector<double> out;
  out.reserve(chain.size());
  for (const auto& s : chain.samples) {
    if (name == "sigma2") {
      out.push_back(s.sigma2);
    } else if (name == "tau2") {
      out.push_back(s.tau2);
    } else if (name == "phi") {
      out.push_back(s.phi);
    } else if (name.rfind("beta_", 0) == 0) {
      const auto k = static_cast<Eigen::Index>(std::stoul(name.substr(5)));
      require(k < s.beta.size(), ErrorCode::kValidation, "no parameter " + name);
      out.push_back(s.beta[k]);
    } else {
      fail(ErrorCode::kValidation, "unknown parameter '" + name + "'");
    }
  }
  return out;
}

inline double posterior_median(const Chain& chain, const std::string& name) {
  return quantile(trace(chain, name), 0.5);
}

struct ParameterSummary {
  std::string name;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Median and central `level` interval for each scalar parameter.
inline std::vector<ParameterSummary> summarize(const Chain& chain, double level = 0.95) {
  require(!chain.empty(), ErrorCode::kValidation, "cannot summarize an empty chain");
  require(level > 0.0 && level < 1.0, ErrorCode::kDomain, "interval level must lie in (0, 1)");
  std::vector<ParameterSummary> out;
  for (const auto& name : parameter_names(chain)) {
    auto t = trace(chain, name);
    out.push_back({name, quantile(t, 0.5), quantile(t, 0.5 * (1.0 - level)), quantile(t, 0.5 * (1.0 + level))});
  }
  return out;
}

/// Posterior mean of x_i' beta + A_ii w_i per record.
inline Eigen::VectorXd posterior_mean_fitted(const Chain& chain, const GeoDataset& d) {
  require(!chain.empty(), ErrorCode::kValidation, "empty chain");
  const Eigen::VectorXd a = chain.a_diag.size() == 0 ? Eigen::VectorXd::Ones(d.size()) : chain.a_diag;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d.size());
  for (const auto& s : chain.samples) acc += d.covariates() * s.beta + a.cwiseProduct(s.w);
  return acc / static_cast<double>(chain.size());
}

// ---------------------------------------------------------------------------
// Persistence: one CSV row per retained draw (beta, tau2, sigma2, phi, w_1..w_N).
// A restricted chain is preceded by "#a,A_11,...,A_NN".

inline void write_chain_csv(std::ostream& out, const Chain& chain) {
  require(!chain.empty(), ErrorCode::kValidation, "cannot write an empty chain");
  const auto p = chain.samples.front().beta.size();
  const auto n = chain.samples.front().w.size();
  if (chain.a_diag.size() > 0 && !(chain.a_diag.array() == 1.0).all()) {
    require(chain.a_diag.size() == n, ErrorCode::kDimensionMismatch, "chain risk profile does not match w");
    out << "#a";
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << detail::format_double(chain.a_diag[i]);
    out << '\n';
  }
  for (Eigen::Index k = 0; k < p; ++k) out << "beta_" << k << ',';
  out << "tau2,sigma2,phi";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",w_" << i;
  out << '\n';
  for (const auto& s : chain.samples) {
    for (Eigen::Index k = 0; k < p; ++k) out << detail::format_double(s.beta[k]) << ',';
    out << detail::format_double(s.tau2) << ',' << detail::format_double(s.sigma2) << ','
        << detail::format_double(s.phi);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << detail::format_double(s.w[i]);
    out << '\n';
  }
}

inline Chain read_chain_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "chain CSV is empty");
  std::vector<double> a;
  if (line.rfind("#a,", 0) == 0) {
    const auto f = detail::split_csv_line(line);
    for (std::size_t k = 1; k < f.size(); ++k) {
      auto v = detail::parse_double(f[k]);
      require(v.has_value() && *v >= 0.0 && *v <= 1.0, ErrorCode::kParse,
              "chain risk profile: entry " + std::to_string(k) + " is not in [0, 1]");
      a.push_back(*v);
    }
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "chain CSV has no header");
  }
  const auto header = detail::split_csv_line(line);
  Eigen::Index p = 0;
  while (p < static_cast<Eigen::Index>(header.size()) && header[static_cast<std::size_t>(p)].rfind("beta_", 0) == 0) ++p;
  require(p >= 1 && static_cast<Eigen::Index>(header.size()) >= p + 3 &&
              header[static_cast<std::size_t>(p)] == "tau2" && header[static_cast<std::size_t>(p) + 1] == "sigma2" &&
              header[static_cast<std::size_t>(p) + 2] == "phi",
          ErrorCode::kSchema, "chain CSV header must be beta_*, tau2, sigma2, phi, w_*");
  const Eigen::Index n = static_cast<Eigen::Index>(header.size()) - p - 3;
  Chain chain;
  if (a.empty()) {
    chain.a_diag = Eigen::VectorXd::Ones(n);
  } else {
    require(static_cast<Eigen::Index>(a.size()) == n, ErrorCode::kDimensionMismatch,
            "chain risk profile has " + std::to_string(a.size()) + " entries for " + std::to_string(n) + " effects");
    chain.a_diag = Eigen::Map<const Eigen::VectorXd>(a.data(), n);
    chain.kind = ModelKind::kRestricted;
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == header.size(), ErrorCode::kParse, "chain row " + std::to_string(row) + ": wrong field count");
    std::vector<double> v(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      auto x = detail::parse_double(f[k]);
      require(x.has_value(), ErrorCode::kParse, "chain row " + std::to_string(row) + ": non-numeric value");
      v[k] = *x;
    }
    PosteriorSample s;
    s.beta = Eigen::Map<Eigen::VectorXd>(v.data(), p);
    s.tau2 = v[static_cast<std::size_t>(p)];
    s.sigma2 = v[static_cast<std::size_t>(p) + 1];
    s.phi = v[static_cast<std::size_t>(p) + 2];
    s.w = Eigen::Map<Eigen::VectorXd>(v.data() + p + 3, n);
    chain.samples.push_back(std::move(s));
  }
  require(!chain.empty(), ErrorCode::kParse, "chain CSV has no draws");
  return chain;
}

inline nlohmann::json chain_summary_json(const Chain& chain, double level = 0.95) {
  nlohmann::json j;
  j["model"] = model_kind_name(chain.kind);
  j["draws"] = chain.size();
  j["config"] = {{"burn_in", chain.config.burn_in},
                 {"iterations", chain.config.iterations},
                 {"thin", chain.config.thin},
                 {"seed", chain.config.seed}};
  j["diagnostics"] = {{"acceptance_rate_phi", chain.acceptance_rate_phi},
                      {"final_proposal_sd", chain.final_proposal_sd}};
  if (chain.phi_fixed) j["phi_fixed"] = *chain.phi_fixed;
  j["interval_level"] = level;
  for (const auto& s : summarize(chain, level)) {
    j["parameters"][s.name] = {{"median", s.median}, {"lower", s.lower}, {"upper", s.upper}};
  }
  return j;
}

}  // namespace geosynth

#endif  // GEOSYNTH_MCMC_HPP
