#ifndef GEOSYNTH_TESTS_CHECKS_HPP
#define GEOSYNTH_TESTS_CHECKS_HPP

// Property checks shared by the unit tests and the acceptance binary. Each
// returns pass/fail plus a one-line detail string.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geosynth/geosynth.hpp"
#include "oracles.hpp"

namespace checks {

namespace gs = geosynth;

struct Result {
  bool pass = false;
  std::string detail;
};

inline std::vector<gs::Location> scatter(int n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<gs::Location> p;
  for (int i = 0; i < n; ++i) p.push_back({u(rng), u(rng)});
  return p;
}

inline Eigen::VectorXd normals(int n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

/// Exact mean and covariance of an affine sampler w = m + J1 z1 + J2 z2,
/// recovered by probing with zero and unit vectors.
template <class Draw>
gs::GaussianMoments affine_moments(Draw draw, Eigen::Index n) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  gs::GaussianMoments m;
  m.mean = draw(zero, zero);
  Eigen::MatrixXd j(n, 2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    j.col(k) = draw(Eigen::VectorXd::Unit(n, k), zero) - m.mean;
    j.col(n + k) = draw(zero, Eigen::VectorXd::Unit(n, k)) - m.mean;
  }
  m.cov = j * j.transpose();
  return m;
}

inline double scaled_gap(const Eigen::VectorXd& got, const oracle::Vec& ref) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    const auto r = ref[static_cast<std::size_t>(i)];
    worst = std::max(worst, std::abs(got[i] - r) / std::max(1.0, std::abs(r)));
  }
  return worst;
}

inline double scaled_gap(const Eigen::MatrixXd& got, const oracle::Mat& ref) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.rows(); ++i) {
    for (Eigen::Index j = 0; j < got.cols(); ++j) {
      const auto r = ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      worst = std::max(worst, std::abs(got(i, j) - r) / std::max(1.0, std::abs(r)));
    }
  }
  return worst;
}

/// w | rest against explicit-inverse evaluation, for N = 2, 3, 4 and for the
/// unrestricted, partially shrunk and fully severed (A_ii = 0) forms. Covers
/// the moment function and both samplers used by the chain.
inline Result conditional_oracle(double tol = 1e-8) {
  double worst = 0.0;
  int cases = 0;
  for (int n : {2, 3, 4}) {
    const auto pts = scatter(n, 100 + static_cast<std::uint64_t>(n));
    const auto dist = gs::pairwise_distances(pts);
    std::vector<oracle::Vec> a_sets{oracle::Vec(static_cast<std::size_t>(n), 1.0)};
    oracle::Vec partial, severed;
    for (int i = 0; i < n; ++i) {
      partial.push_back(i % 2 == 0 ? 1.0 : 1.0 / std::sqrt(1.0 + 3.0 * (0.3 + 0.2 * i)));
      severed.push_back(i == n - 1 ? 0.0 : 1.0);
    }
    a_sets.push_back(partial);
    a_sets.push_back(severed);
    for (double phi : {0.7, 4.0}) {
      for (auto [s2, t2] : std::array<std::pair<double, double>, 2>{{{4.0, 0.0625}, {0.5, 1.3}}}) {
        const auto corr = gs::build_correlation(phi, dist);
        const auto sigma_w = oracle::scale(oracle::exp_cov(oracle::to_mat(dist.matrix()), 1.0, phi), s2);
        const Eigen::VectorXd resid = normals(n, 7 + static_cast<std::uint64_t>(n), 2.0);
        for (const auto& a : a_sets) {
          const Eigen::VectorXd ad = Eigen::Map<const Eigen::VectorXd>(a.data(), n);
          const auto ref = oracle::w_conditional(sigma_w, a, t2, oracle::to_vec(resid));
          const auto fc = gs::w_full_conditional(corr, ad, s2, t2, resid);
          const auto direct = affine_moments(
              [&](const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
                return gs::draw_w_direct(corr, ad, s2, t2, resid, z1, z2);
              },
              n);
          const gs::FixedRangeWSampler fixed(corr, ad);
          const auto spectral = affine_moments(
              [&](const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) { return fixed.draw(s2, t2, resid, z1, z2); },
              n);
          for (const auto* m : {&fc, &direct, &spectral}) {
            worst = std::max({worst, scaled_gap(m->mean, ref.mean), scaled_gap(m->cov, ref.cov)});
            ++cases;
          }
          // Transformed form w* = A w with invertible A: Sigma_W -> A Sigma_W A, A -> I.
          if (std::all_of(a.begin(), a.end(), [](double v) { return v > 0.0; })) {
            const auto asa = oracle::multiply(oracle::multiply(oracle::diag(a), sigma_w), oracle::diag(a));
            const auto star = oracle::w_conditional(asa, oracle::Vec(static_cast<std::size_t>(n), 1.0), t2,
                                                    oracle::to_vec(resid));
            const Eigen::VectorXd mean_star = ad.asDiagonal() * fc.mean;
            const Eigen::MatrixXd cov_star = ad.asDiagonal() * fc.cov * ad.asDiagonal();
            worst = std::max({worst, scaled_gap(mean_star, star.mean), scaled_gap(cov_star, star.cov)});
            ++cases;
          }
        }
      }
    }
  }
  std::ostringstream os;
  os << cases << " cases, max scaled error " << worst << " (tol " << tol << ")";
  return {worst <= tol, os.str()};
}

/// gamma = inf with one at-risk record: A_ii w_i = 0 on every draw, and w_i
/// standardized by its conditional prior given the other effects is N(0, 1).
inline Result infinite_gamma(int n = 5, int draws = 2000, std::uint64_t seed = 17) {
  std::vector<gs::Location> pts;
  for (int i = 0; i < n - 1; ++i) pts.push_back({0.1 * (i % 2), 0.1 * (i / 2)});
  pts.push_back({0.45, 0.45});
  const double phi = 3.0;
  Eigen::VectorXd y = normals(n, seed + 1, 0.5);
  y.array() += 2.0;
  y[n - 1] = -3.0;
  const auto d = gs::GeoDataset::intercept_only(pts, y);
  const auto dist = gs::pairwise_distances(d);
  const auto priors = gs::Priors::defaults(1, dist);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
  weights[n - 1] = 1.0;
  const auto profile = gs::build_profile(weights, gs::GlobalRisk::infinite());
  gs::ChainConfig cfg;
  cfg.burn_in = 200;
  cfg.iterations = draws;
  cfg.thin = 1;
  cfg.seed = seed;
  const auto init = gs::default_init(d, dist, priors);
  const auto chain = gs::fit_restricted(d, priors, profile, phi, init, cfg);

  bool exact = chain.a_diag[n - 1] == 0.0;
  for (const auto& s : chain.samples) {
    const Eigen::VectorXd aw = chain.a_diag.cwiseProduct(s.w);
    exact = exact && aw[n - 1] == 0.0 && s.w[n - 1] != 0.0;
  }
  const auto cp = oracle::conditional_prior(oracle::exp_cov(oracle::to_mat(dist.matrix()), 1.0, phi),
                                            static_cast<std::size_t>(n - 1));
  // Draw l's effects were generated under the sigma2 stored with draw l-1.
  std::vector<double> z;
  for (std::size_t l = 1; l < chain.size(); ++l) {
    const auto& s = chain.samples[l];
    double mean = 0.0;
    for (Eigen::Index j = 0; j < n - 1; ++j) mean += cp.weights[static_cast<std::size_t>(j)] * s.w[j];
    z.push_back((s.w[n - 1] - mean) / std::sqrt(chain.samples[l - 1].sigma2 * cp.variance));
  }
  const auto m = static_cast<double>(z.size());
  double mu = 0.0, var = 0.0;
  for (double v : z) mu += v;
  mu /= m;
  for (double v : z) var += (v - mu) * (v - mu);
  var /= (m - 1.0);
  const double se_mean = 1.0 / std::sqrt(m);
  const double se_var = std::sqrt(2.0 / m);
  const bool moments = std::abs(mu) <= 3.0 * se_mean && std::abs(var - 1.0) <= 3.0 * se_var;
  std::ostringstream os;
  os << chain.size() << " draws, A_ii*w_i==0 on all: " << (exact ? "yes" : "no") << "; standardized mean " << mu
     << " (3se " << 3.0 * se_mean << "), variance " << var << " (3se " << 3.0 * se_var << ")";
  return {exact && moments, os.str()};
}

/// gamma = 0 restricted chain versus unrestricted chain, same seed and fixed phi.
inline Result identity_reduction(int n = 30, std::uint64_t seed = 5) {
  const auto pts = scatter(n, seed);
  Eigen::VectorXd y = normals(n, seed + 2);
  y.array() += 10.0;
  const auto d = gs::GeoDataset::intercept_only(pts, y);
  const auto dist = gs::pairwise_distances(d);
  const auto priors = gs::Priors::defaults(1, dist);
  const auto verdict = gs::detect_outliers_binary(dist, 8.0);
  Eigen::VectorXd weights = verdict.weights();
  weights[0] = 1.0;  // ensure at least one at-risk weight
  const auto profile = gs::build_profile(weights, gs::GlobalRisk::finite(0.0));
  gs::ChainConfig cfg;
  cfg.burn_in = 100;
  cfg.iterations = 400;
  cfg.thin = 2;
  cfg.seed = seed;
  const double phi = 8.0;
  const auto init = gs::default_init(d, dist, priors);
  const auto un = gs::fit_unrestricted(d, priors, cfg, phi, init);
  const auto re = gs::fit_restricted(d, priors, profile, phi, init, cfg);
  bool same = un.size() == re.size() && !un.empty();
  for (std::size_t l = 0; same && l < un.size(); ++l) {
    const auto& a = un.samples[l];
    const auto& b = re.samples[l];
    same = a.beta == b.beta && a.w == b.w && a.sigma2 == b.sigma2 && a.tau2 == b.tau2 && a.phi == b.phi;
  }
  std::ostringstream os;
  os << un.size() << " retained draws compared bitwise: " << (same ? "identical" : "differ");
  return {same, os.str()};
}

inline Result shrinkage_algebra() {
  const double s2 = 4.0, t2 = 0.0625;
  double worst = 0.0;
  const double top = gs::max_alpha(s2, t2);
  for (int k = 0; k < 1000; ++k) {
    const double alpha = top * k / 999.0;
    worst = std::max(worst, std::abs(gs::alpha_for_gamma(gs::gamma_for_alpha(alpha, s2, t2), s2, t2) - alpha));
  }
  const bool a0 = gs::alpha_for_gamma(gs::GlobalRisk::finite(0.0), s2, t2) == s2 / (s2 + t2);
  const bool ahalf = gs::alpha_for_gamma(gs::GlobalRisk::finite(s2 / t2 - 1.0), s2, t2) == 0.5;
  const bool ainf = gs::alpha_for_gamma(gs::GlobalRisk::infinite(), s2, t2) == 0.0;
  const bool g0 = gs::gamma_for_alpha(s2 / (s2 + t2), s2, t2) == gs::GlobalRisk::finite(0.0);
  const bool ghalf = gs::gamma_for_alpha(0.5, s2, t2).value() == s2 / t2 - 1.0;
  const bool ginf = gs::gamma_for_alpha(0.0, s2, t2).is_infinite();
  const bool anchors = a0 && ahalf && ainf && g0 && ghalf && ginf;
  std::ostringstream os;
  os << "max round-trip error " << worst << " over 1000 alphas; anchors exact: " << (anchors ? "yes" : "no");
  return {worst <= 1e-12 && anchors, os.str()};
}

inline Result threshold_anchor() {
  const double m = gs::corr_inversion_threshold(12.7, 0.20);
  const double ref = -std::log(0.20) / 12.7;
  const double corr = gs::ExponentialKernel(1.0, 12.7).correlation(m);
  const bool prefix = std::abs(m - 0.12673) < 5e-6;
  const bool rounded = std::round(m * 100.0) / 100.0 == 0.13;
  const bool ok = std::abs(m - ref) <= 1e-12 && std::abs(corr - 0.20) <= 1e-12 && prefix && rounded;
  std::ostringstream os;
  os.precision(12);
  os << "M = " << m << ", correlation at M = " << corr;
  return {ok, os.str()};
}

inline Result combination_rules() {
  const std::vector<double> q{1, 2, 3}, u{1, 1, 1};
  const auto c = gs::combine_partially_synthetic(q, u);
  const bool hand = c.qbar == 2.0 && c.b == 1.0 && c.ubar == 1.0 && c.total_variance == 1.0 + 1.0 / 3.0 &&
                    c.total_variance == 4.0 / 3.0 && c.dof == 32.0;
  const std::vector<double> q0{2.5, 2.5, 2.5, 2.5}, u0{0.7, 0.7, 0.7, 0.7};
  const auto z = gs::combine_partially_synthetic(q0, u0);
  const double normal_crit = 1.959963984540054;
  const bool degenerate = z.qbar == 2.5 && z.b == 0.0 && z.total_variance == z.ubar && std::isinf(z.dof) &&
                          std::abs((z.upper - z.qbar) / std::sqrt(z.total_variance) - normal_crit) < 1e-12;
  bool rejects_single = false;
  try {
    const std::vector<double> one{1.0};
    gs::combine_partially_synthetic(one, one);
  } catch (const gs::Error&) {
    rejects_single = true;
  }
  std::ostringstream os;
  os.precision(17);
  os << "T = " << c.total_variance << ", nu = " << c.dof << "; b = 0 gives T = u_bar with normal interval: "
     << (degenerate ? "yes" : "no") << "; L = 1 rejected: " << (rejects_single ? "yes" : "no");
  return {hand && degenerate && rejects_single, os.str()};
}

}  // namespace checks

#endif  // GEOSYNTH_TESTS_CHECKS_HPP
