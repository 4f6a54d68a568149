#ifndef GEOSYNTH_COVARIANCE_HPP
#define GEOSYNTH_COVARIANCE_HPP

#include <cmath>
#include <concepts>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "geosynth/errors.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/random.hpp"

namespace geosynth {

enum class KernelKind { kExponential };

/// sigma2 * exp(-phi * dist).
struct ExponentialKernel {
  double sigma2 = 1.0;
  double phi = 1.0;

  ExponentialKernel(double sigma2_, double phi_) : sigma2(sigma2_), phi(phi_) {
    require(sigma2 > 0.0 && std::isfinite(sigma2), ErrorCode::kDomain, "kernel variance must be positive");
    require(phi > 0.0 && std::isfinite(phi), ErrorCode::kDomain, "kernel decay must be positive");
  }

  static constexpr KernelKind kind() { return KernelKind::kExponential; }

  double correlation(double dist) const { return std::exp(-phi * dist); }
  double operator()(double dist) const { return sigma2 * correlation(dist); }
};

template <class K>
concept CovarianceKernel = requires(const K& k, double d) {
  { k(d) } -> std::convertible_to<double>;
  { k.correlation(d) } -> std::convertible_to<double>;
  { K::kind() } -> std::convertible_to<KernelKind>;
  { k.sigma2 } -> std::convertible_to<double>;
};

inline double kernel_eval(const ExponentialKernel& k, double dist) {
  require(dist >= 0.0, ErrorCode::kDomain, "distance must be nonnegative");
  return k(dist);
}

/// Distance at which the exponential correlation falls to `rho`: -log(rho)/phi.
inline double corr_inversion_threshold(double phi, double rho) {
  require(phi > 0.0, ErrorCode::kDomain, "phi must be positive");
  require(rho > 0.0 && rho < 1.0, ErrorCode::kDomain, "rho must lie in (0, 1)");
  return -std::log(rho) / phi;
}

/// Diagonal loading tried when a covariance matrix does not factor cleanly.
/// The added term is `epsilon * scale` with epsilon escalating by `factor`.
struct JitterPolicy {
  double start = 1e-10;
  double factor = 10.0;
  double max = 1e-6;
  bool warn = true;
};

/// Symmetric positive-definite matrix with a cached lower Cholesky factor.
class CovMatrix {
 public:
  /// Factors `m`. A first attempt is made without loading; it is accepted
  /// only if every squared pivot exceeds `policy.start * scale`. Otherwise
  /// jitter escalates per the policy until the factorization succeeds.
  static CovMatrix factor(Eigen::MatrixXd m, double scale, const JitterPolicy& policy = {}) {
    const Eigen::Index n = m.rows();
    require(m.cols() == n, ErrorCode::kDimensionMismatch, "covariance matrix must be square");
    CovMatrix c;
    c.m_ = std::move(m);
    c.llt_.compute(c.m_);
    if (c.llt_.info() == Eigen::Success &&
        c.llt_.matrixLLT().diagonal().array().square().minCoeff() > policy.start * scale) {
      return c;
    }
    for (double eps = policy.start; eps <= policy.max * (1.0 + 1e-9); eps *= policy.factor) {
      c.loaded_ = c.m_;
      c.loaded_.diagonal().array() += eps * scale;
      c.llt_.compute(c.loaded_);
      if (c.llt_.info() == Eigen::Success) {
        c.jitter_ = eps * scale;
        if (policy.warn) {
          std::ostringstream msg;
          msg << "covariance matrix (" << n << "x" << n << ") needed diagonal jitter " << eps
              << " x scale; duplicate or near-duplicate locations?";
          warn(msg.str());
        }
        return c;
      }
    }
    std::ostringstream msg;
    msg << "Cholesky factorization failed after jitter " << policy.max
        << "; leading minor of order " << failing_minor(c.m_, policy.max * scale)
        << " is not positive definite";
    fail(ErrorCode::kNumerical, msg.str());
  }

  Eigen::Index size() const { return m_.rows(); }
  /// The matrix as supplied, without jitter.
  const Eigen::MatrixXd& matrix() const { return m_; }
  /// The matrix that was actually factored (jitter included).
  const Eigen::MatrixXd& factored_matrix() const { return jitter_ > 0.0 ? loaded_ : m_; }
  double jitter() const { return jitter_; }
  auto lower() const { return llt_.matrixL(); }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    require(b.size() == size(), ErrorCode::kDimensionMismatch, "solve: rhs length mismatch");
    return llt_.solve(b);
  }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
    require(b.rows() == size(), ErrorCode::kDimensionMismatch, "solve: rhs rows mismatch");
    return llt_.solve(b);
  }

  /// b' M^{-1} b via one triangular solve.
  double quadratic_form(const Eigen::VectorXd& b) const {
    return llt_.matrixL().solve(b).squaredNorm();
  }

  double logdet() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  /// mean + L z.
  Eigen::VectorXd sample(const Eigen::VectorXd& mean, const Eigen::VectorXd& z) const {
    require(mean.size() == size() && z.size() == size(), ErrorCode::kDimensionMismatch,
            "sample: vector length mismatch");
    return mean + llt_.matrixL() * z;
  }
  Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const {
    return sample(mean, standard_normal_vector(rng, size()));
  }

 private:
  CovMatrix() = default;

  // Order (1-based) of the first leading minor with a nonpositive pivot.
  static Eigen::Index failing_minor(const Eigen::MatrixXd& m, double load) {
    const Eigen::Index n = m.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double d = m(j, j) + load - l.row(j).head(j).squaredNorm();
      if (!(d > 0.0)) return j + 1;
      l(j, j) = std::sqrt(d);
      for (Eigen::Index i = j + 1; i < n; ++i) {
        l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
      }
    }
    return n;
  }

  Eigen::MatrixXd m_;
  Eigen::MatrixXd loaded_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

/// Elementwise kernel over a distance matrix (unfactored).
template <CovarianceKernel K>
Eigen::MatrixXd kernel_matrix(const K& k, const Eigen::MatrixXd& dist) {
  if constexpr (std::same_as<K, ExponentialKernel>) {
    return (k.sigma2 * (-k.phi * dist.array()).exp()).matrix();
  } else {
    return dist.unaryExpr([&](double d) { return k(d); });
  }
}

template <CovarianceKernel K>
CovMatrix build_cov(const K& k, const DistanceMatrix& d, const JitterPolicy& policy = {}) {
  return CovMatrix::factor(kernel_matrix(k, d.matrix()), k.sigma2, policy);
}

/// Correlation matrix exp(-phi * d), factored under the jitter policy (scale 1).
inline CovMatrix build_correlation(double phi, const DistanceMatrix& d, const JitterPolicy& policy = {}) {
  return build_cov(ExponentialKernel(1.0, phi), d, policy);
}

/// Log density of N(x | 0, scale * M) where `corr` holds the factor of M.
inline double gaussian_logpdf_scaled(const CovMatrix& corr, double scale, const Eigen::VectorXd& x) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const auto n = static_cast<double>(x.size());
  return -0.5 * (n * kLog2Pi + n * std::log(scale) + corr.logdet() + corr.quadratic_form(x) / scale);
}

}  // namespace geosynth

#endif  // GEOSYNTH_COVARIANCE_HPP
