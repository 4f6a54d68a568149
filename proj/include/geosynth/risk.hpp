#ifndef GEOSYNTH_RISK_HPP
#define GEOSYNTH_RISK_HPP

// Spatial outlier detection, risk weights and the differential-smoothing
// diagonal A with A_ii = 1/sqrt(1 + gamma * a_i).

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geosynth/covariance.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/geodata.hpp"

namespace geosynth {

inline constexpr double kDefaultRho = 0.20;

/// Global risk gamma in [0, inf]. Infinity is a distinguished state, never a
/// large float, so that A_ii = 0 holds exactly.
class GlobalRisk {
 public:
  static GlobalRisk finite(double value) {
    require(value >= 0.0 && std::isfinite(value), ErrorCode::kDomain,
            "global risk must be a finite nonnegative number (use infinite() for inf)");
    return GlobalRisk(value, false);
  }
  static GlobalRisk infinite() { return GlobalRisk(0.0, true); }

  bool is_infinite() const { return infinite_; }
  /// Finite value; +inf when infinite.
  double value() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  std::string to_string() const {
    return infinite_ ? std::string("inf") : detail::format_double(value_);
  }

  friend bool operator==(const GlobalRisk&, const GlobalRisk&) = default;

 private:
  GlobalRisk(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

struct OutlierVerdict {
  std::vector<bool> at_risk;
  Eigen::VectorXd nn_distance;
  double threshold_m = 0.0;

  std::size_t count() const {
    std::size_t c = 0;
    for (bool b : at_risk) c += b ? 1 : 0;
    return c;
  }

  /// Binary risk weights: 1 for flagged records, 0 otherwise.
  Eigen::VectorXd weights() const {
    Eigen::VectorXd a(static_cast<Eigen::Index>(at_risk.size()));
    for (std::size_t i = 0; i < at_risk.size(); ++i) a[static_cast<Eigen::Index>(i)] = at_risk[i] ? 1.0 : 0.0;
    return a;
  }

  std::vector<Eigen::Index> flagged() const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < at_risk.size(); ++i) {
      if (at_risk[i]) idx.push_back(static_cast<Eigen::Index>(i));
    }
    return idx;
  }
};

/// Flags record i when its nearest-neighbour distance is >= M = -log(rho)/phi_hat.
inline OutlierVerdict detect_outliers_binary(const DistanceMatrix& d, double phi_hat,
                                             double rho = kDefaultRho) {
  require(d.size() >= 2, ErrorCode::kInsufficientData, "outlier detection needs at least 2 records");
  OutlierVerdict v;
  v.threshold_m = corr_inversion_threshold(phi_hat, rho);
  v.nn_distance = d.nearest_neighbor();
  v.at_risk.resize(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    v.at_risk[static_cast<std::size_t>(i)] = v.nn_distance[i] >= v.threshold_m;
  }
  return v;
}

/// Kernel-aware overload; the correlation inversion is only defined for the
/// exponential family.
template <CovarianceKernel K>
OutlierVerdict detect_outliers_binary(const DistanceMatrix& d, const K& kernel, double rho = kDefaultRho) {
  require(K::kind() == KernelKind::kExponential, ErrorCode::kDomain,
          "threshold inversion is implemented for the exponential kernel only");
  return detect_outliers_binary(d, kernel.phi, rho);
}

/// a_i = 1 - exp(-phi_hat * nn_i), frozen before the restricted fit.
inline Eigen::VectorXd continuous_weights(const DistanceMatrix& d, double phi_hat) {
  require(phi_hat > 0.0, ErrorCode::kDomain, "phi must be positive");
  const Eigen::VectorXd nn = d.nearest_neighbor();
  return (1.0 - (-phi_hat * nn.array()).exp()).matrix();
}

enum class WeightKind { kBinary, kContinuous };

/// Risk weights of the requested kind: verdict indicators or continuous a_i.
inline Eigen::VectorXd risk_weights(const OutlierVerdict& v, const DistanceMatrix& d, double phi_hat,
                                    WeightKind kind) {
  return kind == WeightKind::kBinary ? v.weights() : continuous_weights(d, phi_hat);
}

/// Weight on a record's own residual in the conditional mean of its smoothed
/// effect: (sigma2/(1+gamma)) / (tau2 + sigma2/(1+gamma)).
inline double alpha_for_gamma(const GlobalRisk& gamma, double sigma2, double tau2) {
  require(sigma2 > 0.0 && tau2 > 0.0, ErrorCode::kDomain, "variances must be positive");
  if (gamma.is_infinite()) return 0.0;
  return sigma2 / (sigma2 + tau2 * (1.0 + gamma.value()));
}

inline double max_alpha(double sigma2, double tau2) { return sigma2 / (sigma2 + tau2); }

/// Inverse of alpha_for_gamma on [0, sigma2/(sigma2+tau2)].
inline GlobalRisk gamma_for_alpha(double alpha, double sigma2, double tau2) {
  require(sigma2 > 0.0 && tau2 > 0.0, ErrorCode::kDomain, "variances must be positive");
  const double upper = max_alpha(sigma2, tau2);
  require(alpha >= 0.0 && alpha <= upper, ErrorCode::kDomain,
          "alpha must lie in [0, sigma2/(sigma2+tau2)]");
  if (alpha == 0.0) return GlobalRisk::infinite();
  if (alpha == upper) return GlobalRisk::finite(0.0);
  const double g = sigma2 * (1.0 - alpha) / (alpha * tau2) - 1.0;
  return GlobalRisk::finite(std::max(0.0, g));
}

struct RiskProfile {
  Eigen::VectorXd a;
  GlobalRisk gamma = GlobalRisk::finite(0.0);
  Eigen::VectorXd a_diag;

  Eigen::Index size() const { return a.size(); }

  bool is_identity() const { return (a_diag.array() == 1.0).all(); }

  /// Unrestricted model: A = I.
  static RiskProfile identity(Eigen::Index n);
};

inline RiskProfile build_profile(const Eigen::VectorXd& weights, const GlobalRisk& gamma) {
  RiskProfile p;
  p.a = weights;
  p.gamma = gamma;
  p.a_diag.resize(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double a = weights[i];
    require(a >= 0.0 && a <= 1.0, ErrorCode::kDomain, "risk weights must lie in [0, 1]");
    if (a == 0.0) {
      p.a_diag[i] = 1.0;
    } else if (gamma.is_infinite()) {
      p.a_diag[i] = 0.0;
    } else {
      p.a_diag[i] = 1.0 / std::sqrt(1.0 + gamma.value() * a);
    }
  }
  return p;
}

inline RiskProfile build_profile(const OutlierVerdict& v, const GlobalRisk& gamma) {
  return build_profile(v.weights(), gamma);
}

inline RiskProfile RiskProfile::identity(Eigen::Index n) {
  return build_profile(Eigen::VectorXd::Zero(n), GlobalRisk::finite(0.0));
}

/// record_id, nn_distance, a_i, at_risk.
inline void write_verdict_csv(std::ostream& out, const GeoDataset& d, const OutlierVerdict& v,
                              const Eigen::VectorXd& weights) {
  require(v.nn_distance.size() == d.size() && weights.size() == d.size(), ErrorCode::kDimensionMismatch,
          "verdict does not match dataset");
  out << "record_id,nn_distance,a,at_risk\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << d.record_ids()[static_cast<std::size_t>(i)] << ',' << detail::format_double(v.nn_distance[i])
        << ',' << detail::format_double(weights[i]) << ',' << (v.at_risk[static_cast<std::size_t>(i)] ? 1 : 0)
        << '\n';
  }
}

struct VerdictRow {
  std::string record_id;
  double nn_distance;
  double a;
  bool at_risk;
};

inline std::vector<VerdictRow> read_verdict_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "verdict CSV is empty");
  std::vector<VerdictRow> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = detail::split_csv_line(line);
    require(f.size() == 4, ErrorCode::kParse, "verdict row " + std::to_string(row) + ": expected 4 fields");
    auto nn = detail::parse_double(f[1]);
    auto a = detail::parse_double(f[2]);
    require(nn && a && (f[3] == "0" || f[3] == "1"), ErrorCode::kParse,
            "verdict row " + std::to_string(row) + ": malformed value");
    rows.push_back({f[0], *nn, *a, f[3] == "1"});
  }
  return rows;
}

}  // namespace geosynth

#endif  // GEOSYNTH_RISK_HPP
