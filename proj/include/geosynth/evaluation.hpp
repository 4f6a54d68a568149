#ifndef GEOSYNTH_EVALUATION_HPP
#define GEOSYNTH_EVALUATION_HPP

// Disclosure-risk metrics on synthetic collections and analytic utility via
// per-replicate regressions combined with the partially synthetic rules
//: T = u_bar + b/L, nu = (L-1)(1 + L u_bar / b)^2.

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/errors.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/synthesis.hpp"

namespace geosynth {

/// Scale on which closeness to the truth is judged: the model (log) scale or
/// the original scale after exponentiation.
enum class Scale { kLog, kOriginal };

inline std::string scale_name(Scale s) { return s == Scale::kLog ? "log" : "original"; }

struct RiskReport {
  /// Per record, fraction of the L synthetic values within tolerance of the truth.
  Eigen::VectorXd fraction;
  /// False for records excluded from the metric (zero true value for percent rules).
  std::vector<bool> included;
  std::string criterion;
  Scale scale = Scale::kOriginal;

  /// Mean of per-record fractions over included records selected by `mask`.
  double group_mean(const std::vector<bool>& mask) const {
    require(mask.size() == included.size(), ErrorCode::kDimensionMismatch, "group mask length mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] && included[i]) {
        sum += fraction[static_cast<Eigen::Index>(i)];
        ++n;
      }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
  }
};

namespace detail {

inline double on_scale(double v, Scale s) { return s == Scale::kOriginal ? std::exp(v) : v; }

template <class Within>
RiskReport risk_fractions(const SyntheticCollection& syn, const GeoDataset& d, Scale scale, Within within) {
  check_alignment(syn, d);
  require(syn.size() >= 1, ErrorCode::kValidation, "synthetic collection is empty");
  RiskReport r;
  r.scale = scale;
  r.fraction = Eigen::VectorXd::Zero(d.size());
  r.included.assign(static_cast<std::size_t>(d.size()), true);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double truth = on_scale(d.responses()[i], scale);
    if (!within.applicable(truth)) {
      r.included[static_cast<std::size_t>(i)] = false;
      r.fraction[i] = std::numeric_limits<double>::quiet_NaN();
      warn("record " + d.record_ids()[static_cast<std::size_t>(i)] + " excluded from risk metric: zero true value");
      continue;
    }
    std::size_t hits = 0;
    for (const auto& rep : syn.replicates) {
      if (within(on_scale(rep[i], scale), truth)) ++hits;
    }
    r.fraction[i] = static_cast<double>(hits) / static_cast<double>(syn.size());
  }
  return r;
}

}  // namespace detail

/// Fraction of draws with |g(Y_dagger) - g(Y)| <= epsilon.
inline RiskReport risk_within_epsilon(const SyntheticCollection& syn, const GeoDataset& d, double epsilon,
                                      Scale scale) {
  require(epsilon > 0.0, ErrorCode::kDomain, "epsilon must be positive");
  struct Within {
    double eps;
    bool applicable(double) const { return true; }
    bool operator()(double v, double truth) const { return std::abs(v - truth) <= eps; }
  };
  RiskReport r = detail::risk_fractions(syn, d, scale, Within{epsilon});
  r.criterion = "within " + detail::format_double(epsilon) + " (" + scale_name(scale) + " scale)";
  return r;
}

/// Fraction of draws with |g(Y_dagger) - g(Y)| <= pct |g(Y)|; pct is a fraction (0.10 = 10%).
inline RiskReport risk_within_percent(const SyntheticCollection& syn, const GeoDataset& d, double pct, Scale scale) {
  require(pct > 0.0, ErrorCode::kDomain, "percentage must be positive");
  struct Within {
    double pct;
    bool applicable(double truth) const { return truth != 0.0; }
    bool operator()(double v, double truth) const { return std::abs(v - truth) <= pct * std::abs(truth); }
  };
  RiskReport r = detail::risk_fractions(syn, d, scale, Within{pct});
  r.criterion = "within " + detail::format_double(100.0 * pct) + "% (" + scale_name(scale) + " scale)";
  return r;
}

struct RiskComparison {
  /// Per record 1 - treated/baseline; NaN where the baseline fraction is 0.
  Eigen::VectorXd reduction;
  double at_risk_baseline = 0.0;
  double at_risk_treated = 0.0;
  double non_at_risk_baseline = 0.0;
  double non_at_risk_treated = 0.0;

  static double relative(double baseline, double treated) {
    return baseline > 0.0 ? 1.0 - treated / baseline : std::numeric_limits<double>::quiet_NaN();
  }
  double at_risk_reduction() const { return relative(at_risk_baseline, at_risk_treated); }
  double non_at_risk_reduction() const { return relative(non_at_risk_baseline, non_at_risk_treated); }
};

/// Relative reduction from a baseline report (e.g. unrestricted) to a treated
/// one (restricted), per record and for at-risk / non-at-risk group means.
inline RiskComparison compare_risk(const RiskReport& baseline, const RiskReport& treated,
                                   const std::vector<bool>& at_risk) {
  require(baseline.fraction.size() == treated.fraction.size() &&
              static_cast<std::size_t>(baseline.fraction.size()) == at_risk.size(),
          ErrorCode::kDimensionMismatch, "risk reports cover different records");
  RiskComparison c;
  c.reduction.resize(baseline.fraction.size());
  for (Eigen::Index i = 0; i < baseline.fraction.size(); ++i) {
    c.reduction[i] = RiskComparison::relative(baseline.fraction[i], treated.fraction[i]);
  }
  std::vector<bool> not_at_risk(at_risk.size());
  for (std::size_t i = 0; i < at_risk.size(); ++i) not_at_risk[i] = !at_risk[i];
  c.at_risk_baseline = baseline.group_mean(at_risk);
  c.at_risk_treated = treated.group_mean(at_risk);
  c.non_at_risk_baseline = baseline.group_mean(not_at_risk);
  c.non_at_risk_treated = treated.group_mean(not_at_risk);
  return c;
}

// ---------------------------------------------------------------------------
// Utility

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd variance;  // diagonal of s2 (X'X)^-1
  double s2 = 0.0;
  Eigen::Index dof = 0;
};

inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  require(x.rows() == y.size(), ErrorCode::kDimensionMismatch, "design rows do not match response length");
  require(x.rows() > x.cols(), ErrorCode::kValidation, "regression needs more rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  require(qr.rank() == x.cols(), ErrorCode::kValidation, "analyst design matrix is rank deficient");
  OlsFit f;
  f.coef = qr.solve(y);
  f.dof = x.rows() - x.cols();
  f.s2 = (y - x * f.coef).squaredNorm() / static_cast<double>(f.dof);
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  f.variance = f.s2 * xtx_inv.diagonal();
  return f;
}

/// Per-replicate estimates q(l) (rows) and their estimated variances u(l).
struct ReplicateEstimates {
  Eigen::MatrixXd q;
  Eigen::MatrixXd u;
};

inline ReplicateEstimates fit_analyst_regression(const SyntheticCollection& syn, const Eigen::MatrixXd& design) {
  require(syn.size() >= 1, ErrorCode::kValidation, "synthetic collection is empty");
  require(design.rows() == syn.records(), ErrorCode::kDimensionMismatch, "design rows do not match records");
  ReplicateEstimates est;
  est.q.resize(static_cast<Eigen::Index>(syn.size()), design.cols());
  est.u.resize(static_cast<Eigen::Index>(syn.size()), design.cols());
  for (std::size_t l = 0; l < syn.size(); ++l) {
    const OlsFit f = ols(design, syn.replicates[l]);
    est.q.row(static_cast<Eigen::Index>(l)) = f.coef.transpose();
    est.u.row(static_cast<Eigen::Index>(l)) = f.variance.transpose();
  }
  return est;
}

struct CombinedEstimate {
  double qbar = 0.0;
  double ubar = 0.0;
  double b = 0.0;
  double total_variance = 0.0;
  double dof = std::numeric_limits<double>::infinity();
  double lower = 0.0;
  double upper = 0.0;
};

/// Partially synthetic combination rules. With b = 0 the interval uses the
/// normal quantile and T = u_bar.
inline CombinedEstimate combine_partially_synthetic(std::span<const double> q, std::span<const double> u,
                                                    double level = 0.95) {
  require(q.size() == u.size(), ErrorCode::kDimensionMismatch, "estimate and variance counts differ");
  require(q.size() >= 2, ErrorCode::kValidation, "combination rules need at least 2 replicates");
  const auto l = static_cast<double>(q.size());
  CombinedEstimate c;
  for (std::size_t k = 0; k < q.size(); ++k) {
    require(u[k] >= 0.0, ErrorCode::kDomain, "replicate variances must be nonnegative");
    c.qbar += q[k];
    c.ubar += u[k];
  }
  c.qbar /= l;
  c.ubar /= l;
  for (double v : q) c.b += (v - c.qbar) * (v - c.qbar);
  c.b /= (l - 1.0);
  c.total_variance = c.ubar + c.b / l;
  double crit = 0.0;
  const double tail = 0.5 * (1.0 + level);
  if (c.b > 0.0) {
    const double ratio = 1.0 + l * c.ubar / c.b;
    c.dof = (l - 1.0) * ratio * ratio;
    crit = boost::math::quantile(boost::math::students_t(c.dof), tail);
  } else {
    c.dof = std::numeric_limits<double>::infinity();
    crit = boost::math::quantile(boost::math::normal(), tail);
  }
  const double half = crit * std::sqrt(c.total_variance);
  c.lower = c.qbar - half;
  c.upper = c.qbar + half;
  return c;
}

struct UtilityReport {
  std::vector<std::string> names;
  std::vector<CombinedEstimate> estimates;
  double level = 0.95;
};

inline UtilityReport combine_all(const ReplicateEstimates& est, std::vector<std::string> names, double level = 0.95) {
  require(static_cast<Eigen::Index>(names.size()) == est.q.cols(), ErrorCode::kDimensionMismatch,
          "parameter names do not match estimates");
  UtilityReport r;
  r.names = std::move(names);
  r.level = level;
  for (Eigen::Index k = 0; k < est.q.cols(); ++k) {
    const Eigen::VectorXd qk = est.q.col(k);
    const Eigen::VectorXd uk = est.u.col(k);
    r.estimates.push_back(combine_partially_synthetic(std::span<const double>(qk.data(), static_cast<std::size_t>(qk.size())),
                                                      std::span<const double>(uk.data(), static_cast<std::size_t>(uk.size())),
                                                      level));
  }
  return r;
}

/// Real-data reference: OLS estimates with t intervals.
inline UtilityReport ols_report(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                std::vector<std::string> names, double level = 0.95) {
  const OlsFit f = ols(design, y);
  require(static_cast<Eigen::Index>(names.size()) == f.coef.size(), ErrorCode::kDimensionMismatch,
          "parameter names do not match design");
  UtilityReport r;
  r.names = std::move(names);
  r.level = level;
  const double crit = boost::math::quantile(boost::math::students_t(static_cast<double>(f.dof)), 0.5 * (1.0 + level));
  for (Eigen::Index k = 0; k < f.coef.size(); ++k) {
    CombinedEstimate c;
    c.qbar = f.coef[k];
    c.ubar = f.variance[k];
    c.total_variance = f.variance[k];
    c.dof = static_cast<double>(f.dof);
    c.lower = c.qbar - crit * std::sqrt(c.total_variance);
    c.upper = c.qbar + crit * std::sqrt(c.total_variance);
    r.estimates.push_back(c);
  }
  return r;
}

inline bool intervals_overlap(const CombinedEstimate& a, const CombinedEstimate& b) {
  return a.lower <= b.upper && b.lower <= a.upper;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json to_json(const RiskReport& r, const GeoDataset& d, const std::vector<bool>* at_risk = nullptr) {
  nlohmann::json j;
  j["criterion"] = r.criterion;
  j["scale"] = scale_name(r.scale);
  auto& recs = j["records"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    nlohmann::json rec{{"record_id", d.record_ids()[static_cast<std::size_t>(i)]}};
    rec["fraction"] = r.included[static_cast<std::size_t>(i)] ? nlohmann::json(r.fraction[i]) : nlohmann::json(nullptr);
    if (at_risk) rec["at_risk"] = static_cast<bool>((*at_risk)[static_cast<std::size_t>(i)]);
    recs.push_back(std::move(rec));
  }
  std::vector<bool> all(static_cast<std::size_t>(d.size()), true);
  j["mean_fraction"] = r.group_mean(all);
  if (at_risk) {
    std::vector<bool> rest(at_risk->size());
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = !(*at_risk)[i];
    j["at_risk_mean"] = r.group_mean(*at_risk);
    j["non_at_risk_mean"] = r.group_mean(rest);
  }
  return j;
}

inline nlohmann::json to_json(const RiskComparison& c) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"at_risk_baseline", num(c.at_risk_baseline)},
          {"at_risk_treated", num(c.at_risk_treated)},
          {"at_risk_reduction", num(c.at_risk_reduction())},
          {"non_at_risk_baseline", num(c.non_at_risk_baseline)},
          {"non_at_risk_treated", num(c.non_at_risk_treated)},
          {"non_at_risk_reduction", num(c.non_at_risk_reduction())}};
}

inline void write_risk_csv(std::ostream& out, const RiskReport& r, const GeoDataset& d,
                           const std::vector<bool>* at_risk = nullptr) {
  out << "record_id,fraction" << (at_risk ? ",at_risk" : "") << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << d.record_ids()[static_cast<std::size_t>(i)] << ','
        << (r.included[static_cast<std::size_t>(i)] ? detail::format_double(r.fraction[i]) : std::string("NA"));
    if (at_risk) out << ',' << ((*at_risk)[static_cast<std::size_t>(i)] ? 1 : 0);
    out << '\n';
  }
}

inline nlohmann::json to_json(const UtilityReport& r) {
  nlohmann::json j;
  j["level"] = r.level;
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto& e = r.estimates[k];
    j["parameters"][r.names[k]] = {{"estimate", e.qbar},
                                   {"within_variance", e.ubar},
                                   {"between_variance", e.b},
                                   {"total_variance", e.total_variance},
                                   {"dof", std::isfinite(e.dof) ? nlohmann::json(e.dof) : nlohmann::json("inf")},
                                   {"lower", e.lower},
                                   {"upper", e.upper}};
  }
  return j;
}

inline std::string to_text(const UtilityReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "parameter" << std::right << std::setw(12) << "estimate" << std::setw(12)
     << "lower" << std::setw(12) << "upper" << std::setw(14) << "T" << '\n';
  os << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto& e = r.estimates[k];
    os << std::left << std::setw(16) << r.names[k] << std::right << std::setw(12) << e.qbar << std::setw(12) << e.lower
       << std::setw(12) << e.upper << std::setw(14) << e.total_variance << '\n';
  }
  return os.str();
}

}  // namespace geosynth

#endif  // GEOSYNTH_EVALUATION_HPP
