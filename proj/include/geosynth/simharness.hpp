#ifndef GEOSYNTH_SIMHARNESS_HPP
#define GEOSYNTH_SIMHARNESS_HPP

// Simulated-data generation and the three-model experiment:
// unrestricted fit -> outlier detection -> restricted fit -> suppressed refit
// -> synthesis -> risk and utility reports -> tables.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/covariance.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/evaluation.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/mcmc.hpp"
#include "geosynth/random.hpp"
#include "geosynth/risk.hpp"
#include "geosynth/synthesis.hpp"

namespace geosynth {

struct SimConfig {
  int n = 500;
  double tau2 = 0.0625;
  double sigma2 = 4.0;
  double phi = 12.7;
  double intercept = 11.0;
  double coef1 = 0.25;  // on |s1 - 0.25|
  double coef2 = 0.25;  // on |s2 - 0.5|
  Location outlier{0.51, 0.01};
  /// Value of the outlier's spatial effect; the remaining effects are drawn
  /// from their conditional given it. Unset draws the outlier's effect too.
  std::optional<double> outlier_effect = -4.1;
  /// No other point is placed within this radius of the outlier.
  double buffer = 0.27;
  /// Required minimum distance from the outlier to every other point.
  double min_gap = 0.26;
  /// Share of points scattered outside the dense block [0, 0.6] x [0.2, 1].
  double sparse_fraction = 0.04;
  std::uint64_t seed = 1;
  int retries = 20;

  void validate() const {
    require(n >= 10, ErrorCode::kValidation, "simulation needs n >= 10");
    require(tau2 > 0.0 && sigma2 > 0.0 && phi > 0.0, ErrorCode::kDomain,
            "generating variances and decay must be positive");
    require(sparse_fraction >= 0.0 && sparse_fraction <= 1.0, ErrorCode::kDomain,
            "sparse fraction must lie in [0, 1]");
    require(buffer >= 0.0 && min_gap >= 0.0, ErrorCode::kDomain, "buffer and gap must be nonnegative");
    require(retries >= 1, ErrorCode::kValidation, "retries must be at least 1");
  }

  double mean_at(const Location& s) const {
    return intercept + coef1 * std::abs(s.x - 0.25) + coef2 * std::abs(s.y - 0.5);
  }
};

namespace detail {

inline bool in_dense_block(const Location& s) { return s.x <= 0.6 && s.y >= 0.2; }

/// Gaussian-process effects with covariance `cov`, optionally conditioned on
/// the last coordinate taking the value `last` (exact, via the prior draw).
inline Eigen::VectorXd draw_effects(const CovMatrix& cov, std::optional<double> last, Rng& rng) {
  const Eigen::Index n = cov.size();
  Eigen::VectorXd w = cov.sample(Eigen::VectorXd::Zero(n), rng);
  if (last) {
    const Eigen::MatrixXd& s = cov.matrix();
    w += s.col(n - 1) * ((*last - w[n - 1]) / s(n - 1, n - 1));
    w[n - 1] = *last;
  }
  return w;
}

}  // namespace detail

/// n-1 points from the dense-block mechanism plus the fixed outlier as the
/// last record (id "n"). The model design is intercept only; the analyst
/// regressors |s1 - 0.25| and |s2 - 0.5| are carried as columns d1, d2.
inline GeoDataset generate_simulated(const SimConfig& cfg) {
  cfg.validate();
  const int others = cfg.n - 1;
  const auto sparse = static_cast<int>(std::lround(cfg.sparse_fraction * others));
  for (int attempt = 0; attempt < cfg.retries; ++attempt) {
    Rng rng = make_rng(cfg.seed, Stream::kDataGeneration, static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Location> locs;
    locs.reserve(static_cast<std::size_t>(cfg.n));
    auto place = [&](bool dense) {
      for (int tries = 0; tries < 1000000; ++tries) {
        const Location s = dense ? Location{0.6 * unit(rng), 0.2 + 0.8 * unit(rng)} : Location{unit(rng), unit(rng)};
        if (!dense && detail::in_dense_block(s)) continue;
        if (distance(s, cfg.outlier) < cfg.buffer) continue;
        locs.push_back(s);
        return;
      }
      fail(ErrorCode::kValidation, "location mechanism cannot place a point outside the buffer");
    };
    for (int k = 0; k < others - sparse; ++k) place(true);
    for (int k = 0; k < sparse; ++k) place(false);
    locs.push_back(cfg.outlier);

    double gap = std::numeric_limits<double>::infinity();
    for (int k = 0; k < others; ++k) gap = std::min(gap, distance(locs[static_cast<std::size_t>(k)], cfg.outlier));
    if (!(gap > cfg.min_gap)) continue;

    const DistanceMatrix dist = pairwise_distances(locs);
    const CovMatrix cov = build_cov(ExponentialKernel(cfg.sigma2, cfg.phi), dist);
    const Eigen::VectorXd w = detail::draw_effects(cov, cfg.outlier_effect, rng);
    const Eigen::VectorXd noise = standard_normal_vector(rng, cfg.n);

    Eigen::VectorXd y(cfg.n), d1(cfg.n), d2(cfg.n);
    std::vector<std::string> ids;
    for (int i = 0; i < cfg.n; ++i) {
      const Location& s = locs[static_cast<std::size_t>(i)];
      y[i] = cfg.mean_at(s) + w[i] + std::sqrt(cfg.tau2) * noise[i];
      d1[i] = std::abs(s.x - 0.25);
      d2[i] = std::abs(s.y - 0.5);
      ids.push_back(std::to_string(i + 1));
    }
    return GeoDataset(std::move(locs), std::move(y), Eigen::MatrixXd::Ones(cfg.n, 1), std::move(ids),
                      {"(intercept)"}, {{"d1", d1}, {"d2", d2}});
  }
  fail(ErrorCode::kValidation, "seed " + std::to_string(cfg.seed) + ": outlier gap constraint unmet after " +
                                   std::to_string(cfg.retries) + " attempts");
}

/// Stand-in for a city housing extract: log prices over (lon, lat) degrees
/// with clustered listings plus a handful of isolated ones.
struct SfLikeConfig {
  int n = 214;
  double sigma2 = 0.13;
  double tau2 = 0.043;
  double phi = 80.0;  // per degree
  double intercept = 13.0;
  double sqft_coef = 0.27;  // per thousand square feet
  std::vector<Location> isolated{{-122.48, 37.76},   {-122.505, 37.715}, {-122.385, 37.715}, {-122.505, 37.805},
                                 {-122.385, 37.805}, {-122.445, 37.712}, {-122.39, 37.76}};
  int blobs = 8;
  double blob_radius = 0.012;
  double blob_sd = 0.005;
  /// Minimum distance from a blob centre to every isolated point.
  double clearance = 0.045;
  double lon_min = -122.51, lon_max = -122.38, lat_min = 37.71, lat_max = 37.81;
  std::uint64_t seed = 1;

  void validate() const {
    require(n > static_cast<int>(isolated.size()) + 2, ErrorCode::kValidation, "too few records for the fixture");
    require(sigma2 > 0.0 && tau2 > 0.0 && phi > 0.0, ErrorCode::kDomain, "variances and decay must be positive");
    require(blobs >= 1 && blob_radius > 0.0 && blob_sd > 0.0, ErrorCode::kDomain, "blob settings must be positive");
  }
};

/// Covariates: intercept and sqft (thousands). Isolated listings come first.
inline GeoDataset generate_sf_like(const SfLikeConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, Stream::kDataGeneration, 1000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  auto far_from_isolated = [&](const Location& s, double r) {
    for (const auto& q : cfg.isolated) {
      if (distance(s, q) < r) return false;
    }
    return true;
  };
  std::vector<Location> centres;
  for (int tries = 0; static_cast<int>(centres.size()) < cfg.blobs; ++tries) {
    require(tries < 100000, ErrorCode::kValidation, "cannot place blob centres with the requested clearance");
    const Location c{cfg.lon_min + cfg.blob_radius + (cfg.lon_max - cfg.lon_min - 2 * cfg.blob_radius) * unit(rng),
                     cfg.lat_min + cfg.blob_radius + (cfg.lat_max - cfg.lat_min - 2 * cfg.blob_radius) * unit(rng)};
    if (far_from_isolated(c, cfg.clearance)) centres.push_back(c);
  }
  std::vector<Location> locs = cfg.isolated;
  const int clustered = cfg.n - static_cast<int>(cfg.isolated.size());
  for (int k = 0; k < clustered; ++k) {
    const Location& c = centres[static_cast<std::size_t>(k % cfg.blobs)];
    for (;;) {
      const Location s{c.x + cfg.blob_sd * normal(rng), c.y + cfg.blob_sd * normal(rng)};
      if (distance(s, c) <= cfg.blob_radius) {
        locs.push_back(s);
        break;
      }
    }
  }
  const DistanceMatrix dist = pairwise_distances(locs);
  const CovMatrix cov = build_cov(ExponentialKernel(cfg.sigma2, cfg.phi), dist);
  const Eigen::VectorXd w = cov.sample(Eigen::VectorXd::Zero(cfg.n), rng);
  Eigen::MatrixXd x(cfg.n, 2);
  Eigen::VectorXd y(cfg.n);
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.n; ++i) {
    const double sqft = 0.45 + 0.8 * unit(rng);
    x(i, 0) = 1.0;
    x(i, 1) = sqft;
    y[i] = cfg.intercept + cfg.sqft_coef * sqft + w[i] + std::sqrt(cfg.tau2) * normal(rng);
    ids.push_back(std::to_string(i + 1));
  }
  return GeoDataset(std::move(locs), std::move(y), std::move(x), std::move(ids), {"(intercept)", "sqft"});
}

inline Eigen::Index nearest_record(const GeoDataset& d, const Location& s) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < d.size(); ++i) {
    if (distance(d.location(i), s) < distance(d.location(best), s)) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentSettings {
  /// Defaults are derived from the data when unset.
  std::optional<Priors> priors;
  ChainConfig chain;
  double rho = kDefaultRho;
  GlobalRisk gamma = GlobalRisk::infinite();
  /// Degree of smoothing; when set, gamma is derived from it using the
  /// unrestricted posterior medians of sigma2 and tau2.
  std::optional<double> alpha;
  WeightKind weights = WeightKind::kBinary;
  /// Number of synthetic replicates L; 0 uses every retained draw.
  std::size_t replicates = 0;
  double epsilon = 10000.0;
  double pct = 0.10;
  Scale scale = Scale::kOriginal;
  /// Analyst regressors beyond the intercept (dataset columns).
  std::vector<std::string> analyst_columns;
  /// Record tracked in the tables; defaults to the last record.
  std::optional<std::string> focus_id;
  bool run_suppressed = true;
  double level = 0.95;
  std::uint64_t seed = 1;

  void validate() const {
    chain.validate();
    require(rho > 0.0 && rho < 1.0, ErrorCode::kDomain, "rho must lie in (0, 1)");
    require(epsilon > 0.0 && pct > 0.0, ErrorCode::kDomain, "risk tolerances must be positive");
    require(level > 0.0 && level < 1.0, ErrorCode::kDomain, "interval level must lie in (0, 1)");
    require(replicates != 1, ErrorCode::kValidation, "combination rules need at least 2 replicates");
  }
};

struct ModelRun {
  std::string label;
  GeoDataset data;
  Chain chain;
  SyntheticCollection synthetic;
  std::vector<ParameterSummary> summary;
  RiskReport risk_pct;      // settings scale
  RiskReport risk_pct_log;  // log scale, for the ambiguous non-at-risk figure
  RiskReport risk_eps;
  UtilityReport utility;
  /// Mean synthetic value and posterior-mean surface at the focus location.
  double focus_synthetic_mean = 0.0;
  double focus_surface = 0.0;
  std::vector<double> focus_draws;

  double median(const std::string& name) const {
    for (const auto& s : summary) {
      if (s.name == name) return s.median;
    }
    fail(ErrorCode::kValidation, "no parameter " + name);
  }
};

struct ExperimentResult {
  GeoDataset data;
  ExperimentSettings settings;
  Priors priors;
  double phi_hat = 0.0;
  GlobalRisk gamma = GlobalRisk::infinite();
  OutlierVerdict verdict;
  Eigen::VectorXd weights;
  std::vector<std::string> at_risk_ids;
  Eigen::Index focus = 0;
  UtilityReport real;
  ModelRun unrestricted;
  ModelRun restricted;
  std::optional<ModelRun> suppressed;
  RiskComparison pct_comparison;
  RiskComparison pct_log_comparison;
  RiskComparison eps_comparison;
};

inline Eigen::MatrixXd analyst_design(const GeoDataset& d, const std::vector<std::string>& columns) {
  Eigen::MatrixXd x(d.size(), static_cast<Eigen::Index>(columns.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t k = 0; k < columns.size(); ++k) x.col(static_cast<Eigen::Index>(k) + 1) = d.column(columns[k]);
  return x;
}

inline std::vector<std::string> analyst_names(const std::vector<std::string>& columns) {
  std::vector<std::string> names{"beta_0"};
  for (std::size_t k = 0; k < columns.size(); ++k) names.push_back("beta_" + std::to_string(k + 1));
  return names;
}

/// Evenly spaced subset of L retained draws (all of them when L is 0 or too large).
inline Chain thin_to(const Chain& chain, std::size_t l) {
  Chain out = chain;
  out.samples.clear();
  for (std::size_t k : detail::draw_indices(chain.size(), l)) out.samples.push_back(chain.samples[k]);
  return out;
}

namespace detail {

enum SeedTag : std::uint64_t {
  kTagUnrestricted = 1,
  kTagRestricted = 2,
  kTagSuppressed = 3,
  kTagSynthesis = 10,
  kTagPrediction = 20,
};

inline ModelRun finish_run(std::string label, const GeoDataset& d, Chain chain, const ExperimentSettings& st,
                           std::uint64_t tag, const Location& focus_loc, const Eigen::RowVectorXd& focus_x,
                           std::optional<Eigen::Index> focus_index) {
  const Chain used = thin_to(chain, st.replicates);
  SyntheticCollection syn = synthesize(used, d, derive_seed(st.seed, kTagSynthesis + tag), label);
  ModelRun run{.label = std::move(label), .data = d, .chain = std::move(chain), .synthetic = std::move(syn),
               .summary = {}, .risk_pct = {}, .risk_pct_log = {}, .risk_eps = {}, .utility = {},
               .focus_synthetic_mean = 0.0, .focus_surface = 0.0, .focus_draws = {}};
  run.summary = summarize(run.chain, st.level);
  run.risk_pct = risk_within_percent(run.synthetic, d, st.pct, st.scale);
  run.risk_pct_log = risk_within_percent(run.synthetic, d, st.pct, Scale::kLog);
  run.risk_eps = risk_within_epsilon(run.synthetic, d, st.epsilon, st.scale);
  run.utility = combine_all(fit_analyst_regression(run.synthetic, analyst_design(d, st.analyst_columns)),
                            analyst_names(st.analyst_columns), st.level);
  SurfaceOptions opt;
  opt.covariates = [focus_x](const Location&) { return focus_x; };
  run.focus_surface = predict_at(used, d, {focus_loc}, opt)[0];
  if (focus_index) {
    run.focus_draws = run.synthetic.draws_for(*focus_index);
  } else {
    run.focus_draws = predictive_draws_at(used, d, focus_loc, focus_x, derive_seed(st.seed, kTagPrediction + tag));
  }
  run.focus_synthetic_mean =
      std::accumulate(run.focus_draws.begin(), run.focus_draws.end(), 0.0) / static_cast<double>(run.focus_draws.size());
  return run;
}

}  // namespace detail

/// Full pipeline on one dataset. Fits run in sequence: the restricted chain
/// starts from the last unrestricted draw with phi held at its posterior median.
inline ExperimentResult run_experiment(const GeoDataset& d, const ExperimentSettings& st,
                                       const std::function<void(const std::string&)>& log = {}) {
  st.validate();
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  const DistanceMatrix dist = pairwise_distances(d);
  const Priors priors = st.priors ? *st.priors : Priors::defaults(d.num_covariates(), dist);
  priors.validate(d.num_covariates());

  Eigen::Index focus = d.size() - 1;
  if (st.focus_id) {
    auto idx = d.index_of(*st.focus_id);
    require(idx.has_value(), ErrorCode::kValidation, "focus record '" + *st.focus_id + "' not in dataset");
    focus = *idx;
  }
  const Location focus_loc = d.location(focus);
  const Eigen::RowVectorXd focus_x = d.covariates().row(focus);

  ChainConfig cfg = st.chain;
  cfg.seed = derive_seed(st.seed, detail::kTagUnrestricted);
  say("fitting unrestricted model");
  Chain unres = fit_unrestricted(d, priors, cfg);
  const double phi_hat = posterior_median(unres, "phi");

  say("detecting outliers at phi = " + detail::format_double(phi_hat));
  const OutlierVerdict verdict = detect_outliers_binary(dist, phi_hat, st.rho);
  const Eigen::VectorXd weights = risk_weights(verdict, dist, phi_hat, st.weights);
  const GlobalRisk gamma =
      st.alpha ? gamma_for_alpha(*st.alpha, posterior_median(unres, "sigma2"), posterior_median(unres, "tau2"))
               : st.gamma;
  const RiskProfile profile = build_profile(weights, gamma);
  std::vector<std::string> at_risk_ids;
  for (auto i : verdict.flagged()) at_risk_ids.push_back(d.record_ids()[static_cast<std::size_t>(i)]);

  say("fitting restricted model (gamma = " + gamma.to_string() + ")");
  PosteriorSample init = unres.samples.back();
  init.phi = phi_hat;
  cfg.seed = derive_seed(st.seed, detail::kTagRestricted);
  Chain res = fit_restricted(d, priors, profile, phi_hat, init, cfg);

  say("synthesizing and evaluating");
  ModelRun unres_run =
      detail::finish_run("unrestricted", d, std::move(unres), st, detail::kTagUnrestricted, focus_loc, focus_x, focus);
  ModelRun res_run =
      detail::finish_run("restricted", d, std::move(res), st, detail::kTagRestricted, focus_loc, focus_x, focus);

  std::optional<ModelRun> sup_run;
  if (st.run_suppressed && !at_risk_ids.empty()) {
    say("fitting suppressed model without " + std::to_string(at_risk_ids.size()) + " at-risk records");
    const GeoDataset kept = suppress(d, std::set<std::string>(at_risk_ids.begin(), at_risk_ids.end()));
    const Priors kept_priors =
        st.priors ? *st.priors : Priors::defaults(kept.num_covariates(), pairwise_distances(kept));
    cfg.seed = derive_seed(st.seed, detail::kTagSuppressed);
    Chain sup = fit_unrestricted(kept, kept_priors, cfg, std::nullopt, std::nullopt, ModelKind::kSuppressed);
    sup_run = detail::finish_run("suppressed", kept, std::move(sup), st, detail::kTagSuppressed, focus_loc, focus_x,
                                 kept.index_of(d.record_ids()[static_cast<std::size_t>(focus)]));
  }

  RiskComparison pct = compare_risk(unres_run.risk_pct, res_run.risk_pct, verdict.at_risk);
  RiskComparison pct_log = compare_risk(unres_run.risk_pct_log, res_run.risk_pct_log, verdict.at_risk);
  RiskComparison eps = compare_risk(unres_run.risk_eps, res_run.risk_eps, verdict.at_risk);
  return ExperimentResult{
      .data = d,
      .settings = st,
      .priors = priors,
      .phi_hat = phi_hat,
      .gamma = gamma,
      .verdict = verdict,
      .weights = weights,
      .at_risk_ids = at_risk_ids,
      .focus = focus,
      .real = ols_report(analyst_design(d, st.analyst_columns), d.responses(), analyst_names(st.analyst_columns),
                         st.level),
      .unrestricted = std::move(unres_run),
      .restricted = std::move(res_run),
      .suppressed = std::move(sup_run),
      .pct_comparison = pct,
      .pct_log_comparison = pct_log,
      .eps_comparison = eps};
}

// ---------------------------------------------------------------------------
// Tables and artifacts

namespace detail {

inline std::string interval_text(double m, double lo, double hi) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << m << " (" << lo << ", " << hi << ")";
  return os.str();
}

inline std::vector<const ModelRun*> runs_of(const ExperimentResult& r) {
  std::vector<const ModelRun*> runs{&r.unrestricted, &r.restricted};
  if (r.suppressed) runs.push_back(&*r.suppressed);
  return runs;
}

}  // namespace detail

/// Posterior medians and intervals of the model parameters per model.
inline std::string table1_text(const ExperimentResult& r) {
  std::ostringstream os;
  const auto names = parameter_names(r.unrestricted.chain);
  os << std::left << std::setw(14) << "model";
  for (const auto& n : names) os << std::setw(24) << n;
  os << '\n';
  for (const ModelRun* run : detail::runs_of(r)) {
    os << std::setw(14) << run->label;
    for (const auto& s : run->summary) os << std::setw(24) << detail::interval_text(s.median, s.lower, s.upper);
    os << '\n';
  }
  return os.str();
}

inline void write_table1_csv(std::ostream& out, const ExperimentResult& r) {
  out << "model,parameter,median,lower,upper\n";
  for (const ModelRun* run : detail::runs_of(r)) {
    for (const auto& s : run->summary) {
      out << run->label << ',' << s.name << ',' << detail::format_double(s.median) << ','
          << detail::format_double(s.lower) << ',' << detail::format_double(s.upper) << '\n';
    }
  }
}

/// Combined analyst estimates per model plus the mean synthetic value at the
/// focus record; the first row is the real-data regression.
inline std::string table2_text(const ExperimentResult& r) {
  std::ostringstream os;
  const std::string focus_col = "Y(" + r.data.record_ids()[static_cast<std::size_t>(r.focus)] + ")";
  os << std::left << std::setw(14) << "model";
  for (const auto& n : r.real.names) os << std::setw(24) << n;
  os << focus_col << '\n';
  auto row = [&](const std::string& label, const UtilityReport& u, double focus) {
    os << std::setw(14) << label;
    for (const auto& e : u.estimates) os << std::setw(24) << detail::interval_text(e.qbar, e.lower, e.upper);
    os << std::fixed << std::setprecision(2) << focus << '\n';
  };
  row("real", r.real, r.data.responses()[r.focus]);
  for (const ModelRun* run : detail::runs_of(r)) row(run->label, run->utility, run->focus_synthetic_mean);
  return os.str();
}

inline void write_table2_csv(std::ostream& out, const ExperimentResult& r) {
  out << "model,parameter,estimate,lower,upper\n";
  auto rows = [&](const std::string& label, const UtilityReport& u, double focus) {
    for (std::size_t k = 0; k < u.names.size(); ++k) {
      const auto& e = u.estimates[k];
      out << label << ',' << u.names[k] << ',' << detail::format_double(e.qbar) << ','
          << detail::format_double(e.lower) << ',' << detail::format_double(e.upper) << '\n';
    }
    out << label << ",focus_response," << detail::format_double(focus) << ",,\n";
  };
  rows("real", r.real, r.data.responses()[r.focus]);
  for (const ModelRun* run : detail::runs_of(r)) rows(run->label, run->utility, run->focus_synthetic_mean);
}

inline nlohmann::json experiment_summary_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["records"] = r.data.size();
  j["phi_hat"] = r.phi_hat;
  j["threshold_m"] = r.verdict.threshold_m;
  j["at_risk_ids"] = r.at_risk_ids;
  j["focus_record"] = r.data.record_ids()[static_cast<std::size_t>(r.focus)];
  j["focus_response"] = r.data.responses()[r.focus];
  j["gamma"] = r.gamma.to_string();
  j["real_data_regression"] = to_json(r.real);
  for (const ModelRun* run : detail::runs_of(r)) {
    auto& m = j["models"][run->label];
    m["chain"] = chain_summary_json(run->chain, r.settings.level);
    m["replicates"] = run->synthetic.size();
    m["utility"] = to_json(run->utility);
    m["focus_synthetic_mean"] = run->focus_synthetic_mean;
    m["focus_surface"] = run->focus_surface;
    if (run->label != "suppressed") {
      m["focus_risk_pct"] = run->risk_pct.fraction[r.focus];
      m["focus_risk_epsilon"] = run->risk_eps.fraction[r.focus];
    }
  }
  j["risk"]["percent"] = to_json(r.pct_comparison);
  j["risk"]["percent_log_scale"] = to_json(r.pct_log_comparison);
  j["risk"]["epsilon"] = to_json(r.eps_comparison);
  return j;
}

/// Writes every artifact of the experiment into `dir`; returns the file names written.
inline std::vector<std::string> write_experiment(const ExperimentResult& r, const std::filesystem::path& dir,
                                                 const ColumnSchema& schema = {}) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    require(f.good(), ErrorCode::kIo, "cannot write " + (dir / name).string());
    files.push_back(name);
    return f;
  };
  {
    auto f = open("data.csv");
    write_csv(f, r.data, schema);
  }
  {
    auto f = open("outliers.csv");
    write_verdict_csv(f, r.data, r.verdict, r.weights);
  }
  for (const ModelRun* run : detail::runs_of(r)) {
    {
      auto f = open("chain_" + run->label + ".csv");
      write_chain_csv(f, run->chain);
    }
    {
      auto f = open("synthetic_" + run->label + ".csv");
      write_synthetic_csv(f, run->synthetic, run->data);
    }
    {
      auto f = open("risk_" + run->label + ".csv");
      write_risk_csv(f, run->risk_pct, run->data);
    }
  }
  {
    auto f = open("table1.csv");
    write_table1_csv(f, r);
  }
  {
    auto f = open("table1.txt");
    f << table1_text(r);
  }
  {
    auto f = open("table2.csv");
    write_table2_csv(f, r);
  }
  {
    auto f = open("table2.txt");
    f << table2_text(r);
  }
  {
    auto f = open("summary.json");
    f << experiment_summary_json(r).dump(2) << '\n';
  }
  return files;
}

}  // namespace geosynth

#endif  // GEOSYNTH_SIMHARNESS_HPP
