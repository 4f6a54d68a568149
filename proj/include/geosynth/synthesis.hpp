#ifndef GEOSYNTH_SYNTHESIS_HPP
#define GEOSYNTH_SYNTHESIS_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosynth/covariance.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/mcmc.hpp"
#include "geosynth/random.hpp"

namespace geosynth {

/// L synthetic response vectors over the source dataset's records. Locations
/// and covariates are never altered; only responses are replaced.
struct SyntheticCollection {
  std::vector<Eigen::VectorXd> replicates;
  std::vector<std::string> record_ids;
  std::string source;
  ModelKind model_kind = ModelKind::kUnrestricted;

  std::size_t size() const { return replicates.size(); }
  Eigen::Index records() const { return static_cast<Eigen::Index>(record_ids.size()); }

  /// All L synthetic values of record i.
  std::vector<double> draws_for(Eigen::Index i) const {
    std::vector<double> out;
    out.reserve(replicates.size());
    for (const auto& r : replicates) out.push_back(r[i]);
    return out;
  }
};

/// Y_dagger(l)_i ~ N(x_i' beta(l) + A_ii w(l)_i, tau2(l)) for every retained
/// draw l, with A from the chain (identity when absent). Replicate l draws
/// from its own substream.
inline SyntheticCollection synthesize(const Chain& chain, const GeoDataset& d, std::uint64_t seed,
                                      std::string source = {}) {
  require(!chain.empty(), ErrorCode::kValidation, "cannot synthesize from an empty chain");
  SyntheticCollection out;
  out.record_ids = d.record_ids();
  out.source = std::move(source);
  out.model_kind = chain.kind;
  out.replicates.reserve(chain.size());
  const Eigen::VectorXd a = chain.a_diag.size() == 0 ? Eigen::VectorXd::Ones(d.size()) : chain.a_diag;
  require(a.size() == d.size(), ErrorCode::kDimensionMismatch, "chain risk profile does not match the dataset");
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const PosteriorSample& s = chain.samples[l];
    require(s.w.size() == d.size() && s.beta.size() == d.num_covariates(), ErrorCode::kDimensionMismatch,
            "chain draw " + std::to_string(l) + " does not match the dataset dimensions");
    Rng rng = make_rng(seed, Stream::kSynthesis, l);
    const Eigen::VectorXd z = standard_normal_vector(rng, d.size());
    Eigen::VectorXd y = d.covariates() * s.beta + a.cwiseProduct(s.w) + std::sqrt(s.tau2) * z;
    require(y.allFinite(), ErrorCode::kNumerical, "non-finite synthetic value in replicate " + std::to_string(l));
    out.replicates.push_back(std::move(y));
  }
  return out;
}

/// Long format: replicate, record_id, x, y, covariates..., y_synthetic.
inline void write_synthetic_csv(std::ostream& out, const SyntheticCollection& syn, const GeoDataset& d) {
  require(syn.records() == d.size(), ErrorCode::kDimensionMismatch, "synthetic collection does not match dataset");
  out << "replicate,record_id,x,y";
  for (Eigen::Index k = 1; k < d.num_covariates(); ++k) {
    out << ',' << (d.covariate_names().empty() ? "x" + std::to_string(k)
                                               : d.covariate_names()[static_cast<std::size_t>(k)]);
  }
  out << ",y_synthetic\n";
  for (std::size_t l = 0; l < syn.size(); ++l) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      out << (l + 1) << ',' << syn.record_ids[static_cast<std::size_t>(i)] << ','
          << detail::format_double(d.location(i).x) << ',' << detail::format_double(d.location(i).y);
      for (Eigen::Index k = 1; k < d.num_covariates(); ++k) out << ',' << detail::format_double(d.covariates()(i, k));
      out << ',' << detail::format_double(syn.replicates[l][i]) << '\n';
    }
  }
}

inline SyntheticCollection read_synthetic_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse, "synthetic CSV is empty");
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::kSchema, "synthetic CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto irep = col("replicate");
  const auto iid = col("record_id");
  const auto ival = col("y_synthetic");
  std::map<long, std::vector<std::pair<std::string, double>>> by_rep;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == header.size(), ErrorCode::kParse, "synthetic row " + std::to_string(row) + ": wrong field count");
    auto rep = detail::parse_double(f[irep]);
    auto val = detail::parse_double(f[ival]);
    require(rep && val, ErrorCode::kParse, "synthetic row " + std::to_string(row) + ": non-numeric value");
    by_rep[static_cast<long>(*rep)].emplace_back(f[iid], *val);
  }
  require(!by_rep.empty(), ErrorCode::kParse, "synthetic CSV has no rows");
  SyntheticCollection syn;
  for (const auto& [rep, rows] : by_rep) {
    if (syn.record_ids.empty()) {
      for (const auto& r : rows) syn.record_ids.push_back(r.first);
    }
    require(rows.size() == syn.record_ids.size(), ErrorCode::kDimensionMismatch,
            "replicate " + std::to_string(rep) + " has a different record count");
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].first == syn.record_ids[i], ErrorCode::kDimensionMismatch,
              "replicate " + std::to_string(rep) + " lists records in a different order");
      y[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
    syn.replicates.push_back(std::move(y));
  }
  return syn;
}

/// Checks that a collection lines up record-for-record with a dataset.
inline void check_alignment(const SyntheticCollection& syn, const GeoDataset& d) {
  require(syn.records() == d.size(), ErrorCode::kDimensionMismatch,
          "synthetic collection has " + std::to_string(syn.records()) + " records, dataset has " +
              std::to_string(d.size()));
  require(syn.record_ids == d.record_ids(), ErrorCode::kDimensionMismatch,
          "synthetic record ids do not match the dataset");
  for (const auto& r : syn.replicates) {
    require(r.size() == d.size(), ErrorCode::kDimensionMismatch, "replicate length mismatch");
  }
}

// ---------------------------------------------------------------------------
// Kriging prediction

enum class SurfaceQuantity { kResponse, kSpatialEffect };

/// Maps a location to its covariate row (intercept first).
using CovariateFn = std::function<Eigen::RowVectorXd(const Location&)>;

struct SurfaceOptions {
  int resolution = 100;
  SurfaceQuantity quantity = SurfaceQuantity::kResponse;
  /// Required for response surfaces when the model has covariates beyond the intercept.
  CovariateFn covariates;
  /// 0 uses every draw; otherwise an evenly spaced subset of this size.
  std::size_t max_draws = 0;
};

struct SurfaceGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  Eigen::MatrixXd values;  // values(iy, ix)
  SurfaceQuantity quantity = SurfaceQuantity::kResponse;
};

namespace detail {

inline std::vector<std::size_t> draw_indices(std::size_t total, std::size_t max_draws) {
  std::vector<std::size_t> idx;
  if (max_draws == 0 || max_draws >= total) {
    for (std::size_t l = 0; l < total; ++l) idx.push_back(l);
  } else {
    for (std::size_t k = 0; k < max_draws; ++k) idx.push_back(k * total / max_draws);
  }
  return idx;
}

inline Eigen::RowVectorXd grid_covariates(const GeoDataset& d, const SurfaceOptions& opt, const Location& s) {
  if (opt.covariates) {
    Eigen::RowVectorXd x = opt.covariates(s);
    require(x.size() == d.num_covariates(), ErrorCode::kDimensionMismatch, "grid covariate row has wrong length");
    return x;
  }
  require(d.num_covariates() == 1, ErrorCode::kValidation,
          "response prediction needs grid covariates for a model with covariates beyond the intercept");
  return Eigen::RowVectorXd::Ones(1);
}

}  // namespace detail

/// Posterior mean over draws of x(s0)' beta(l) + K0' Sigma_W^-1 w(l) at each
/// target (or of the kriged w alone). Draws sharing a phi share one
/// factorization; the kriging weights do not depend on sigma2.
inline Eigen::VectorXd predict_at(const Chain& chain, const GeoDataset& d, const std::vector<Location>& targets,
                                  const SurfaceOptions& opt = {}) {
  require(!chain.empty(), ErrorCode::kValidation, "cannot predict from an empty chain");
  const auto idx = detail::draw_indices(chain.size(), opt.max_draws);
  const DistanceMatrix dist = pairwise_distances(d);
  const Eigen::MatrixXd d0 = cross_distances(targets, d.locations());

  std::map<double, Eigen::VectorXd> w_sums;  // phi -> sum of w(l)
  Eigen::VectorXd beta_sum = Eigen::VectorXd::Zero(d.num_covariates());
  for (std::size_t l : idx) {
    const auto& s = chain.samples[l];
    require(s.w.size() == d.size() && s.beta.size() == d.num_covariates(), ErrorCode::kDimensionMismatch,
            "chain does not match the dataset");
    auto [it, inserted] = w_sums.try_emplace(s.phi, Eigen::VectorXd::Zero(d.size()));
    it->second += s.w;
    beta_sum += s.beta;
  }
  const auto count = static_cast<double>(idx.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  for (const auto& [phi, wsum] : w_sums) {
    const CovMatrix corr = build_correlation(phi, dist, JitterPolicy{.warn = false});
    const Eigen::VectorXd weights = corr.solve(wsum);
    out += (-phi * d0.array()).exp().matrix() * weights;
  }
  out /= count;
  if (opt.quantity == SurfaceQuantity::kResponse) {
    const Eigen::VectorXd beta_bar = beta_sum / count;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      out[static_cast<Eigen::Index>(t)] += detail::grid_covariates(d, opt, targets[t]).dot(beta_bar);
    }
  }
  return out;
}

/// Prediction over a resolution x resolution lattice spanning the bounding box.
inline SurfaceGrid predict_surface(const Chain& chain, const GeoDataset& d, const SurfaceOptions& opt = {}) {
  require(opt.resolution >= 2, ErrorCode::kValidation, "surface resolution must be at least 2 per axis");
  if (opt.quantity == SurfaceQuantity::kResponse && !opt.covariates) {
    require(d.num_covariates() == 1, ErrorCode::kValidation,
            "response surface needs grid covariates for a model with covariates beyond the intercept");
  }
  double xmin = d.location(0).x, xmax = xmin, ymin = d.location(0).y, ymax = ymin;
  for (const auto& l : d.locations()) {
    xmin = std::min(xmin, l.x);
    xmax = std::max(xmax, l.x);
    ymin = std::min(ymin, l.y);
    ymax = std::max(ymax, l.y);
  }
  SurfaceGrid g;
  g.quantity = opt.quantity;
  const int r = opt.resolution;
  for (int k = 0; k < r; ++k) {
    const double t = static_cast<double>(k) / (r - 1);
    g.xs.push_back(xmin + t * (xmax - xmin));
    g.ys.push_back(ymin + t * (ymax - ymin));
  }
  std::vector<Location> targets;
  targets.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(r));
  for (int iy = 0; iy < r; ++iy) {
    for (int ix = 0; ix < r; ++ix) targets.push_back({g.xs[static_cast<std::size_t>(ix)], g.ys[static_cast<std::size_t>(iy)]});
  }
  const Eigen::VectorXd v = predict_at(chain, d, targets, opt);
  g.values.resize(r, r);
  for (int iy = 0; iy < r; ++iy) {
    for (int ix = 0; ix < r; ++ix) g.values(iy, ix) = v[iy * r + ix];
  }
  return g;
}

inline void write_surface_csv(std::ostream& out, const SurfaceGrid& g) {
  out << "x,y,value\n";
  for (std::size_t iy = 0; iy < g.ys.size(); ++iy) {
    for (std::size_t ix = 0; ix < g.xs.size(); ++ix) {
      out << detail::format_double(g.xs[ix]) << ',' << detail::format_double(g.ys[iy]) << ','
          << detail::format_double(g.values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix))) << '\n';
    }
  }
}

/// Posterior predictive draws of Y at a location that is not in the dataset
/// (e.g. a suppressed record): w(s0) | w(l) from the Gaussian-process
/// conditional, plus observation noise.
inline std::vector<double> predictive_draws_at(const Chain& chain, const GeoDataset& d, const Location& s0,
                                               const Eigen::RowVectorXd& x0, std::uint64_t seed) {
  require(!chain.empty(), ErrorCode::kValidation, "cannot predict from an empty chain");
  require(x0.size() == d.num_covariates(), ErrorCode::kDimensionMismatch, "covariate row has wrong length");
  const DistanceMatrix dist = pairwise_distances(d);
  const Eigen::MatrixXd d0 = cross_distances({s0}, d.locations());
  Rng rng = make_rng(seed, Stream::kPrediction);
  std::normal_distribution<double> normal;
  std::optional<CovMatrix> corr;
  double corr_phi = -1.0;
  Eigen::VectorXd k0, rinv_k0;
  std::vector<double> out;
  out.reserve(chain.size());
  for (const auto& s : chain.samples) {
    if (!corr || s.phi != corr_phi) {
      corr = build_correlation(s.phi, dist, JitterPolicy{.warn = false});
      corr_phi = s.phi;
      k0 = (-s.phi * d0.row(0).array()).exp().matrix().transpose();
      rinv_k0 = corr->solve(k0);
    }
    const double mean_w = rinv_k0.dot(s.w);
    const double var_w = std::max(0.0, s.sigma2 * (1.0 - k0.dot(rinv_k0)));
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    out.push_back(x0.dot(s.beta) + mean_w + std::sqrt(var_w) * z1 + std::sqrt(s.tau2) * z2);
  }
  return out;
}

}  // namespace geosynth

#endif  // GEOSYNTH_SYNTHESIS_HPP
