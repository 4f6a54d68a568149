#ifndef GEOSYNTH_GEODATA_HPP
#define GEOSYNTH_GEODATA_HPP

// Dataset model for geocoded microdata: locations, responses, covariates,
// plus CSV ingestion/export, pairwise distances and record suppression.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geosynth/errors.hpp"

namespace geosynth {

struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

inline double distance(const Location& a, const Location& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Immutable geocoded dataset. The covariate matrix always carries the
/// intercept as its first column.
class GeoDataset {
 public:
  GeoDataset(std::vector<Location> locations, Eigen::VectorXd responses,
             Eigen::MatrixXd covariates, std::vector<std::string> record_ids,
             std::vector<std::string> covariate_names = {},
             std::map<std::string, Eigen::VectorXd> auxiliary = {})
      : locations_(std::move(locations)),
        responses_(std::move(responses)),
        covariates_(std::move(covariates)),
        record_ids_(std::move(record_ids)),
        covariate_names_(std::move(covariate_names)),
        auxiliary_(std::move(auxiliary)) {
    validate();
  }

  /// Intercept-only dataset with zero-based row-index identifiers.
  static GeoDataset intercept_only(std::vector<Location> locations, Eigen::VectorXd responses) {
    const auto n = static_cast<Eigen::Index>(locations.size());
    return GeoDataset(std::move(locations), std::move(responses), Eigen::MatrixXd::Ones(n, 1),
                      default_ids(static_cast<std::size_t>(n)));
  }

  static std::vector<std::string> default_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
  }

  Eigen::Index size() const { return responses_.size(); }
  Eigen::Index num_covariates() const { return covariates_.cols(); }

  const std::vector<Location>& locations() const { return locations_; }
  const Location& location(Eigen::Index i) const { return locations_[static_cast<std::size_t>(i)]; }
  const Eigen::VectorXd& responses() const { return responses_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& record_ids() const { return record_ids_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::map<std::string, Eigen::VectorXd>& auxiliary() const { return auxiliary_; }

  /// Looks up a named numeric column among covariates and auxiliary columns.
  Eigen::VectorXd column(const std::string& name) const {
    for (std::size_t k = 0; k < covariate_names_.size(); ++k) {
      if (covariate_names_[k] == name) return covariates_.col(static_cast<Eigen::Index>(k));
    }
    if (auto it = auxiliary_.find(name); it != auxiliary_.end()) return it->second;
    fail(ErrorCode::kSchema, "dataset has no column named '" + name + "'");
  }

  std::optional<Eigen::Index> index_of(const std::string& id) const {
    auto it = std::find(record_ids_.begin(), record_ids_.end(), id);
    if (it == record_ids_.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - record_ids_.begin());
  }

  /// Copy restricted to the given row indices, in the given order.
  GeoDataset subset(const std::vector<Eigen::Index>& rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    std::vector<Location> locs;
    std::vector<std::string> ids;
    Eigen::VectorXd y(m);
    Eigen::MatrixXd x(m, covariates_.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index i = rows[static_cast<std::size_t>(r)];
      locs.push_back(location(i));
      ids.push_back(record_ids_[static_cast<std::size_t>(i)]);
      y[r] = responses_[i];
      x.row(r) = covariates_.row(i);
    }
    std::map<std::string, Eigen::VectorXd> aux;
    for (const auto& [name, col] : auxiliary_) {
      Eigen::VectorXd c(m);
      for (Eigen::Index r = 0; r < m; ++r) c[r] = col[rows[static_cast<std::size_t>(r)]];
      aux.emplace(name, std::move(c));
    }
    return GeoDataset(std::move(locs), std::move(y), std::move(x), std::move(ids), covariate_names_,
                      std::move(aux));
  }

  /// Same records with responses replaced (used when emitting synthetic replicates).
  GeoDataset with_responses(Eigen::VectorXd responses) const {
    return GeoDataset(locations_, std::move(responses), covariates_, record_ids_, covariate_names_,
                      auxiliary_);
  }

 private:
  void validate() const {
    const auto n = static_cast<std::size_t>(responses_.size());
    require(n >= 2, ErrorCode::kInsufficientData,
            "dataset needs at least 2 records, got " + std::to_string(n));
    require(locations_.size() == n && static_cast<std::size_t>(covariates_.rows()) == n &&
                record_ids_.size() == n,
            ErrorCode::kDimensionMismatch, "locations, responses, covariates and ids differ in length");
    require(covariates_.cols() >= 1 && covariates_.cols() <= static_cast<Eigen::Index>(n),
            ErrorCode::kValidation, "covariate matrix must have 1..N columns");
    require(covariate_names_.empty() ||
                covariate_names_.size() == static_cast<std::size_t>(covariates_.cols()),
            ErrorCode::kDimensionMismatch, "covariate names do not match covariate columns");
    for (const auto& [name, col] : auxiliary_) {
      require(static_cast<std::size_t>(col.size()) == n, ErrorCode::kDimensionMismatch,
              "auxiliary column '" + name + "' has wrong length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      require(std::isfinite(locations_[i].x) && std::isfinite(locations_[i].y) &&
                  std::isfinite(responses_[static_cast<Eigen::Index>(i)]),
              ErrorCode::kValidation, "non-finite location or response at row " + std::to_string(i));
    }
    require(covariates_.allFinite(), ErrorCode::kValidation, "non-finite covariate value");
    std::unordered_set<std::string> seen;
    for (const auto& id : record_ids_) {
      require(seen.insert(id).second, ErrorCode::kValidation, "duplicate record id '" + id + "'");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(covariates_);
    require(qr.rank() == covariates_.cols(), ErrorCode::kValidation,
            "covariate matrix is not of full column rank");
  }

  std::vector<Location> locations_;
  Eigen::VectorXd responses_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> record_ids_;
  std::vector<std::string> covariate_names_;
  std::map<std::string, Eigen::VectorXd> auxiliary_;
};

/// Symmetric Euclidean distance matrix with zero diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Eigen::MatrixXd d) : d_(std::move(d)) {}

  Eigen::Index size() const { return d_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return d_(i, j); }
  const Eigen::MatrixXd& matrix() const { return d_; }

  double max() const { return d_.maxCoeff(); }

  /// min_{j != i} d_ij for every record.
  Eigen::VectorXd nearest_neighbor() const {
    const Eigen::Index n = size();
    require(n >= 2, ErrorCode::kInsufficientData, "nearest neighbour needs at least 2 records");
    Eigen::VectorXd nn(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) best = std::min(best, d_(i, j));
      }
      nn[i] = best;
    }
    return nn;
  }

 private:
  Eigen::MatrixXd d_;
};

inline DistanceMatrix pairwise_distances(const std::vector<Location>& locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = distance(locs[static_cast<std::size_t>(i)], locs[static_cast<std::size_t>(j)]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DistanceMatrix(std::move(d));
}

inline DistanceMatrix pairwise_distances(const GeoDataset& d) {
  return pairwise_distances(d.locations());
}

/// Distances from each of `targets` to each dataset location (rows = targets).
inline Eigen::MatrixXd cross_distances(const std::vector<Location>& targets,
                                       const std::vector<Location>& locs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(locs.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t j = 0; j < locs.size(); ++j) {
      out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = distance(targets[t], locs[j]);
    }
  }
  return out;
}

/// Removes the listed records. Used for the suppressed-data baseline.
inline GeoDataset suppress(const GeoDataset& d, const std::set<std::string>& ids) {
  for (const auto& id : ids) {
    require(d.index_of(id).has_value(), ErrorCode::kValidation, "unknown record id '" + id + "'");
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!ids.contains(d.record_ids()[static_cast<std::size_t>(i)])) keep.push_back(i);
  }
  require(keep.size() >= 2, ErrorCode::kInsufficientData,
          "suppression leaves " + std::to_string(keep.size()) + " records; at least 2 required");
  return d.subset(keep);
}

// ---------------------------------------------------------------------------
// CSV

struct RowFilter {
  std::string column;
  double equals = 0.0;
};

struct ColumnSchema {
  std::string x_column = "x";
  std::string y_column = "y";
  std::string response_column = "response";
  std::vector<std::string> covariate_columns;  // intercept is implicit
  std::vector<std::string> auxiliary_columns;  // carried along, not modelled
  std::optional<std::string> id_column;
  std::optional<RowFilter> filter;
  bool log_response = false;
  /// Equirectangular projection of (lon, lat) degrees: x scaled by cos(mean latitude).
  bool equirectangular = false;
};

namespace detail {

inline std::string trim_field(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i < line.size() && line[i] == '"') quoted = !quoted;
    if (i == line.size() || (line[i] == ',' && !quoted)) {
      out.push_back(trim_field(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses CSV text into a validated dataset. Rows failing the filter are dropped.
inline GeoDataset parse_csv(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kSchema, "CSV input is empty; header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::kSchema, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ix = col(schema.x_column);
  const std::size_t iy = col(schema.y_column);
  const std::size_t ir = col(schema.response_column);
  std::vector<std::size_t> icov, iaux;
  for (const auto& c : schema.covariate_columns) icov.push_back(col(c));
  for (const auto& c : schema.auxiliary_columns) iaux.push_back(col(c));
  std::optional<std::size_t> iid;
  if (schema.id_column) iid = col(*schema.id_column);
  std::optional<std::size_t> ifilter;
  if (schema.filter) ifilter = col(schema.filter->column);

  std::vector<Location> locs;
  std::vector<double> ys;
  std::vector<std::vector<double>> covs, aux;
  std::vector<std::string> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    require(fields.size() == header.size(), ErrorCode::kParse,
            "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                " fields, got " + std::to_string(fields.size()));
    auto num = [&](std::size_t k) {
      auto v = detail::parse_double(fields[k]);
      if (!v) {
        fail(ErrorCode::kParse, "row " + std::to_string(row) + ", column '" + header[k] +
                                    "': non-numeric value '" + fields[k] + "'");
      }
      return *v;
    };
    if (ifilter && num(*ifilter) != schema.filter->equals) continue;
    locs.push_back({num(ix), num(iy)});
    double y = num(ir);
    if (schema.log_response) {
      require(y > 0.0, ErrorCode::kParse,
              "row " + std::to_string(row) + ": log transform of non-positive response");
      y = std::log(y);
    }
    ys.push_back(y);
    std::vector<double> c;
    for (auto k : icov) c.push_back(num(k));
    covs.push_back(std::move(c));
    std::vector<double> a;
    for (auto k : iaux) a.push_back(num(k));
    aux.push_back(std::move(a));
    if (iid) ids.push_back(fields[*iid]);
  }
  const std::size_t n = ys.size();
  require(n >= 2, ErrorCode::kInsufficientData,
          "only " + std::to_string(n) + " records remain after filtering; at least 2 required");
  if (!iid) ids = GeoDataset::default_ids(n);

  if (schema.equirectangular) {
    double mean_lat = 0.0;
    for (const auto& l : locs) mean_lat += l.y;
    mean_lat /= static_cast<double>(n);
    const double scale = std::cos(mean_lat * std::numbers::pi / 180.0);
    for (auto& l : locs) l.x *= scale;
  }

  const auto p = static_cast<Eigen::Index>(icov.size()) + 1;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::map<std::string, Eigen::VectorXd> auxcols;
  for (const auto& name : schema.auxiliary_columns) auxcols[name].resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    y[r] = ys[i];
    x(r, 0) = 1.0;
    for (std::size_t k = 0; k < icov.size(); ++k) x(r, static_cast<Eigen::Index>(k) + 1) = covs[i][k];
    for (std::size_t k = 0; k < iaux.size(); ++k) auxcols[schema.auxiliary_columns[k]][r] = aux[i][k];
  }
  std::vector<std::string> names{"(intercept)"};
  names.insert(names.end(), schema.covariate_columns.begin(), schema.covariate_columns.end());
  return GeoDataset(std::move(locs), std::move(y), std::move(x), std::move(ids), std::move(names),
                    std::move(auxcols));
}

inline GeoDataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return parse_csv(in, schema);
}

/// Writes the dataset with the schema's column names plus a leading `record_id`
/// column. Responses are written on the model scale.
inline void write_csv(std::ostream& out, const GeoDataset& d, const ColumnSchema& schema) {
  const auto& names = d.covariate_names();
  const Eigen::Index p = d.num_covariates();
  out << "record_id," << schema.x_column << ',' << schema.y_column << ',' << schema.response_column;
  for (Eigen::Index k = 1; k < p; ++k) {
    out << ',' << (names.empty() ? "x" + std::to_string(k) : names[static_cast<std::size_t>(k)]);
  }
  for (const auto& [name, col] : d.auxiliary()) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << d.record_ids()[static_cast<std::size_t>(i)] << ',' << detail::format_double(d.location(i).x)
        << ',' << detail::format_double(d.location(i).y) << ','
        << detail::format_double(d.responses()[i]);
    for (Eigen::Index k = 1; k < p; ++k) out << ',' << detail::format_double(d.covariates()(i, k));
    for (const auto& [name, col] : d.auxiliary()) out << ',' << detail::format_double(col[i]);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const GeoDataset& d, const ColumnSchema& schema) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  write_csv(out, d, schema);
}

/// Schema that re-reads a file produced by write_csv: same columns, ids from
/// `record_id`, no filter and no further transforms.
inline ColumnSchema reload_schema(const ColumnSchema& schema, const GeoDataset& d) {
  ColumnSchema s = schema;
  s.id_column = "record_id";
  s.filter.reset();
  s.log_response = false;
  s.equirectangular = false;
  s.covariate_columns.clear();
  const auto& names = d.covariate_names();
  for (Eigen::Index k = 1; k < d.num_covariates(); ++k) {
    s.covariate_columns.push_back(names.empty() ? "x" + std::to_string(k)
                                                : names[static_cast<std::size_t>(k)]);
  }
  s.auxiliary_columns.clear();
  for (const auto& [name, col] : d.auxiliary()) s.auxiliary_columns.push_back(name);
  return s;
}

}  // namespace geosynth

#endif  // GEOSYNTH_GEODATA_HPP
