// Batch command-line front end: simulate, fit, outliers, synthesize, risk,
// utility, surface and experiment subcommands.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geosynth/geosynth.hpp"

namespace gs = geosynth;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kUsageExit = 2;
constexpr int kUnexpectedExit = 1;

struct Options {
  // io
  std::string data;
  std::string schema;
  std::string preset;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::string config;
  // chain
  int burnin = 10000;
  int iters = 50000;
  int thin = 100;
  std::string phi_range;
  double phi_sd = 0.1;
  // risk
  double rho = gs::kDefaultRho;
  std::string gamma = "inf";
  double alpha = 0.0;
  std::string weights = "binary";
  // synthesis / evaluation
  std::size_t replicates = 0;
  double epsilon = 10000.0;
  double pct = 0.10;
  std::string scale = "original";
  std::string columns;
  double level = 0.95;
  // subcommand specific
  std::string model = "unrestricted";
  std::string chain;
  std::string outliers;
  std::string synthetic;
  double phi = 0.0;
  int resolution = 100;
  std::string quantity = "response";
  std::size_t max_draws = 0;
  int n = 500;
  double sparse_fraction = 0.04;
  std::string focus;
  bool no_suppressed = false;
};

std::vector<std::string> g_warnings;

void log_phase(const std::string& msg) { std::cerr << "[geosynth] " << msg << '\n'; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = gs::detail::trim_field(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat key=value config: keys mirror long flag names; flags given on the
// command line take precedence.

std::vector<std::string> load_config_args(const std::string& path, const std::vector<std::string>& cli_args) {
  std::ifstream in(path);
  gs::require(in.good(), gs::ErrorCode::kIo, "cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = gs::detail::trim_field(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    gs::require(eq != std::string::npos, gs::ErrorCode::kParse,
                "config line " + std::to_string(row) + ": expected key=value");
    const std::string key = gs::detail::trim_field(line.substr(0, eq));
    std::string value = gs::detail::trim_field(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (value.empty() || key == "config") continue;
    const std::string flag = "--" + key;
    const bool on_cli = std::any_of(cli_args.begin(), cli_args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!on_cli) out.push_back(flag + "=" + value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schema handling

gs::ColumnSchema preset_schema(const std::string& preset) {
  gs::ColumnSchema s;
  if (preset == "sim-sec4") {
    s.auxiliary_columns = {"d1", "d2"};
    s.id_column = "record_id";
  } else if (preset == "sf-onebed") {
    s.x_column = "lon";
    s.y_column = "lat";
    s.response_column = "price";
    s.covariate_columns = {"sqft"};
    s.auxiliary_columns = {"beds"};
    s.filter = gs::RowFilter{"beds", 1.0};
    s.log_response = true;
  }
  return s;
}

gs::ColumnSchema schema_from_json(const std::string& path) {
  std::ifstream in(path);
  gs::require(in.good(), gs::ErrorCode::kIo, "cannot open schema file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    gs::fail(gs::ErrorCode::kParse, "schema " + path + ": " + e.what());
  }
  gs::require(j.is_object(), gs::ErrorCode::kSchema, "schema must be a JSON object");
  static const std::vector<std::string> known{"x",  "y",      "response",     "covariates",     "auxiliary",
                                              "id", "filter", "log_response", "equirectangular"};
  for (const auto& [k, v] : j.items()) {
    gs::require(std::find(known.begin(), known.end(), k) != known.end(), gs::ErrorCode::kSchema,
                "unknown schema key '" + k + "'");
  }
  gs::ColumnSchema s;
  try {
    s.x_column = j.value("x", s.x_column);
    s.y_column = j.value("y", s.y_column);
    s.response_column = j.value("response", s.response_column);
    s.covariate_columns = j.value("covariates", std::vector<std::string>{});
    s.auxiliary_columns = j.value("auxiliary", std::vector<std::string>{});
    if (j.contains("id")) s.id_column = j.at("id").get<std::string>();
    if (j.contains("filter")) {
      s.filter = gs::RowFilter{j.at("filter").at("column").get<std::string>(), j.at("filter").at("equals").get<double>()};
    }
    s.log_response = j.value("log_response", false);
    s.equirectangular = j.value("equirectangular", false);
  } catch (const json::exception& e) {
    gs::fail(gs::ErrorCode::kSchema, "schema " + path + ": " + e.what());
  }
  return s;
}

json schema_to_json(const gs::ColumnSchema& s) {
  json j{{"x", s.x_column},
         {"y", s.y_column},
         {"response", s.response_column},
         {"covariates", s.covariate_columns},
         {"auxiliary", s.auxiliary_columns},
         {"log_response", s.log_response},
         {"equirectangular", s.equirectangular}};
  if (s.id_column) j["id"] = *s.id_column;
  if (s.filter) j["filter"] = {{"column", s.filter->column}, {"equals", s.filter->equals}};
  return j;
}

// Without a schema or preset: x, y and response, ids from `record_id` when
// present, every other column carried along unmodelled.
gs::ColumnSchema resolve_schema(const Options& o) {
  if (!o.schema.empty()) return schema_from_json(o.schema);
  gs::ColumnSchema s = preset_schema(o.preset);
  if (o.preset.empty() && !o.data.empty()) {
    std::ifstream in(o.data);
    std::string header;
    if (in && std::getline(in, header)) {
      const auto cols = gs::detail::split_csv_line(header);
      for (const auto& c : cols) {
        if (c == "record_id") {
          s.id_column = c;
        } else if (c != s.x_column && c != s.y_column && c != s.response_column) {
          s.auxiliary_columns.push_back(c);
        }
      }
    }
  }
  return s;
}

gs::GeoDataset load_data(const Options& o) {
  gs::require(!o.data.empty(), gs::ErrorCode::kValidation, "--data is required");
  return gs::load_csv(o.data, resolve_schema(o));
}

// ---------------------------------------------------------------------------
// Parameter conversion and validation

gs::GlobalRisk parse_gamma(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "infinity") return gs::GlobalRisk::infinite();
  const auto v = gs::detail::parse_double(s);
  gs::require(v.has_value(), gs::ErrorCode::kValidation, "--gamma must be a number or 'inf'");
  return gs::GlobalRisk::finite(*v);
}

gs::WeightKind parse_weights(const std::string& s) {
  if (s == "binary") return gs::WeightKind::kBinary;
  if (s == "continuous") return gs::WeightKind::kContinuous;
  gs::fail(gs::ErrorCode::kValidation, "--weights must be 'binary' or 'continuous'");
}

gs::Scale parse_scale(const std::string& s) {
  if (s == "original") return gs::Scale::kOriginal;
  if (s == "log") return gs::Scale::kLog;
  gs::fail(gs::ErrorCode::kValidation, "--scale must be 'original' or 'log'");
}

gs::ChainConfig chain_config(const Options& o, std::uint64_t tag) {
  gs::ChainConfig c;
  c.burn_in = o.burnin;
  c.iterations = o.iters;
  c.thin = o.thin;
  c.phi_proposal_sd = o.phi_sd;
  c.seed = gs::derive_seed(o.seed, tag);
  c.validate();
  return c;
}

gs::Priors priors_for(const Options& o, const gs::GeoDataset& d) {
  gs::Priors p = gs::Priors::defaults(d.num_covariates(), gs::pairwise_distances(d));
  if (!o.phi_range.empty()) {
    const auto parts = split_list(o.phi_range);
    gs::require(parts.size() == 2, gs::ErrorCode::kValidation, "--phi-range expects 'lower,upper'");
    const auto lo = gs::detail::parse_double(parts[0]);
    const auto hi = gs::detail::parse_double(parts[1]);
    gs::require(lo && hi, gs::ErrorCode::kValidation, "--phi-range values must be numbers");
    p.phi_lower = *lo;
    p.phi_upper = *hi;
  }
  p.validate(d.num_covariates());
  return p;
}

std::vector<std::string> analyst_columns(const Options& o, const gs::GeoDataset& d) {
  if (!o.columns.empty()) return split_list(o.columns);
  if (o.preset == "sim-sec4") return {"d1", "d2"};
  std::vector<std::string> cols;
  for (std::size_t k = 1; k < d.covariate_names().size(); ++k) cols.push_back(d.covariate_names()[k]);
  return cols;
}

void validate_common(const Options& o) {
  gs::require(o.rho > 0.0 && o.rho < 1.0, gs::ErrorCode::kDomain, "--rho must lie in (0, 1)");
  gs::require(o.epsilon > 0.0, gs::ErrorCode::kDomain, "--epsilon must be positive");
  gs::require(o.pct > 0.0, gs::ErrorCode::kDomain, "--pct must be positive");
  gs::require(o.level > 0.0 && o.level < 1.0, gs::ErrorCode::kDomain, "--level must lie in (0, 1)");
  gs::require(o.replicates != 1, gs::ErrorCode::kValidation, "--L must be 0 (all draws) or at least 2");
  gs::require(o.preset.empty() || o.preset == "sim-sec4" || o.preset == "sf-onebed", gs::ErrorCode::kValidation,
              "--preset must be 'sim-sec4' or 'sf-onebed'");
  parse_gamma(o.gamma);
  parse_weights(o.weights);
  parse_scale(o.scale);
}

// ---------------------------------------------------------------------------
// Output helpers

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  std::ofstream open(const std::string& name) {
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    gs::require(f.good(), gs::ErrorCode::kIo, "cannot write " + (dir / name).string());
    files.push_back(name);
    return f;
  }
};

void write_manifest(Outputs& out, const std::string& command, const Options& o, const CLI::App& sub) {
  {
    auto f = out.open("run.conf");
    f << "# replay: geosynth " << command << " --config run.conf\n";
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name == "config" || opt->count() == 0) continue;
      f << name << '=' << (opt->get_expected_min() == 0 ? std::string("true") : opt->results().back()) << '\n';
    }
  }
  json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["substreams"] = {"chain", "synthesis", "data_generation", "prediction"};
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    const auto& res = opt->results();
    cfg[name] = res.empty() ? opt->get_default_str() : res.back();
  }
  j["config"] = cfg;
  j["config_file"] = "run.conf";
  j["replay"] = "geosynth " + command + " --config run.conf --out-dir <dir>";
  j["warnings"] = g_warnings;
  std::vector<std::string> files = out.files;
  files.push_back("manifest.json");
  j["outputs"] = files;
  std::ofstream f(out.dir / "manifest.json");
  gs::require(f.good(), gs::ErrorCode::kIo, "cannot write manifest");
  f << j.dump(2) << '\n';
}

gs::Chain load_chain(const std::string& path) {
  gs::require(!path.empty(), gs::ErrorCode::kValidation, "--chain is required");
  std::ifstream in(path);
  gs::require(in.good(), gs::ErrorCode::kIo, "cannot open chain file " + path);
  return gs::read_chain_csv(in);
}

gs::SyntheticCollection load_synthetic(const std::string& path) {
  gs::require(!path.empty(), gs::ErrorCode::kValidation, "--synthetic is required");
  std::ifstream in(path);
  gs::require(in.good(), gs::ErrorCode::kIo, "cannot open synthetic file " + path);
  return gs::read_synthetic_csv(in);
}

std::vector<bool> load_at_risk(const std::string& path, const gs::GeoDataset& d, Eigen::VectorXd* weights = nullptr) {
  std::ifstream in(path);
  gs::require(in.good(), gs::ErrorCode::kIo, "cannot open outlier file " + path);
  const auto rows = gs::read_verdict_csv(in);
  std::map<std::string, const gs::VerdictRow*> by_id;
  for (const auto& r : rows) by_id[r.record_id] = &r;
  std::vector<bool> at_risk(static_cast<std::size_t>(d.size()));
  if (weights) weights->resize(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    auto it = by_id.find(d.record_ids()[static_cast<std::size_t>(i)]);
    gs::require(it != by_id.end(), gs::ErrorCode::kDimensionMismatch,
                "outlier file has no row for record " + d.record_ids()[static_cast<std::size_t>(i)]);
    at_risk[static_cast<std::size_t>(i)] = it->second->at_risk;
    if (weights) (*weights)[i] = it->second->a;
  }
  return at_risk;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const Options& o, const CLI::App& sub) {
  Outputs out{o.out_dir, {}};
  const std::string preset = o.preset.empty() ? "sim-sec4" : o.preset;
  log_phase("generating " + preset + " data");
  std::optional<gs::GeoDataset> d;
  if (preset == "sf-onebed") {
    gs::SfLikeConfig cfg;
    cfg.seed = o.seed;
    d = gs::generate_sf_like(cfg);
  } else {
    gs::SimConfig cfg;
    cfg.n = o.n;
    cfg.sparse_fraction = o.sparse_fraction;
    cfg.seed = o.seed;
    d = gs::generate_simulated(cfg);
  }
  const gs::ColumnSchema schema = gs::reload_schema(gs::ColumnSchema{}, *d);
  {
    auto f = out.open("data.csv");
    gs::write_csv(f, *d, schema);
  }
  {
    auto f = out.open("schema.json");
    f << schema_to_json(schema).dump(2) << '\n';
  }
  write_manifest(out, "simulate", o, sub);
  return 0;
}

int cmd_fit(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  Outputs out{o.out_dir, {}};
  gs::Chain chain;
  gs::GeoDataset fitted = d;
  if (o.model == "unrestricted") {
    const auto priors = priors_for(o, d);
    const auto cfg = chain_config(o, 1);
    log_phase("fitting unrestricted model to " + std::to_string(d.size()) + " records");
    chain = gs::fit_unrestricted(d, priors, cfg);
  } else if (o.model == "restricted") {
    const gs::Chain base = load_chain(o.chain);
    gs::require(base.samples.front().w.size() == d.size(), gs::ErrorCode::kDimensionMismatch,
                "unrestricted chain does not match the dataset");
    const double phi_hat = gs::posterior_median(base, "phi");
    const auto dist = gs::pairwise_distances(d);
    Eigen::VectorXd weights;
    if (!o.outliers.empty()) {
      load_at_risk(o.outliers, d, &weights);
    } else {
      weights = gs::risk_weights(gs::detect_outliers_binary(dist, phi_hat, o.rho), dist, phi_hat,
                                 parse_weights(o.weights));
    }
    const gs::GlobalRisk gamma =
        sub.count("--alpha") > 0
            ? gs::gamma_for_alpha(o.alpha, gs::posterior_median(base, "sigma2"), gs::posterior_median(base, "tau2"))
            : parse_gamma(o.gamma);
    gs::PosteriorSample init = base.samples.back();
    init.phi = phi_hat;
    const auto priors = priors_for(o, d);
    const auto cfg = chain_config(o, 2);
    log_phase("fitting restricted model, phi fixed at " + gs::detail::format_double(phi_hat) + ", gamma " +
              gamma.to_string());
    chain = gs::fit_restricted(d, priors, gs::build_profile(weights, gamma), phi_hat, init, cfg);
  } else if (o.model == "suppressed") {
    gs::require(!o.outliers.empty(), gs::ErrorCode::kValidation, "--model suppressed needs --outliers");
    const auto at_risk = load_at_risk(o.outliers, d);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < at_risk.size(); ++i) {
      if (at_risk[i]) ids.insert(d.record_ids()[i]);
    }
    fitted = gs::suppress(d, ids);
    const auto priors = priors_for(o, fitted);
    const auto cfg = chain_config(o, 3);
    log_phase("fitting suppressed model to " + std::to_string(fitted.size()) + " records");
    chain = gs::fit_unrestricted(fitted, priors, cfg, std::nullopt, std::nullopt, gs::ModelKind::kSuppressed);
    auto f = out.open("fitted_data.csv");
    gs::write_csv(f, fitted, gs::reload_schema(resolve_schema(o), fitted));
  } else {
    gs::fail(gs::ErrorCode::kValidation, "--model must be unrestricted, restricted or suppressed");
  }
  {
    auto f = out.open("chain.csv");
    gs::write_chain_csv(f, chain);
  }
  {
    auto f = out.open("chain_summary.json");
    f << gs::chain_summary_json(chain, o.level).dump(2) << '\n';
  }
  write_manifest(out, "fit", o, sub);
  return 0;
}

int cmd_outliers(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  double phi_hat = o.phi;
  if (!o.chain.empty()) phi_hat = gs::posterior_median(load_chain(o.chain), "phi");
  gs::require(phi_hat > 0.0, gs::ErrorCode::kValidation, "give --chain (posterior median phi) or a positive --phi");
  const auto dist = gs::pairwise_distances(d);
  const auto verdict = gs::detect_outliers_binary(dist, phi_hat, o.rho);
  const auto weights = gs::risk_weights(verdict, dist, phi_hat, parse_weights(o.weights));
  Outputs out{o.out_dir, {}};
  {
    auto f = out.open("outliers.csv");
    gs::write_verdict_csv(f, d, verdict, weights);
  }
  {
    json j{{"phi_hat", phi_hat}, {"rho", o.rho}, {"threshold_m", verdict.threshold_m}, {"count", verdict.count()}};
    std::vector<std::string> ids;
    for (auto i : verdict.flagged()) ids.push_back(d.record_ids()[static_cast<std::size_t>(i)]);
    j["at_risk_ids"] = ids;
    auto f = out.open("outliers.json");
    f << j.dump(2) << '\n';
  }
  log_phase(std::to_string(verdict.count()) + " records at risk (M = " +
            gs::detail::format_double(verdict.threshold_m) + ")");
  write_manifest(out, "outliers", o, sub);
  return 0;
}

int cmd_synthesize(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  gs::Chain chain = gs::thin_to(load_chain(o.chain), o.replicates);
  log_phase("drawing " + std::to_string(chain.size()) + " synthetic replicates");
  const auto syn = gs::synthesize(chain, d, gs::derive_seed(o.seed, 10), o.chain);
  Outputs out{o.out_dir, {}};
  {
    auto f = out.open("synthetic.csv");
    gs::write_synthetic_csv(f, syn, d);
  }
  write_manifest(out, "synthesize", o, sub);
  return 0;
}

int cmd_risk(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  const auto syn = load_synthetic(o.synthetic);
  gs::check_alignment(syn, d);
  const gs::Scale scale = parse_scale(o.scale);
  std::optional<std::vector<bool>> at_risk;
  if (!o.outliers.empty()) at_risk = load_at_risk(o.outliers, d);
  const auto* mask = at_risk ? &*at_risk : nullptr;
  const auto pct = gs::risk_within_percent(syn, d, o.pct, scale);
  const auto eps = gs::risk_within_epsilon(syn, d, o.epsilon, scale);
  Outputs out{o.out_dir, {}};
  {
    auto f = out.open("risk_pct.csv");
    gs::write_risk_csv(f, pct, d, mask);
  }
  {
    auto f = out.open("risk_epsilon.csv");
    gs::write_risk_csv(f, eps, d, mask);
  }
  const json j{{"percent", gs::to_json(pct, d, mask)}, {"epsilon", gs::to_json(eps, d, mask)}};
  {
    auto f = out.open("risk.json");
    f << j.dump(2) << '\n';
  }
  {
    auto f = out.open("risk.txt");
    std::vector<bool> all(static_cast<std::size_t>(d.size()), true);
    f << std::left << std::setw(32) << "criterion" << std::setw(12) << "mean";
    if (mask) f << std::setw(12) << "at-risk" << std::setw(12) << "other";
    f << '\n' << std::fixed << std::setprecision(4);
    for (const auto* r : {&pct, &eps}) {
      f << std::setw(32) << r->criterion << std::setw(12) << r->group_mean(all);
      if (mask) {
        std::vector<bool> rest(mask->size());
        for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = !(*mask)[i];
        f << std::setw(12) << r->group_mean(*mask) << std::setw(12) << r->group_mean(rest);
      }
      f << '\n';
    }
  }
  write_manifest(out, "risk", o, sub);
  return 0;
}

int cmd_utility(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  const auto syn = load_synthetic(o.synthetic);
  gs::check_alignment(syn, d);
  const auto cols = analyst_columns(o, d);
  const Eigen::MatrixXd design = gs::analyst_design(d, cols);
  const auto combined = gs::combine_all(gs::fit_analyst_regression(syn, design), gs::analyst_names(cols), o.level);
  const auto real = gs::ols_report(design, d.responses(), gs::analyst_names(cols), o.level);
  Outputs out{o.out_dir, {}};
  {
    json j{{"columns", cols}, {"synthetic", gs::to_json(combined)}, {"real_data", gs::to_json(real)}};
    auto f = out.open("utility.json");
    f << j.dump(2) << '\n';
  }
  {
    auto f = out.open("utility.txt");
    f << "synthetic (combined over " << syn.size() << " replicates)\n"
      << gs::to_text(combined) << "\nreal data\n"
      << gs::to_text(real);
  }
  write_manifest(out, "utility", o, sub);
  return 0;
}

int cmd_surface(const Options& o, const CLI::App& sub) {
  validate_common(o);
  const gs::GeoDataset d = load_data(o);
  const gs::Chain chain = load_chain(o.chain);
  gs::SurfaceOptions opt;
  opt.resolution = o.resolution;
  opt.max_draws = o.max_draws;
  if (o.quantity == "response") {
    opt.quantity = gs::SurfaceQuantity::kResponse;
    const Eigen::RowVectorXd means = d.covariates().colwise().mean();
    opt.covariates = [means](const gs::Location&) { return means; };
  } else if (o.quantity == "effect") {
    opt.quantity = gs::SurfaceQuantity::kSpatialEffect;
  } else {
    gs::fail(gs::ErrorCode::kValidation, "--quantity must be 'response' or 'effect'");
  }
  gs::require(o.resolution >= 2, gs::ErrorCode::kValidation, "--resolution must be at least 2");
  log_phase("predicting a " + std::to_string(o.resolution) + "x" + std::to_string(o.resolution) + " surface");
  const auto grid = gs::predict_surface(chain, d, opt);
  Outputs out{o.out_dir, {}};
  {
    auto f = out.open("surface.csv");
    gs::write_surface_csv(f, grid);
  }
  write_manifest(out, "surface", o, sub);
  return 0;
}

int cmd_experiment(const Options& o, const CLI::App& sub) {
  validate_common(o);
  std::optional<gs::GeoDataset> data;
  gs::ColumnSchema schema;
  std::optional<std::string> focus = o.focus.empty() ? std::nullopt : std::optional<std::string>(o.focus);
  if (!o.data.empty()) {
    schema = resolve_schema(o);
    data = gs::load_csv(o.data, schema);
    schema = gs::reload_schema(schema, *data);
  } else if (o.preset == "sf-onebed") {
    gs::warn("no --data given; running the sf-onebed pipeline on the built-in synthetic fixture");
    gs::SfLikeConfig cfg;
    cfg.seed = o.seed;
    data = gs::generate_sf_like(cfg);
    if (!focus) focus = data->record_ids()[static_cast<std::size_t>(gs::nearest_record(*data, {-122.48, 37.76}))];
  } else {
    gs::require(o.preset == "sim-sec4" || o.preset.empty(), gs::ErrorCode::kValidation, "--data or --preset required");
    gs::SimConfig cfg;
    cfg.n = o.n;
    cfg.sparse_fraction = o.sparse_fraction;
    cfg.seed = o.seed;
    log_phase("generating simulated data");
    data = gs::generate_simulated(cfg);
    schema = preset_schema("sim-sec4");
  }
  gs::ExperimentSettings st;
  st.chain = chain_config(o, 0);
  st.priors = priors_for(o, *data);
  st.rho = o.rho;
  st.gamma = parse_gamma(o.gamma);
  if (sub.count("--alpha") > 0) st.alpha = o.alpha;
  st.weights = parse_weights(o.weights);
  st.replicates = o.replicates;
  st.epsilon = o.epsilon;
  st.pct = o.pct;
  st.scale = parse_scale(o.scale);
  st.analyst_columns = analyst_columns(o, *data);
  st.focus_id = focus;
  st.run_suppressed = !o.no_suppressed;
  st.level = o.level;
  st.seed = o.seed;
  const auto result = gs::run_experiment(*data, st, log_phase);
  Outputs out{o.out_dir, {}};
  out.files = gs::write_experiment(result, out.dir, schema);
  std::cout << "Model parameters\n" << gs::table1_text(result) << "\nAnalyst regression on synthetic data\n"
            << gs::table2_text(result);
  write_manifest(out, "experiment", o, sub);
  return 0;
}

// ---------------------------------------------------------------------------
// Option registration

void add_io(CLI::App* s, Options& o, bool data = true) {
  if (data) {
    s->add_option("--data", o.data, "input CSV file (path)");
    s->add_option("--schema", o.schema, "JSON column schema (path); overrides the preset's columns");
  }
  s->add_option("--preset", o.preset, "study preset: sim-sec4 | sf-onebed")->capture_default_str();
  s->add_option("--out-dir", o.out_dir, "output directory (path)")->capture_default_str();
  s->add_option("--seed", o.seed, "master seed (integer); all randomness derives from it")->capture_default_str();
  s->add_option("--config", o.config, "flat key=value file mirroring flag names; flags take precedence (path)");
}

void add_chain(CLI::App* s, Options& o) {
  s->add_option("--burnin", o.burnin, "burn-in iterations (count)")->capture_default_str();
  s->add_option("--iters", o.iters, "post burn-in iterations (count)")->capture_default_str();
  s->add_option("--thin", o.thin, "keep every k-th post burn-in draw (count)")->capture_default_str();
  s->add_option("--phi-range", o.phi_range,
                "uniform prior range for phi as 'lower,upper' (inverse distance units) [data-scaled]");
  s->add_option("--phi-sd", o.phi_sd, "initial random-walk SD on log(phi) (log units)")->capture_default_str();
}

void add_risk(CLI::App* s, Options& o) {
  s->add_option("--rho", o.rho, "correlation level defining the outlier distance threshold (0-1)")
      ->capture_default_str();
  auto* g = s->add_option("--gamma", o.gamma, "global risk: nonnegative number or 'inf'")->capture_default_str();
  s->add_option("--alpha", o.alpha, "degree of smoothing (0 to sigma2/(sigma2+tau2)); converted to gamma")
      ->excludes(g);
  s->add_option("--weights", o.weights, "risk weights: binary | continuous")->capture_default_str();
}

void add_eval(CLI::App* s, Options& o) {
  s->add_option("--epsilon", o.epsilon, "absolute closeness tolerance (response units on --scale)")
      ->capture_default_str();
  s->add_option("--pct", o.pct, "relative closeness tolerance (fraction, 0.10 = 10%)")->capture_default_str();
  s->add_option("--scale", o.scale, "comparison scale: original (exp of response) | log")->capture_default_str();
}

void add_utility(CLI::App* s, Options& o) {
  s->add_option("--columns", o.columns, "analyst regressors beyond the intercept, comma separated [preset/model]");
  s->add_option("--level", o.level, "interval level (0-1)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  gs::warning_handler() = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
    g_warnings.emplace_back(msg);
  };
  Options o;
  CLI::App app{"Spatial synthetic data with differential smoothing of outliers"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate a simulated dataset");
  add_io(sim, o, false);
  sim->add_option("--n", o.n, "number of records (count)")->capture_default_str();
  sim->add_option("--sparse-fraction", o.sparse_fraction, "share of points outside the dense block (0-1)")
      ->capture_default_str();

  auto* fit = app.add_subcommand("fit", "fit the unrestricted, restricted or suppressed model");
  add_io(fit, o);
  add_chain(fit, o);
  add_risk(fit, o);
  fit->add_option("--model", o.model, "unrestricted | restricted | suppressed")->capture_default_str();
  fit->add_option("--chain", o.chain, "unrestricted chain CSV (restricted model: phi and start values) (path)");
  fit->add_option("--outliers", o.outliers, "outlier CSV giving risk weights / records to suppress (path)");
  fit->add_option("--level", o.level, "interval level for the summary (0-1)")->capture_default_str();

  auto* outl = app.add_subcommand("outliers", "flag spatial outliers");
  add_io(outl, o);
  add_risk(outl, o);
  outl->add_option("--chain", o.chain, "chain CSV; phi is its posterior median (path)");
  outl->add_option("--phi", o.phi, "decay parameter when no chain is given (inverse distance units)");

  auto* syn = app.add_subcommand("synthesize", "draw synthetic responses from a chain");
  add_io(syn, o);
  syn->add_option("--chain", o.chain, "chain CSV (path)");
  syn->add_option("--L", o.replicates, "number of synthetic datasets (count; 0 = every retained draw)")
      ->capture_default_str();

  auto* risk = app.add_subcommand("risk", "disclosure risk of a synthetic collection");
  add_io(risk, o);
  add_eval(risk, o);
  risk->add_option("--synthetic", o.synthetic, "synthetic CSV (path)");
  risk->add_option("--outliers", o.outliers, "outlier CSV for at-risk grouping (path)");

  auto* util = app.add_subcommand("utility", "combined analyst regression on a synthetic collection");
  add_io(util, o);
  add_utility(util, o);
  util->add_option("--synthetic", o.synthetic, "synthetic CSV (path)");

  auto* surf = app.add_subcommand("surface", "posterior mean prediction surface on a grid");
  add_io(surf, o);
  surf->add_option("--chain", o.chain, "chain CSV (path)");
  surf->add_option("--resolution", o.resolution, "grid points per axis (count)")->capture_default_str();
  surf->add_option("--quantity", o.quantity, "response (covariates at their means) | effect")->capture_default_str();
  surf->add_option("--max-draws", o.max_draws, "evenly spaced subset of draws (count; 0 = all)")
      ->capture_default_str();

  auto* expt = app.add_subcommand("experiment", "full three-model comparison with tables");
  add_io(expt, o);
  add_chain(expt, o);
  add_risk(expt, o);
  add_eval(expt, o);
  add_utility(expt, o);
  expt->add_option("--L", o.replicates, "number of synthetic datasets (count; 0 = every retained draw)")
      ->capture_default_str();
  expt->add_option("--n", o.n, "records to simulate when no --data is given (count)")->capture_default_str();
  expt->add_option("--sparse-fraction", o.sparse_fraction, "share of simulated points outside the dense block (0-1)")
      ->capture_default_str();
  expt->add_option("--focus", o.focus, "record id tracked in the tables [last record]");
  expt->add_flag("--no-suppressed", o.no_suppressed, "skip the suppressed-data refit");

  std::vector<std::string> args(argv + 1, argv + argc);
  int code = 0;
  try {
    auto cfg_it = std::find_if(args.begin(), args.end(),
                               [](const std::string& a) { return a == "--config" || a.rfind("--config=", 0) == 0; });
    if (cfg_it != args.end() && !args.empty()) {
      std::string path;
      if (*cfg_it == "--config") {
        gs::require(cfg_it + 1 != args.end(), gs::ErrorCode::kValidation, "--config needs a path");
        path = *(cfg_it + 1);
      } else {
        path = cfg_it->substr(9);
      }
      auto extra = load_config_args(path, args);
      args.insert(args.begin() + 1, extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"code", "usage"}, {"exit_code", kUsageExit}, {"message", e.what()}}}}.dump() << '\n';
    return kUsageExit;
  } catch (const gs::Error& e) {
    std::cerr << json{{"error",
                       {{"code", std::string(gs::error_code_name(e.code()))},
                        {"exit_code", static_cast<int>(e.code())},
                        {"message", e.what()}}}}
                     .dump()
              << '\n';
    return static_cast<int>(e.code());
  }

  try {
    if (*sim) code = cmd_simulate(o, *sim);
    if (*fit) code = cmd_fit(o, *fit);
    if (*outl) code = cmd_outliers(o, *outl);
    if (*syn) code = cmd_synthesize(o, *syn);
    if (*risk) code = cmd_risk(o, *risk);
    if (*util) code = cmd_utility(o, *util);
    if (*surf) code = cmd_surface(o, *surf);
    if (*expt) code = cmd_experiment(o, *expt);
  } catch (const gs::Error& e) {
    std::cerr << json{{"error",
                       {{"code", std::string(gs::error_code_name(e.code()))},
                        {"exit_code", static_cast<int>(e.code())},
                        {"message", e.what()}}}}
                     .dump()
              << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "unexpected"}, {"exit_code", kUnexpectedExit}, {"message", e.what()}}}}.dump()
              << '\n';
    return kUnexpectedExit;
  }
  return code;
}
