#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "geosynth/evaluation.hpp"
#include "oracles.hpp"

namespace gs = geosynth;

namespace {

struct WarningCapture {
  std::vector<std::string> messages;
  gs::WarningHandler saved;
  WarningCapture() : saved(gs::warning_handler()) {
    gs::warning_handler() = [this](std::string_view m) { messages.emplace_back(m); };
  }
  ~WarningCapture() { gs::warning_handler() = saved; }
};

gs::SyntheticCollection collection(const gs::GeoDataset& d, std::vector<Eigen::VectorXd> reps) {
  gs::SyntheticCollection s;
  s.record_ids = d.record_ids();
  s.replicates = std::move(reps);
  return s;
}

}  // namespace

TEST(Risk, PercentOnOriginalScaleCountsByHand) {
  // truths exp(1), exp(2); draws on the log scale.
  const auto d = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}}, Eigen::Vector2d(1.0, 2.0));
  const double in = std::log(1.05);   // 5% above
  const double out = std::log(1.2);   // 20% above
  const auto syn = collection(d, {Eigen::Vector2d(1.0 + in, 2.0 + out), Eigen::Vector2d(1.0 + out, 2.0 + out),
                                  Eigen::Vector2d(1.0 - in, 2.0), Eigen::Vector2d(1.0, 2.0 + in)});
  const auto r = gs::risk_within_percent(syn, d, 0.10, gs::Scale::kOriginal);
  EXPECT_DOUBLE_EQ(r.fraction[0], 0.75);
  EXPECT_DOUBLE_EQ(r.fraction[1], 0.5);
  EXPECT_EQ(r.scale, gs::Scale::kOriginal);
  const auto logs = gs::risk_within_percent(syn, d, 0.10, gs::Scale::kLog);
  // On the log scale 10% of 2 is 0.2, wide enough for log(1.2).
  EXPECT_DOUBLE_EQ(logs.fraction[1], 1.0);
}

TEST(Risk, EpsilonLimits) {
  const auto d = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}}, Eigen::Vector2d(10.0, 11.0));
  const auto syn = collection(d, {Eigen::Vector2d(3.0, 20.0), Eigen::Vector2d(10.0, 11.0)});
  const auto huge = gs::risk_within_epsilon(syn, d, std::numeric_limits<double>::max(), gs::Scale::kLog);
  EXPECT_EQ(huge.fraction, Eigen::Vector2d(1.0, 1.0));
  const auto exact = collection(d, {d.responses(), d.responses()});
  EXPECT_EQ(gs::risk_within_epsilon(exact, d, 1e-300, gs::Scale::kOriginal).fraction, Eigen::Vector2d(1.0, 1.0));
  EXPECT_EQ(gs::risk_within_epsilon(syn, d, 1.0, gs::Scale::kLog).fraction, Eigen::Vector2d(0.5, 0.5));
  // Dollar tolerance on the original scale.
  const auto money = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}}, Eigen::Vector2d(std::log(50000.0), std::log(9e5)));
  const auto ms = collection(money, {Eigen::Vector2d(std::log(59000.0), std::log(9.2e5)),
                                     Eigen::Vector2d(std::log(61000.0), std::log(9.05e5))});
  const auto rm = gs::risk_within_epsilon(ms, money, 10000.0, gs::Scale::kOriginal);
  EXPECT_DOUBLE_EQ(rm.fraction[0], 0.5);
  EXPECT_DOUBLE_EQ(rm.fraction[1], 0.5);
  EXPECT_THROW(gs::risk_within_epsilon(ms, money, 0.0, gs::Scale::kLog), gs::Error);
}

TEST(Risk, ZeroTruthExcludedWithWarning) {
  const auto d = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}, {2, 0}}, Eigen::Vector3d(0.0, 2.0, 3.0));
  const auto syn = collection(d, {Eigen::Vector3d(0.0, 2.0, 3.0)});
  WarningCapture cap;
  const auto r = gs::risk_within_percent(syn, d, 0.1, gs::Scale::kLog);
  EXPECT_FALSE(r.included[0]);
  EXPECT_TRUE(std::isnan(r.fraction[0]));
  EXPECT_EQ(cap.messages.size(), 1u);
  EXPECT_DOUBLE_EQ(r.group_mean({true, true, true}), 1.0);
  EXPECT_TRUE(std::isnan(r.group_mean({true, false, false})));
}

TEST(Risk, MisalignedCollectionRejected) {
  const auto d = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}}, Eigen::Vector2d(1, 2));
  auto syn = collection(d, {Eigen::Vector2d(1, 2)});
  syn.record_ids = {"0", "9"};
  EXPECT_THROW(gs::risk_within_percent(syn, d, 0.1, gs::Scale::kLog), gs::Error);
}

TEST(Risk, ComparisonAndReduction) {
  gs::RiskReport base, treated;
  base.fraction = Eigen::Vector4d(1.0, 0.5, 0.2, 0.0);
  treated.fraction = Eigen::Vector4d(0.25, 0.5, 0.1, 0.0);
  base.included = treated.included = {true, true, true, true};
  const auto c = gs::compare_risk(base, treated, {true, false, false, false});
  EXPECT_DOUBLE_EQ(c.reduction[0], 0.75);
  EXPECT_DOUBLE_EQ(c.reduction[1], 0.0);
  EXPECT_DOUBLE_EQ(c.reduction[2], 0.5);
  EXPECT_TRUE(std::isnan(c.reduction[3]));
  EXPECT_DOUBLE_EQ(c.at_risk_reduction(), 0.75);
  EXPECT_NEAR(c.non_at_risk_baseline, 0.7 / 3.0, 1e-15);
  EXPECT_NEAR(c.non_at_risk_reduction(), 1.0 - 0.6 / 0.7, 1e-15);
  const auto j = gs::to_json(c);
  EXPECT_DOUBLE_EQ(j["at_risk_reduction"].get<double>(), 0.75);
  EXPECT_THROW(gs::compare_risk(base, treated, {true}), gs::Error);
}

TEST(Ols, ExactFitHasZeroVariance) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 5;
  const Eigen::Vector2d c(0.5, -1.25);
  const auto f = gs::ols(x, x * c);
  EXPECT_NEAR(f.coef[0], 0.5, 1e-14);
  EXPECT_NEAR(f.coef[1], -1.25, 1e-14);
  EXPECT_NEAR(f.variance[0], 0.0, 1e-28);
}

TEST(Ols, NormalEquationsOracle) {
  Eigen::MatrixXd x(5, 3);
  x << 1, 0.2, 1.1, 1, 0.5, -0.3, 1, 0.9, 0.4, 1, 1.3, 2.2, 1, 2.0, 0.1;
  const Eigen::VectorXd y = (Eigen::VectorXd(5) << 1.0, 1.7, 2.2, 3.1, 3.9).finished();
  const auto f = gs::ols(x, y);
  const auto ref = oracle::normal_equations(oracle::to_mat(x), oracle::to_vec(y));
  EXPECT_LT(checks::scaled_gap(f.coef, ref.coef), 1e-10);
  EXPECT_LT(checks::scaled_gap(f.variance, ref.variance), 1e-10);
  EXPECT_EQ(f.dof, 2);
}

TEST(Ols, Errors) {
  EXPECT_THROW(gs::ols(Eigen::MatrixXd::Ones(2, 2), Eigen::Vector2d(1, 2)), gs::Error);
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(gs::ols(x, Eigen::Vector4d(1, 2, 3, 4)), gs::Error);
  EXPECT_THROW(gs::ols(x, Eigen::Vector3d(1, 2, 3)), gs::Error);
}

TEST(Combine, HandExampleAndDegenerateCase) {
  const auto r = checks::combination_rules();
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Combine, EqualEstimates) {
  const std::vector<double> q(5, 0.25), u(5, 0.01);
  const auto c = gs::combine_partially_synthetic(q, u);
  EXPECT_EQ(c.qbar, 0.25);
  EXPECT_EQ(c.b, 0.0);
  EXPECT_EQ(c.total_variance, 0.01);
}

TEST(Combine, StudentTInterval) {
  const std::vector<double> q{1, 2, 3}, u{1, 1, 1};
  const auto c = gs::combine_partially_synthetic(q, u, 0.95);
  // t quantile 0.975 with 32 degrees of freedom.
  EXPECT_NEAR((c.upper - c.qbar) / std::sqrt(c.total_variance), 2.0369333434601, 1e-9);
  EXPECT_NEAR(c.qbar - c.lower, c.upper - c.qbar, 1e-14);
  const std::vector<double> neg{-1.0, 1.0};
  EXPECT_THROW(gs::combine_partially_synthetic(q, std::vector<double>{1, -1, 1}), gs::Error);
  EXPECT_THROW(gs::combine_partially_synthetic(q, neg), gs::Error);
}

TEST(Combine, PerReplicateRegression) {
  const int n = 12;
  Eigen::MatrixXd x(n, 2);
  x.col(0).setOnes();
  x.col(1) = checks::normals(n, 3);
  const auto d = gs::GeoDataset::intercept_only(checks::scatter(n, 2), checks::normals(n, 4));
  std::vector<Eigen::VectorXd> reps;
  for (int l = 0; l < 3; ++l) reps.push_back(x * Eigen::Vector2d(1.0 + l, 0.5) + 0.01 * checks::normals(n, 10 + l));
  const auto syn = collection(d, reps);
  const auto est = gs::fit_analyst_regression(syn, x);
  ASSERT_EQ(est.q.rows(), 3);
  for (int l = 0; l < 3; ++l) {
    const auto ref = oracle::normal_equations(oracle::to_mat(x), oracle::to_vec(reps[static_cast<std::size_t>(l)]));
    EXPECT_NEAR(est.q(l, 0), ref.coef[0], 1e-10);
    EXPECT_NEAR(est.u(l, 1), ref.variance[1], 1e-12);
  }
  const auto rep = gs::combine_all(est, {"beta_0", "beta_1"});
  EXPECT_NEAR(rep.estimates[0].qbar, 2.0, 0.05);
  EXPECT_NEAR(rep.estimates[0].b, 1.0, 0.05);
  EXPECT_THROW(gs::combine_all(est, {"only_one"}), gs::Error);
  const auto j = gs::to_json(rep);
  EXPECT_TRUE(j["parameters"].contains("beta_1"));
  EXPECT_NE(gs::to_text(rep).find("beta_1"), std::string::npos);
}

TEST(Combine, RealDataReportAndOverlap) {
  Eigen::MatrixXd x(6, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 0.1, 1.2, 1.9, 3.2, 3.9, 5.1).finished();
  const auto r = gs::ols_report(x, y, {"beta_0", "beta_1"});
  EXPECT_EQ(r.estimates[1].dof, 4.0);
  EXPECT_LT(r.estimates[1].lower, r.estimates[1].qbar);
  gs::CombinedEstimate a, b;
  a.lower = 0.0;
  a.upper = 1.0;
  b.lower = 1.0;
  b.upper = 2.0;
  EXPECT_TRUE(gs::intervals_overlap(a, b));
  b.lower = 1.0001;
  EXPECT_FALSE(gs::intervals_overlap(a, b));
}

TEST(Reports, RiskJsonAndCsv) {
  const auto d = gs::GeoDataset::intercept_only({{0, 0}, {1, 0}}, Eigen::Vector2d(1.0, 2.0));
  const auto syn = collection(d, {Eigen::Vector2d(1.0, 5.0), Eigen::Vector2d(1.0, 2.0)});
  const auto r = gs::risk_within_epsilon(syn, d, 0.5, gs::Scale::kLog);
  const std::vector<bool> at_risk{false, true};
  const auto j = gs::to_json(r, d, &at_risk);
  EXPECT_DOUBLE_EQ(j["at_risk_mean"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["non_at_risk_mean"].get<double>(), 1.0);
  EXPECT_EQ(j["scale"], "log");
  std::ostringstream out;
  gs::write_risk_csv(out, r, d, &at_risk);
  EXPECT_EQ(out.str(), "record_id,fraction,at_risk\n0,1,0\n1,0.5,1\n");
}
