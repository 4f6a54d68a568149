#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "geosynth/risk.hpp"

namespace gs = geosynth;

TEST(Outliers, FlagsIsolatedPoint) {
  std::vector<gs::Location> pts{{0, 0}, {0.01, 0}, {0, 0.02}, {1, 1}};
  const auto v = gs::detect_outliers_binary(gs::pairwise_distances(pts), 12.7, 0.20);
  EXPECT_NEAR(v.threshold_m, -std::log(0.2) / 12.7, 1e-15);
  EXPECT_EQ(v.at_risk, (std::vector<bool>{false, false, false, true}));
  EXPECT_EQ(v.count(), 1u);
  EXPECT_EQ(v.flagged(), (std::vector<Eigen::Index>{3}));
  EXPECT_EQ(v.weights(), Eigen::Vector4d(0, 0, 0, 1));
}

TEST(Outliers, BoundaryIsInclusive) {
  const double m = gs::corr_inversion_threshold(5.0, 0.2);
  std::vector<gs::Location> pts{{0, 0}, {m, 0}};
  const auto v = gs::detect_outliers_binary(gs::pairwise_distances(pts), 5.0, 0.2);
  EXPECT_EQ(v.nn_distance[0], m);
  EXPECT_TRUE(v.at_risk[0]);
  EXPECT_TRUE(v.at_risk[1]);
}

TEST(Outliers, CoincidentPairNeverFlagged) {
  std::vector<gs::Location> pts{{0.3, 0.3}, {0.3, 0.3}};
  for (double phi : {0.01, 1.0, 1e6}) {
    const auto v = gs::detect_outliers_binary(gs::pairwise_distances(pts), phi);
    EXPECT_EQ(v.nn_distance[0], 0.0);
    EXPECT_EQ(v.count(), 0u);
  }
}

TEST(Outliers, KernelOverload) {
  std::vector<gs::Location> pts{{0, 0}, {0.5, 0}, {0.52, 0}};
  const auto d = gs::pairwise_distances(pts);
  const auto a = gs::detect_outliers_binary(d, gs::ExponentialKernel(4.0, 12.7));
  const auto b = gs::detect_outliers_binary(d, 12.7);
  EXPECT_EQ(a.at_risk, b.at_risk);
}

TEST(Weights, Continuous) {
  const double phi = 12.7;
  const double m = gs::corr_inversion_threshold(phi, 0.2);
  std::vector<gs::Location> pts{{0, 0}, {0, 0}, {5, 0}, {5 + m, 0}};
  const Eigen::VectorXd a = gs::continuous_weights(gs::pairwise_distances(pts), phi);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_NEAR(a[2], 0.8, 1e-15);
  // Outlier more than 0.26 from anyone.
  std::vector<gs::Location> q{{0.51, 0.01}, {0.51, 0.2701}, {0.51, 0.28}};
  const Eigen::VectorXd aq = gs::continuous_weights(gs::pairwise_distances(q), phi);
  EXPECT_GT(aq[0], 1.0 - std::exp(-3.302));
}

TEST(Shrinkage, AlphaAnchors) {
  const double s2 = 4.0, t2 = 0.0625;
  EXPECT_EQ(gs::alpha_for_gamma(gs::GlobalRisk::finite(0.0), s2, t2), s2 / (s2 + t2));
  EXPECT_NEAR(gs::alpha_for_gamma(gs::GlobalRisk::finite(0.0), s2, t2), 0.9846, 1e-4);
  EXPECT_EQ(gs::alpha_for_gamma(gs::GlobalRisk::finite(s2 / t2 - 1.0), s2, t2), 0.5);
  EXPECT_EQ(gs::alpha_for_gamma(gs::GlobalRisk::infinite(), s2, t2), 0.0);
}

TEST(Shrinkage, GammaAnchors) {
  const double s2 = 4.0, t2 = 0.0625;
  EXPECT_EQ(gs::gamma_for_alpha(s2 / (s2 + t2), s2, t2), gs::GlobalRisk::finite(0.0));
  EXPECT_EQ(gs::gamma_for_alpha(0.5, s2, t2).value(), s2 / t2 - 1.0);
  EXPECT_TRUE(gs::gamma_for_alpha(0.0, s2, t2).is_infinite());
  EXPECT_THROW(gs::gamma_for_alpha(0.99, s2, t2), gs::Error);
  EXPECT_THROW(gs::gamma_for_alpha(-0.1, s2, t2), gs::Error);
  EXPECT_THROW(gs::alpha_for_gamma(gs::GlobalRisk::finite(1.0), 0.0, t2), gs::Error);
}

TEST(Shrinkage, RoundTripGrid) {
  const double s2 = 3.83, t2 = 0.06;
  const double top = gs::max_alpha(s2, t2);
  for (int k = 0; k <= 999; ++k) {
    const double alpha = top * k / 999.0;
    const double back = gs::alpha_for_gamma(gs::gamma_for_alpha(alpha, s2, t2), s2, t2);
    EXPECT_NEAR(back, alpha, 1e-12) << "alpha " << alpha;
  }
  for (int k = 0; k < 1000; ++k) {
    const double g = std::pow(10.0, -4.0 + 10.0 * k / 999.0);
    const double back = gs::gamma_for_alpha(gs::alpha_for_gamma(gs::GlobalRisk::finite(g), s2, t2), s2, t2).value();
    EXPECT_NEAR(back, g, 1e-12 * std::max(1.0, g) * 100) << "gamma " << g;
  }
}

TEST(GlobalRiskValue, Basics) {
  EXPECT_THROW(gs::GlobalRisk::finite(-1.0), gs::Error);
  EXPECT_THROW(gs::GlobalRisk::finite(std::numeric_limits<double>::infinity()), gs::Error);
  EXPECT_EQ(gs::GlobalRisk::infinite().to_string(), "inf");
  EXPECT_EQ(gs::GlobalRisk::finite(2.5).to_string(), "2.5");
  EXPECT_TRUE(std::isinf(gs::GlobalRisk::infinite().value()));
}

TEST(Profile, Diagonal) {
  const Eigen::Vector3d a(0.0, 1.0, 0.5);
  const auto inf = gs::build_profile(a, gs::GlobalRisk::infinite());
  EXPECT_EQ(inf.a_diag[0], 1.0);
  EXPECT_EQ(inf.a_diag[1], 0.0);
  EXPECT_EQ(inf.a_diag[2], 0.0);
  const auto three = gs::build_profile(a, gs::GlobalRisk::finite(3.0));
  EXPECT_EQ(three.a_diag[1], 0.5);
  EXPECT_DOUBLE_EQ(three.a_diag[2], 1.0 / std::sqrt(2.5));
  EXPECT_TRUE(gs::build_profile(a, gs::GlobalRisk::finite(0.0)).is_identity());
  EXPECT_TRUE(gs::RiskProfile::identity(4).is_identity());
  EXPECT_THROW(gs::build_profile(Eigen::Vector2d(0.0, 1.5), gs::GlobalRisk::infinite()), gs::Error);
}

TEST(VerdictCsv, RoundTrip) {
  std::vector<gs::Location> pts{{0, 0}, {0.01, 0}, {1, 1}};
  const auto d = gs::GeoDataset::intercept_only(pts, Eigen::Vector3d(1, 2, 3));
  const auto dist = gs::pairwise_distances(d);
  const auto v = gs::detect_outliers_binary(dist, 10.0);
  const Eigen::VectorXd w = gs::continuous_weights(dist, 10.0);
  std::stringstream buf;
  gs::write_verdict_csv(buf, d, v, w);
  const auto rows = gs::read_verdict_csv(buf);
  ASSERT_EQ(rows.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].record_id, d.record_ids()[i]);
    EXPECT_EQ(rows[i].nn_distance, v.nn_distance[i]);
    EXPECT_EQ(rows[i].a, w[i]);
    EXPECT_EQ(rows[i].at_risk, v.at_risk[i]);
  }
}
