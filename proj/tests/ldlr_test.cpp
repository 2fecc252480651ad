#include <gtest/gtest.h>

#include <cmath>

#include "cumlab/ldlr.hpp"
#include "cumlab/rng.hpp"

namespace cumlab {
namespace {

const GDistribution kRad = GDistribution::rademacher();
const GDistribution kUni = GDistribution::uniform();

TEST(TCoeff, Examples) {
  for (auto g : {kRad, kUni}) {
    EXPECT_EQ(t_coeff(0, 3.0, g), 1.0);
    EXPECT_EQ(t_coeff(2, 3.0, g), 0.0);
    for (int m = 1; m < 20; m += 2) EXPECT_EQ(t_coeff(m, 3.0, g), 0.0);
  }
  EXPECT_NEAR(t_coeff(4, 10.0, kRad), std::pow(10.0 / 11.0, 2) * -2.0, 1e-15);
}

TEST(LowerBound, Examples) {
  EXPECT_EQ(ldlr_lower_log(5, 3, 3, 10.0, -2.0), 0.0);
  double c = 100.0 * 2.0 / (std::sqrt(24.0) * 4.0 * 121.0);
  EXPECT_NEAR(ldlr_lower_log(1, 2, 4, 10.0, -2.0), std::log(1 + 3 * c * c), 1e-15);
  EXPECT_THROW(ldlr_lower_log(1, 2, 8, 10.0, -2.0), std::invalid_argument);
}

TEST(LowerBound, MonotoneInDnKappa) {
  double prev = 0;
  for (int D = 0; D <= 40; ++D) {
    double v = ldlr_lower_log(20, 5, D, 3.0, -2.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_LE(ldlr_lower_log(10, 5, 16, 3.0, -2.0), ldlr_lower_log(11, 5, 16, 3.0, -2.0));
  EXPECT_LE(ldlr_lower_log(10, 5, 16, 3.0, -1.2), ldlr_lower_log(10, 5, 16, 3.0, -2.0));
}

TEST(UpperBound, ZeroDegreeAndAboveLower) {
  EXPECT_EQ(ldlr_upper_log(10, 10, 0, 5.0, kRad), 0.0);
  Rng r(51);
  for (int t = 0; t < 100; ++t) {
    long long d = 1 + static_cast<long long>(r.below(200));
    int D = static_cast<int>(r.below(40));
    long long n = D / 4 + static_cast<long long>(r.below(1000));
    double beta = 20 * r.uniform();
    EXPECT_LE(ldlr_lower_log(n, d, D, beta, -2.0), ldlr_upper_log(n, d, D, beta, kRad) + 1e-12)
        << n << " " << d << " " << D << " " << beta;
  }
}

TEST(Asymptotics, Examples) {
  const double beta = 10.0, k = -2.0;
  auto a = ldlr_asymptotics(400.0, 20.0, 4, beta, k, 1.0);
  double c = beta * beta * k / ((1 + beta) * (1 + beta));
  EXPECT_NEAR(a.log_lower, std::log(c * c), 1e-12);

  double prev = -1e300;
  for (double d = 100; d <= 1e6; d *= 10) {
    double v = ldlr_asymptotics(std::pow(d, 2.5), d, 16, beta, k, 1.0).log_lower;
    EXPECT_GT(v, prev);
    prev = v;
  }
  prev = 1e300;
  for (double d = 100; d <= 1e12; d *= 10) {
    double v = ldlr_asymptotics(std::pow(d, 1.5), d, 8, beta, k, 1.0).log_upper;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_GE(prev, 0.0);
}

TEST(ExactSmall, TrivialDegrees) {
  EXPECT_EQ(ldlr_exact_small_log(3, 4, 0, 10.0, kRad), 0.0);
  for (int n = 1; n <= 3; ++n)
    for (int d = 1; d <= 4; ++d) EXPECT_EQ(ldlr_exact_small_log(n, d, 3, 10.0, kRad), 0.0);
}

TEST(ExactSmall, HandEnumeration) {
  // Admissible rows of degree 4 over two columns: (4,0), (0,4), (2,2).
  double t4 = std::pow(10.0 / 11.0, 2) * -2.0;
  double expect = 1 + t4 * t4 / 16.0 * (1.0 / 24 + 1.0 / 24 + 1.0 / 4);
  EXPECT_NEAR(ldlr_exact_small_log(1, 2, 4, 10.0, kRad), std::log(expect), 1e-15);
  EXPECT_NEAR(expect, 1 + std::pow(10.0 / 11.0, 4) / 12.0, 1e-15);
}

TEST(ExactSmall, ParityRuleMatchesFullPriorAverage) {
  for (auto g : {kRad, kUni})
    for (int n = 1; n <= 3; ++n)
      for (int d = 1; d <= 4; ++d)
        for (int D : {4, 6, 8}) {
          double a = ldlr_exact_small_log(n, d, D, 5.0, g, PriorAverage::ParityRule);
          double b = ldlr_exact_small_log(n, d, D, 5.0, g, PriorAverage::FullEnumeration);
          EXPECT_NEAR(a, b, 1e-12);
        }
}

TEST(ExactSmall, BudgetGuard) {
  EXPECT_THROW(ldlr_exact_small_log(3, 4, 8, 1.0, kRad, PriorAverage::ParityRule, 10), BudgetExceeded);
  try {
    ldlr_exact_small_log(3, 4, 8, 1.0, kRad, PriorAverage::ParityRule, 10);
  } catch (const BudgetExceeded& e) {
    EXPECT_EQ(e.count(), ldlr_exact_count(3, 4, 8, kRad));
    EXPECT_GT(e.count(), 10u);
  }
}

TEST(Sandwich, SmallInstances) {
  for (auto g : {kRad, kUni})
    for (double beta : {1.0, 10.0})
      for (int n = 1; n <= 3; ++n)
        for (int d = 1; d <= 4; ++d)
          for (int D = 0; D <= 8; ++D) {
            double ex = ldlr_exact_small_log(n, d, D, beta, g);
            EXPECT_LE(ex, ldlr_upper_log(n, d, D, beta, g) + 1e-12) << n << d << D << beta;
            if (D / 4 <= n) EXPECT_LE(ldlr_lower_log(n, d, D, beta, g.kappa4()), ex + 1e-12);
          }
}

TEST(Wishart, Examples) {
  EXPECT_EQ(ldlr_wishart_limit(0, 3.0, 1.0), 1.0);
  for (int D : {0, 5, 100}) EXPECT_EQ(ldlr_wishart_limit(D, 0.0, 2.0), 1.0);
  // beta^2 < gamma: series tends to (1 - beta^2/gamma)^{-1/2}.
  EXPECT_NEAR(ldlr_wishart_limit(2000, 0.9, 1.0), 1.0 / std::sqrt(1 - 0.81), 1e-9);
  EXPECT_GT(ldlr_wishart_limit(400, 1.2, 1.0), 100 * ldlr_wishart_limit(200, 1.2, 1.0));
}

TEST(Wishart, TransitionAtSqrtGamma) {
  for (double gamma : {1.0, 4.0}) {
    double bc = std::sqrt(gamma);
    double below = ldlr_wishart_limit(400, 0.99 * bc, gamma) / ldlr_wishart_limit(200, 0.99 * bc, gamma);
    double above = ldlr_wishart_limit(400, 1.01 * bc, gamma) / ldlr_wishart_limit(200, 1.01 * bc, gamma);
    EXPECT_LT(below, 1.01);
    EXPECT_GT(above, 2.0);
  }
}

TEST(BoundReport, CsvRow) {
  BoundReport r = make_bound_report(1, 2, 4, 10.0, kRad);
  ASSERT_TRUE(r.log_exact.has_value());
  ASSERT_TRUE(r.log_lower.has_value());
  EXPECT_LE(*r.log_lower, *r.log_exact);
  EXPECT_LE(*r.log_exact, r.log_upper);
  EXPECT_EQ(BoundReport::csv_header(), "n,d,D,beta,g,log_lower,log_upper,log_exact,asym_lower,asym_upper");
  std::string row = r.csv_row();
  EXPECT_EQ(row.rfind("1,2,4,10,rademacher,", 0), 0u);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
  BoundReport big = make_bound_report(1000, 1000, 12, 10.0, kRad);
  EXPECT_FALSE(big.log_exact.has_value());
  EXPECT_NE(big.csv_row().find(",,"), std::string::npos);
  BoundReport thin = make_bound_report(1, 2, 8, 10.0, kRad);
  EXPECT_FALSE(thin.log_lower.has_value());
  EXPECT_EQ(thin.csv_row().rfind("1,2,8,10,rademacher,,", 0), 0u);
}

}  // namespace
}  // namespace cumlab
