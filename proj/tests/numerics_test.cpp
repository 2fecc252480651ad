#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cumlab/numerics.hpp"

namespace cumlab {
namespace {

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  Quadrature q = gauss_legendre(8);
  for (int k = 0; k <= 15; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], k);
    double expect = k % 2 ? 0.0 : 2.0 / (k + 1);
    EXPECT_NEAR(s, expect, 1e-14) << k;
  }
}

TEST(GaussHermite, GaussianMoments) {
  Quadrature q = gauss_hermite_normal(20);
  double df = 1.0;  // (k-1)!!
  for (int k = 0; k <= 38; k += 2) {
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], k);
    EXPECT_NEAR(s / df, 1.0, 1e-10) << k;
    df *= k + 1;
  }
}

TEST(LogSumExp, HandlesLargeAndInfinite) {
  std::vector<double> xs = {1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(xs), 1000.0 + std::log(2.0), 1e-12);
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> ys = {ninf, 0.0};
  EXPECT_DOUBLE_EQ(log_sum_exp(ys), 0.0);
  EXPECT_DOUBLE_EQ(log_add(ninf, 2.0), 2.0);
}

TEST(LogBinom, SmallValues) {
  EXPECT_NEAR(std::exp(log_binom(10, 3)), 120.0, 1e-9);
  EXPECT_EQ(log_binom(3, 4), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(log_double_factorial(7), std::log(105.0), 1e-14);
  EXPECT_EQ(log_double_factorial(-1), 0.0);
}

TEST(LogCosh, MatchesDirect) {
  for (double x : {-30.0, -1.5, 0.0, 0.3, 12.0})
    EXPECT_NEAR(log_cosh(x), std::log(std::cosh(x)), 1e-12);
  EXPECT_NEAR(log_cosh(1000.0), 1000.0 - std::numbers::ln2, 1e-9);
}

}  // namespace
}  // namespace cumlab
