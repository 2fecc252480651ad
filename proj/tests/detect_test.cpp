#include <gtest/gtest.h>

#include <cmath>

#include "cumlab/datagen.hpp"
#include "cumlab/detect.hpp"
#include "cumlab/likelihood.hpp"

namespace cumlab {
namespace {

const GDistribution kRad = GDistribution::rademacher();

RowMatrix spiked_rows(const Eigen::VectorXd& u, int n, double beta, std::uint64_t seed) {
  ModelSpec s;
  s.kind = ModelKind::SpikedCumulant;
  s.d = static_cast<int>(u.size());
  s.beta = beta;
  s.g = kRad;
  s.spike = u;
  return sample_class(s, n, Rng(seed));
}

double best_overlap_score(int d, double a, double beta, int* best_k) {
  // Rows a*u/sqrt(d) give projection a*k/d for a candidate with u.v = k.
  double best = -1e300;
  for (int k = -d; k <= d; k += 2) {
    double l = projection_log_likelihood(a * k / d, beta, kRad);
    if (l > best + 1e-12) {
      best = l;
      *best_k = std::abs(k);
    }
  }
  return best;
}

TEST(Search, AlignedData) {
  const int d = 8;
  Rng rng(3);
  Eigen::VectorXd u = draw_spike(d, rng);
  for (double a : {1.0, 5.0}) {
    RowMatrix x(6, d);
    for (int r = 0; r < 6; ++r) x.row(r) = a * u.transpose() / std::sqrt(double(d));
    int k = 0;
    best_overlap_score(d, a, 10.0, &k);
    SearchResult res = exhaustive_search(x, 10.0, kRad, u);
    EXPECT_EQ(res.best_spike(0), 1.0);
    EXPECT_EQ(std::abs(res.best_spike.dot(u)), k) << a;
    EXPECT_EQ(res.success, k == d);
  }
  // The score peaks at a finite projection, so strongly aligned rows pick a
  // partial overlap: l(1.25) > l(5) at beta = 10.
  int k5 = 0;
  best_overlap_score(d, 5.0, 10.0, &k5);
  EXPECT_EQ(k5, 2);
  int k1 = 0;
  best_overlap_score(d, 1.0, 10.0, &k1);
  EXPECT_EQ(k1, d);
}

TEST(Search, ZeroBetaTieBreak) {
  const int d = 7;
  Rng rng(4);
  RowMatrix x = RowMatrix::NullaryExpr(10, d, [&] { return rng.normal(); });
  SearchResult res = exhaustive_search(x, 0.0, kRad);
  Eigen::VectorXd expect = -Eigen::VectorXd::Ones(d);
  expect(0) = 1.0;
  EXPECT_EQ(res.best_spike, expect);
  EXPECT_EQ(res.best_loglik, 0.0);
  EXPECT_FALSE(res.success);
}

TEST(Search, SignEquivalence) {
  const int d = 9;
  Rng rng(5);
  RowMatrix x = RowMatrix::NullaryExpr(40, d, [&] { return rng.normal(); });
  for (auto g : {kRad, GDistribution::uniform()})
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd v = draw_spike(d, rng);
      EXPECT_NEAR(total_log_likelihood(x, v, 4.0, g), total_log_likelihood(x, -v, 4.0, g), 1e-12);
    }
}

TEST(Search, EvaluationCountAndRecomputedScore) {
  for (int d : {1, 2, 5, 13}) {
    Rng rng(d);
    Eigen::VectorXd u = draw_spike(d, rng);
    RowMatrix x = spiked_rows(u, 50, 10.0, 17 + d);
    SearchResult res = exhaustive_search(x, 10.0, kRad, u);
    EXPECT_EQ(res.evaluations, 1ull << (d - 1));
    double direct = 0.0;
    for (int r = 0; r < x.rows(); ++r)
      direct += sample_log_likelihood(x.row(r).transpose(), res.best_spike, 10.0, kRad);
    EXPECT_NEAR(res.best_loglik, direct, 1e-10);
  }
}

TEST(Search, MatchesBruteForceAcrossRefresh) {
  // d = 14 takes the incremental path past several projection refreshes.
  const int d = 14;
  Rng rng(8);
  Eigen::VectorXd u = draw_spike(d, rng);
  RowMatrix x = spiked_rows(u, 30, 10.0, 9);
  SearchResult res = exhaustive_search(x, 10.0, kRad, u);
  double best = -1e300;
  Eigen::VectorXd v(d);
  for (std::uint64_t mask = 0; mask < (1ull << (d - 1)); ++mask) {
    v(0) = 1.0;
    for (int j = 1; j < d; ++j) v(j) = (mask >> (j - 1)) & 1 ? 1.0 : -1.0;
    best = std::max(best, total_log_likelihood(x, v, 10.0, kRad));
  }
  EXPECT_NEAR(res.best_loglik, best, 1e-9);
}

TEST(Search, DimensionCap) {
  RowMatrix x = RowMatrix::Zero(2, kMaxSearchDim + 1);
  try {
    exhaustive_search(x, 1.0, kRad);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cost"), std::string::npos);
  }
}

TEST(Search, SamplesForTheta) {
  EXPECT_EQ(samples_for_theta(10, 0.0), 1);
  EXPECT_EQ(samples_for_theta(10, 1.0), 10);
  EXPECT_EQ(samples_for_theta(10, 2.0), 100);
  EXPECT_EQ(samples_for_theta(10, 1.5), 32);
  EXPECT_EQ(samples_for_theta(8, 0.5), 3);
}

TEST(Curve, ThetaZeroIsGuessing) {
  const int d = 6, runs = 400;
  CurvePoint p = search_point(d, 0.0, 10.0, kRad, runs, 21);
  EXPECT_EQ(p.n, 1);
  double p0 = std::ldexp(1.0, 1 - d);
  EXPECT_LE(p.rate(), 2 * p0 + 0.1);
}

TEST(Curve, DeterministicAndMonotone) {
  std::vector<double> thetas{0.5, 1.0, 1.5, 2.0};
  auto a = success_rate_curve(6, thetas, 10.0, kRad, 30, 99);
  auto b = success_rate_curve(6, thetas, 10.0, kRad, 30, 99);
  ASSERT_EQ(a.size(), thetas.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].successes, b[i].successes);
    EXPECT_EQ(a[i].theta, thetas[i]);
  }
  // One-sided check: a later point may not fall below an earlier one by more
  // than a 5% binomial margin.
  for (size_t i = 1; i < a.size(); ++i) {
    double p = a[i - 1].rate();
    double margin = 1.645 * std::sqrt(std::max(p * (1 - p), 1.0 / 30) / 30) * std::sqrt(2.0);
    EXPECT_GE(a[i].rate(), p - margin);
  }
  EXPECT_EQ(a.back().rate(), 1.0);
}

}  // namespace
}  // namespace cumlab
