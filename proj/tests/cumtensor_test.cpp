#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cumlab/cumtensor.hpp"
#include "cumlab/learn.hpp"

namespace cumlab {
namespace {

RowMatrix gaussian(int n, int d, std::uint64_t seed) {
  Rng r(seed);
  return RowMatrix::NullaryExpr(n, d, [&] { return r.normal(); });
}

TEST(Cumulant, GaussianVanishesWithinNoise) {
  const int n = 100000, d = 8;
  RowMatrix x = gaussian(n, d, 1);
  FourthCumulant k = empirical_fourth_cumulant(x);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      for (int a = j; a < d; ++a)
        for (int b = a; b < d; ++b) {
          Eigen::ArrayXd p = x.col(i).array() * x.col(j).array() * x.col(a).array() * x.col(b).array();
          double var = (p - p.mean()).square().mean();
          EXPECT_LT(std::abs(k(i, j, a, b)), 5 * std::sqrt(var / n)) << i << j << a << b;
        }
}

TEST(Cumulant, ProjectionMatchesScalarCumulant) {
  Rng r(2);
  RowMatrix x = RowMatrix::NullaryExpr(500, 5, [&] { return r.uniform() * r.normal() + 0.3; });
  FourthCumulant k = empirical_fourth_cumulant(x);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(5, [&] { return r.normal(); });
    Eigen::ArrayXd s = (x * w).array();
    s -= s.mean();
    double m2 = s.square().mean(), m4 = s.square().square().mean();
    EXPECT_NEAR(k.contract4(w), m4 - 3 * m2 * m2, 1e-10 * std::max(1.0, std::abs(m4)));
    Eigen::VectorXd c3 = k.contract3(w);
    EXPECT_NEAR(c3.dot(w), k.contract4(w), 1e-10 * std::max(1.0, std::abs(m4)));
  }
}

TEST(Cumulant, SpikedProjection) {
  const int d = 8, n = 1000000;
  const double beta = 10;
  Rng r(3);
  ModelSpec s;
  s.kind = ModelKind::SpikedCumulant;
  s.d = d;
  s.beta = beta;
  s.g = GDistribution::rademacher();
  s.spike = draw_spike(d, r);
  RowMatrix x = sample_class(s, n, Rng(4));
  FourthCumulant k = empirical_fourth_cumulant(x);
  Eigen::VectorXd ub = s.spike / std::sqrt(double(d));
  double expect = std::pow(beta / (1 + beta), 2) * -2.0;
  Eigen::ArrayXd p = (x * ub).array();
  double se = std::sqrt(((p.pow(4) - p.pow(4).mean()).square().mean()) / n);
  EXPECT_NEAR(k.contract4(ub), expect, 5 * se);
}

TEST(Cumulant, ExactSymmetry) {
  RowMatrix x = gaussian(300, 6, 5);
  FourthCumulant k = empirical_fourth_cumulant(x);
  Rng r(6);
  for (int t = 0; t < 200; ++t) {
    std::array<int, 4> idx;
    for (auto& v : idx) v = static_cast<int>(r.below(6));
    double base = k(idx[0], idx[1], idx[2], idx[3]);
    std::sort(idx.begin(), idx.end());
    do {
      EXPECT_EQ(k(idx[0], idx[1], idx[2], idx[3]), base);
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
}

TEST(Cumulant, RepeatedRowAndCaps) {
  RowMatrix x(5, 4);
  for (int i = 0; i < 5; ++i) x.row(i) << 1, -2, 3, 0.5;
  FourthCumulant k = empirical_fourth_cumulant(x);
  for (double v : k.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(empirical_fourth_cumulant(RowMatrix::Zero(1, 4)), std::invalid_argument);
  try {
    empirical_fourth_cumulant(RowMatrix::Zero(3, kMaxCumulantDim + 1));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find(" MB"), std::string::npos);
  }
}

TEST(Cp, RankOneRecovery) {
  Rng r(7);
  for (double c : {2.5, -0.7}) {
    for (const auto& w : {Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(10, [&] { return r.normal(); })),
                          Eigen::VectorXd(Eigen::VectorXd::Unit(10, 3) + 0.1 * Eigen::VectorXd::Ones(10))}) {
      FourthCumulant T = FourthCumulant::rank_one(w, c);
      CpResult res = rank1_cp(T, r);
      EXPECT_FALSE(res.degenerate);
      double wn = w.norm();
      EXPECT_NEAR(res.weight, c * std::pow(wn, 4), 1e-8 * std::abs(c) * std::pow(wn, 4));
      EXPECT_NEAR(std::abs(res.factor.dot(w)) / wn, 1.0, 1e-9);
      EXPECT_NEAR(ipr(res.factor), ipr(w), 1e-8);
    }
  }
}

TEST(Cp, ZeroTensorIsDegenerate) {
  Rng r(8);
  CpResult res = rank1_cp(FourthCumulant(5), r);
  EXPECT_TRUE(res.degenerate);
  EXPECT_EQ(res.weight, 0.0);
  EXPECT_NEAR(res.factor.norm(), 1.0, 1e-15);
}

TEST(Cp, MonotoneAcceptedSteps) {
  Rng r(9);
  for (int t = 0; t < 5; ++t) {
    RowMatrix x = RowMatrix::NullaryExpr(200, 7, [&] { return r.uniform() - 0.5 + 0.3 * r.normal(); });
    FourthCumulant T = empirical_fourth_cumulant(x);
    for (double s : {1.0, -1.0}) {
      Eigen::VectorXd start = Eigen::VectorXd::NullaryExpr(7, [&] { return r.normal(); });
      std::vector<double> trace;
      CpResult res = power_iteration(T, start, s, CpOptions{}, &trace);
      for (size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-12);
      EXPECT_NEAR(res.factor.norm(), 1.0, 1e-12);
      EXPECT_NEAR(res.weight, T.contract4(res.factor), 1e-12);
    }
  }
}

TEST(Cp, TensorExport) {
  FourthCumulant T = FourthCumulant::rank_one(Eigen::VectorXd::Ones(3), 1.5);
  auto path = std::filesystem::temp_directory_path() / "cumlab_tensor_test.bin";
  write_tensor(T, path.string(), "{\"d\":3}");
  EXPECT_EQ(std::filesystem::file_size(path), 81u * 8);
  std::ifstream is(path, std::ios::binary);
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  EXPECT_EQ(std::bit_cast<double>(v), 1.5);
  std::ifstream js(path.string() + ".json");
  std::string line;
  std::getline(js, line);
  EXPECT_EQ(line, "{\"d\":3}");
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

}  // namespace
}  // namespace cumlab
