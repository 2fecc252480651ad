#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cumlab/datagen.hpp"
#include "cumlab/hermite.hpp"

namespace cumlab {

inline constexpr int kMaxSearchDim = 30;

struct SearchResult {
  Eigen::VectorXd best_spike;
  double best_loglik = 0.0;
  bool success = false;
  std::uint64_t evaluations = 0;
};

// Maximises the summed conditional log-likelihood over all v in {-1, +1}^d
// with v_0 = +1. `truth` (optional, may be empty) sets `success`.
SearchResult exhaustive_search(const RowMatrix& data, double beta, const GDistribution& g,
                               const Eigen::VectorXd& truth = Eigen::VectorXd());

double total_log_likelihood(const RowMatrix& data, const Eigen::VectorXd& v, double beta,
                            const GDistribution& g);

long long samples_for_theta(int d, double theta);

struct CurvePoint {
  double theta;
  long long n;
  int successes;
  int runs;
  double rate() const { return static_cast<double>(successes) / runs; }
};

// Run r draws from Rng(seed).fork(hash(theta, d, r)), so points are independent.
CurvePoint search_point(int d, double theta, double beta, const GDistribution& g, int runs,
                        std::uint64_t seed);
std::vector<CurvePoint> success_rate_curve(int d, const std::vector<double>& thetas, double beta,
                                           const GDistribution& g, int runs, std::uint64_t seed);

}  // namespace cumlab
