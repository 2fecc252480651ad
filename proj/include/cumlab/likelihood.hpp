#pragma once

#include <Eigen/Dense>

#include "cumlab/hermite.hpp"

namespace cumlab {

// Replica overlap function f(beta, lambda); lambda in [-1, 1].
double f_overlap(double beta, double lambda, const GDistribution& g, int quad_nodes = 64);

// log ||L_{n,d}||^2 for the Rademacher spike prior.
double lr_norm_sq_log(double n, int d, double beta, const GDistribution& g);

// Log conditional per-sample likelihood ratio l(x|u), written in terms of
// the normalised projection s = u.x / sqrt(d).
double projection_log_likelihood(double s, double beta, const GDistribution& g);
double sample_log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double beta,
                             const GDistribution& g);

struct GammaBeta {
  double value = 0.0;
  bool diverges = false;  // false when f(beta, 1) <= 1
};
GammaBeta gamma_beta(double beta, const GDistribution& g);

// Smallest beta in [lo, hi] with gamma_beta = target, by bisection.
double beta_for_gamma(double target, const GDistribution& g, double lo = 0.0, double hi = 100.0);

}  // namespace cumlab
