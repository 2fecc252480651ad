#include "cumlab/likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cumlab/numerics.hpp"

namespace cumlab {

namespace {

// Log of the integrand of f without the expectation.
double f_log_term(double beta, double lambda, double gu, double gv) {
  const double b1 = 1.0 + beta;
  const double den = b1 * b1 - beta * beta * lambda * lambda;
  const double q = b1 * (b1 * (gu * gu + gv * gv) - 2.0 * beta * gu * gv * lambda);
  return std::log(b1) - 0.5 * std::log(den) - q / (2.0 * den) + 0.5 * (gu * gu + gv * gv);
}

// Composite Gauss-Legendre on [-sqrt 3, sqrt 3] for the uniform law.
const Quadrature& uniform_panels() {
  static const Quadrature q = [] {
    const int panels = 16;
    Quadrature base = gauss_legendre(16);
    Quadrature out;
    const double a = -std::sqrt(3.0), w = 2.0 * std::sqrt(3.0) / panels;
    for (int p = 0; p < panels; ++p) {
      double mid = a + (p + 0.5) * w;
      for (std::size_t i = 0; i < base.nodes.size(); ++i) {
        out.nodes.push_back(mid + 0.5 * w * base.nodes[i]);
        out.weights.push_back(0.5 * w * base.weights[i] / (2.0 * std::sqrt(3.0)));
      }
    }
    return out;
  }();
  return q;
}

}  // namespace

double f_overlap(double beta, double lambda, const GDistribution& g, int quad_nodes) {
  if (!(std::abs(lambda) <= 1.0)) throw std::domain_error("f_overlap: |lambda| must be <= 1");
  if (!(beta >= 0.0)) throw std::domain_error("f_overlap: beta must be >= 0");
  switch (g.kind) {
    case GKind::Rademacher: {
      double t[4] = {f_log_term(beta, lambda, 1, 1), f_log_term(beta, lambda, 1, -1),
                     f_log_term(beta, lambda, -1, 1), f_log_term(beta, lambda, -1, -1)};
      return std::exp(log_sum_exp(t)) / 4.0;
    }
    case GKind::Uniform: {
      Quadrature q = gauss_legendre(quad_nodes);
      const double s3 = std::sqrt(3.0);
      double s = 0.0;
      for (std::size_t i = 0; i < q.nodes.size(); ++i)
        for (std::size_t j = 0; j < q.nodes.size(); ++j)
          s += q.weights[i] * q.weights[j] *
               std::exp(f_log_term(beta, lambda, s3 * q.nodes[i], s3 * q.nodes[j]));
      return s / 4.0;
    }
    case GKind::Gaussian: {
      // E over N(0, I) of exp(-x^T M x / 2) with M the quadratic form of f.
      const double b1 = 1.0 + beta;
      const double den = b1 * b1 - beta * beta * lambda * lambda;
      const double m11 = b1 * b1 / den, m12 = -b1 * beta * lambda / den;
      const double det = m11 * m11 - m12 * m12;
      return b1 / std::sqrt(den) / std::sqrt(det);
    }
  }
  return 1.0;
}

double lr_norm_sq_log(double n, int d, double beta, const GDistribution& g) {
  if (d < 1) throw std::invalid_argument("lr_norm_sq_log: d must be >= 1");
  if (n < 0) throw std::invalid_argument("lr_norm_sq_log: n must be >= 0");
  if (n == 0) return 0.0;
  // f is even in lambda, so pair j with d - j.
  std::vector<double> terms;
  terms.reserve(d + 1);
  const double log2 = std::log(2.0);
  for (int j = 0; j <= d; ++j) {
    int k = std::min(j, d - j);
    double lam = std::abs(2.0 * k / d - 1.0);
    double lf = std::log(f_overlap(beta, lam, g));
    terms.push_back(log_binom(d, j) - d * log2 + n * lf);
  }
  double v = log_sum_exp(terms);
  return v;
}

double projection_log_likelihood(double s, double beta, const GDistribution& g) {
  if (beta == 0.0) return 0.0;
  const double c = std::sqrt(beta * (1.0 + beta)) * s;
  const double base = 0.5 * std::log1p(beta) - 0.5 * beta * s * s;
  switch (g.kind) {
    case GKind::Rademacher:
      return base - 0.5 * beta + log_cosh(c);
    case GKind::Uniform: {
      const Quadrature& q = uniform_panels();
      std::vector<double> t(q.nodes.size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        double x = q.nodes[i];
        t[i] = std::log(q.weights[i]) - 0.5 * beta * x * x + c * x;
      }
      return base + log_sum_exp(t);
    }
    case GKind::Gaussian:
      return 0.0;
  }
  return 0.0;
}

double sample_log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double beta,
                             const GDistribution& g) {
  if (x.size() != u.size()) throw std::invalid_argument("sample_log_likelihood: size mismatch");
  double s = x.dot(u) / std::sqrt(static_cast<double>(u.size()));
  return projection_log_likelihood(s, beta, g);
}

GammaBeta gamma_beta(double beta, const GDistribution& g) {
  double f1 = f_overlap(beta, 1.0, g);
  if (!(f1 > 1.0)) return {0.0, false};
  return {std::log(f1) / std::log(2.0), true};
}

double beta_for_gamma(double target, const GDistribution& g, double lo, double hi) {
  auto h = [&](double b) { return gamma_beta(b, g).value - target; };
  if (h(lo) > 0 || h(hi) < 0) throw std::domain_error("beta_for_gamma: target not bracketed");
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    double mid = 0.5 * (lo + hi);
    (h(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace cumlab
