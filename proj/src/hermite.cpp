#include "cumlab/hermite.hpp"

#include <cmath>
#include <stdexcept>

namespace cumlab {

namespace {

void check_degree(int m, int max_degree) {
  if (m < 0 || m > max_degree)
    throw std::out_of_range("hermite degree " + std::to_string(m) +
                            " outside [0, " + std::to_string(max_degree) + "]");
}

}  // namespace

HermiteBasis::HermiteBasis(int max_degree) : max_degree_(max_degree) {
  if (max_degree < 0 || max_degree > kMaxHermiteDegree)
    throw std::out_of_range("HermiteBasis: max_degree must lie in [0, 64]");
  a_.resize(max_degree + 1);
  a_[0] = {1.0};
  for (int m = 0; m < max_degree; ++m) {
    const auto& p = a_[m];
    std::vector<double> q(m + 2, 0.0);
    for (int k = 0; k <= m + 1; ++k) {
      double up = k >= 1 ? p[k - 1] : 0.0;
      double down = k + 1 <= m ? (k + 1) * p[k + 1] : 0.0;
      q[k] = up - down;
    }
    a_[m + 1] = std::move(q);
  }
}

double HermiteBasis::coeff(int m, int k) const {
  check_degree(m, max_degree_);
  if (k < 0 || k > m) return 0.0;
  return a_[m][k];
}

double HermiteBasis::abs_coeff_sum(int m) const {
  check_degree(m, max_degree_);
  double s = 0.0;
  for (double c : a_[m]) s += std::abs(c);
  return s;
}

double HermiteBasis::eval(int m, double x) const {
  check_degree(m, max_degree_);
  return hermite_eval(m, x);
}

double hermite_eval(int m, double x) {
  check_degree(m, kMaxHermiteDegree);
  if (m == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < m; ++k) {
    double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<double> hermite_eval_all(int m, double x) {
  check_degree(m, kMaxHermiteDegree);
  std::vector<double> h(m + 1);
  h[0] = 1.0;
  if (m >= 1) h[1] = x;
  for (int k = 1; k < m; ++k) h[k + 1] = x * h[k] - k * h[k - 1];
  return h;
}

double GDistribution::kappa4() const {
  switch (kind) {
    case GKind::Rademacher: return -2.0;
    case GKind::Uniform: return -6.0 / 5.0;
    case GKind::Gaussian: return 0.0;
  }
  return 0.0;
}

double GDistribution::lambda_growth() const {
  switch (kind) {
    case GKind::Rademacher: return 1.0;
    case GKind::Uniform: return std::sqrt(3.0);
    case GKind::Gaussian: return 1.0;
  }
  return 1.0;
}

double GDistribution::moment(int k) const {
  if (k < 0) throw std::invalid_argument("moment order must be >= 0");
  if (k % 2 == 1) return 0.0;
  switch (kind) {
    case GKind::Rademacher: return 1.0;
    case GKind::Uniform: return std::pow(3.0, k / 2) / (k + 1);
    case GKind::Gaussian: return std::exp(std::lgamma(k + 1.0) - std::lgamma(k / 2 + 1.0)) /
                                 std::pow(2.0, k / 2);
  }
  return 0.0;
}

std::string GDistribution::name() const {
  switch (kind) {
    case GKind::Rademacher: return "rademacher";
    case GKind::Uniform: return "uniform";
    case GKind::Gaussian: return "gaussian";
  }
  return "?";
}

GDistribution parse_g_distribution(const std::string& name) {
  if (name == "rademacher") return GDistribution::rademacher();
  if (name == "uniform") return GDistribution::uniform();
  if (name == "gaussian") return GDistribution::gaussian();
  throw std::invalid_argument("unknown g distribution '" + name +
                              "' (expected rademacher, uniform or gaussian)");
}

double hermite_coeff_expectation(const GDistribution& dist, int m) {
  check_degree(m, kMaxHermiteDegree);
  if (m % 2 == 1) return 0.0;
  switch (dist.kind) {
    case GKind::Rademacher:
      return hermite_eval(m, 1.0);
    case GKind::Uniform: {
      // h_{m+1}' = (m+1) h_m and h_{m+1} is odd.
      check_degree(m + 1, kMaxHermiteDegree);
      double s3 = std::sqrt(3.0);
      return hermite_eval(m + 1, s3) / ((m + 1) * s3);
    }
    case GKind::Gaussian:
      return m == 0 ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace cumlab
