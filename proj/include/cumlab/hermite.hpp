#pragma once

#include <string>
#include <vector>

namespace cumlab {

inline constexpr int kMaxHermiteDegree = 64;

// Probabilists' Hermite polynomials h_m, monic, orthogonal under N(0, 1).
class HermiteBasis {
 public:
  explicit HermiteBasis(int max_degree = kMaxHermiteDegree);

  int max_degree() const { return max_degree_; }
  // Coefficient of x^k in h_m.
  double coeff(int m, int k) const;
  // Sum_k |a_{m,k}|.
  double abs_coeff_sum(int m) const;
  double eval(int m, double x) const;

 private:
  int max_degree_;
  std::vector<std::vector<double>> a_;
};

// Three-term recurrence; throws std::out_of_range above kMaxHermiteDegree.
double hermite_eval(int m, double x);
// h_0(x), ..., h_m(x).
std::vector<double> hermite_eval_all(int m, double x);

enum class GKind { Rademacher, Uniform, Gaussian };

struct GDistribution {
  GKind kind = GKind::Rademacher;

  static GDistribution rademacher() { return {GKind::Rademacher}; }
  static GDistribution uniform() { return {GKind::Uniform}; }
  static GDistribution gaussian() { return {GKind::Gaussian}; }

  double kappa4() const;
  // Lambda with |E h_m(g)| <= Lambda^m m!.
  double lambda_growth() const;
  double moment(int k) const;
  std::string name() const;
};

GDistribution parse_g_distribution(const std::string& name);

double hermite_coeff_expectation(const GDistribution& dist, int m);

}  // namespace cumlab
