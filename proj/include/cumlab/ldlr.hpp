#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "cumlab/hermite.hpp"

namespace cumlab {

double t_coeff(int m, double beta, const GDistribution& g);

// log of the finite-sum lower bound; throws if floor(D/4) > n.
double ldlr_lower_log(long long n, long long d, int D, double beta, double kappa4);
// log of the finite-sum upper bound.
double ldlr_upper_log(long long n, long long d, int D, double beta, const GDistribution& g);

struct LdlrAsymptotics {
  double log_lower;  // -inf when D < 4
  double log_upper;
};
LdlrAsymptotics ldlr_asymptotics(double n, double d, int D, double beta, double kappa4,
                                 double lambda_growth);

enum class PriorAverage { ParityRule, FullEnumeration };

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::uint64_t count, std::uint64_t budget);
  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_;
};

// Number of multi-multi-indices the exact oracle visits.
std::uint64_t ldlr_exact_count(int n, int d, int D, const GDistribution& g);

double ldlr_exact_small_log(int n, int d, int D, double beta, const GDistribution& g,
                            PriorAverage avg = PriorAverage::ParityRule,
                            std::uint64_t budget = 10'000'000);

double ldlr_wishart_limit(int D, double beta, double gamma);

struct BoundReport {
  long long n = 0, d = 0;
  int D = 0;
  double beta = 0.0;
  GDistribution g;
  // Empty when floor(D/4) > n.
  std::optional<double> log_lower;
  double log_upper = 0.0;
  std::optional<double> log_exact;
  double asym_lower = 0.0;
  double asym_upper = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

// Fills every field; log_exact only when the instance fits the budget.
BoundReport make_bound_report(long long n, long long d, int D, double beta, const GDistribution& g,
                              std::uint64_t exact_budget = 10'000'000);

}  // namespace cumlab
