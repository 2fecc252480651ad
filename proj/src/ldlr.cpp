#include "cumlab/ldlr.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cumlab/datagen.hpp"
#include "cumlab/numerics.hpp"

namespace cumlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return a > UINT64_MAX - b ? UINT64_MAX : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  return a > UINT64_MAX / b ? UINT64_MAX : a * b;
}

std::uint64_t compositions(int k, int d) {
  // C(k + d - 1, d - 1), saturating.
  std::uint64_t c = 1;
  for (int i = 1; i <= d - 1; ++i) {
    c = sat_mul(c, static_cast<std::uint64_t>(k + i));
    c /= static_cast<std::uint64_t>(i);
    if (c == UINT64_MAX) return c;
  }
  return c;
}

struct ExactState {
  int n, d, D;
  std::vector<double> t;           // T_k for k <= D
  std::vector<double> log_fact;    // log k!
  std::vector<int> col;
  std::vector<int> row;
  PriorAverage avg;
  double sum = 0.0;
};

double prior_mean(const std::vector<int>& col, PriorAverage avg) {
  const int d = static_cast<int>(col.size());
  if (avg == PriorAverage::ParityRule) {
    for (int c : col)
      if (c % 2 != 0) return 0.0;
    return 1.0;
  }
  double s = 0.0;
  for (std::uint64_t mask = 0; mask < (1ull << d); ++mask) {
    double p = 1.0;
    for (int i = 0; i < d; ++i)
      if ((mask >> i & 1) && col[i] % 2 != 0) p = -p;
    s += p;
  }
  return s / static_cast<double>(1ull << d);
}

void enumerate_row(ExactState& st, int mu, int budget, double log_w);

// Distribute `left` units over coordinates i.. of the current row.
void enumerate_parts(ExactState& st, int mu, int i, int left, int k, int budget, double log_w) {
  if (i == st.d - 1) {
    st.col[i] += left;
    double lw = log_w - st.log_fact[left];
    enumerate_row(st, mu + 1, budget - k, lw);
    st.col[i] -= left;
    return;
  }
  for (int c = 0; c <= left; ++c) {
    st.col[i] += c;
    enumerate_parts(st, mu, i + 1, left - c, k, budget, log_w - st.log_fact[c]);
    st.col[i] -= c;
  }
}

void enumerate_row(ExactState& st, int mu, int budget, double log_w) {
  if (mu == st.n) {
    double m = prior_mean(st.col, st.avg);
    st.sum += std::exp(log_w) * m * m;
    return;
  }
  for (int k = 0; k <= budget; ++k) {
    if (st.t[k] == 0.0) continue;
    double lw = log_w + 2.0 * std::log(std::abs(st.t[k])) - k * std::log(static_cast<double>(st.d));
    enumerate_parts(st, mu, 0, k, k, budget, lw);
  }
}

}  // namespace

double t_coeff(int m, double beta, const GDistribution& g) {
  if (m < 0) throw std::invalid_argument("t_coeff: m must be >= 0");
  if (m == 2 || m % 2 == 1) return 0.0;
  return std::pow(beta / (1.0 + beta), 0.5 * m) * hermite_coeff_expectation(g, m);
}

double ldlr_lower_log(long long n, long long d, int D, double beta, double kappa4) {
  if (D < 0) throw std::invalid_argument("ldlr_lower_log: D must be >= 0");
  const long long mmax = D / 4;
  if (mmax > n)
    throw std::invalid_argument("ldlr_lower_log: floor(D/4) = " + std::to_string(mmax) +
                                " exceeds n = " + std::to_string(n));
  std::vector<double> terms{0.0};
  const double dd = static_cast<double>(d);
  const double c = beta * beta * std::abs(kappa4) /
                   (std::sqrt(24.0) * dd * dd * (1.0 + beta) * (1.0 + beta));
  if (c == 0.0) return 0.0;
  const double lc = std::log(c);
  const double lpairs = std::log(dd * (dd + 1.0) / 2.0);
  for (long long m = 1; m <= mmax; ++m)
    terms.push_back(log_binom(static_cast<double>(n), static_cast<double>(m)) + m * lpairs +
                    2.0 * m * lc);
  return log_sum_exp(terms);
}

double ldlr_upper_log(long long n, long long d, int D, double beta, const GDistribution& g) {
  if (D < 0) throw std::invalid_argument("ldlr_upper_log: D must be >= 0");
  const double dd = static_cast<double>(d), nn = static_cast<double>(n);
  const double lr = std::log(beta / (1.0 + beta));
  std::vector<double> log_abs_h(D + 1, kNegInf);
  for (int k = 1; k <= D && k <= kMaxHermiteDegree; ++k) {
    double e = hermite_coeff_expectation(g, k);
    if (e != 0.0) log_abs_h[k] = std::log(std::abs(e));
  }
  std::vector<double> terms{0.0};
  if (beta == 0.0) return 0.0;
  for (int m = 1; m <= D; ++m) {
    double sup = kNegInf;
    for (int k = 1; k <= m && k <= kMaxHermiteDegree; ++k)
      if (std::isfinite(log_abs_h[k])) sup = std::max(sup, 2.0 * m / k * log_abs_h[k]);
    if (!std::isfinite(sup)) continue;
    const long long q = m / 4, h = m / 2;
    double lcm = m * lr + log_binom(static_cast<double>(q * h + m - 1), m);
    double t = lcm - m * std::log(dd) + sup +
               log_binom(nn, static_cast<double>(std::min<long long>(n, q))) +
               log_binom(dd, static_cast<double>(std::min<long long>(d, h)));
    terms.push_back(t);
  }
  return log_sum_exp(terms);
}

LdlrAsymptotics ldlr_asymptotics(double n, double d, int D, double beta, double kappa4,
                                 double lambda_growth) {
  LdlrAsymptotics out{kNegInf, 0.0};
  const int q = D / 4;
  if (q >= 1) {
    double a = beta * beta * kappa4 / ((1.0 + beta) * (1.0 + beta));
    out.log_lower = q * (std::log(a * a) - std::log(static_cast<double>(q)) + std::log(n) -
                         2.0 * std::log(d));
  }
  std::vector<double> terms{0.0};
  const double lr = std::log(lambda_growth * lambda_growth * beta / (1.0 + beta));
  const double lnd = std::log(n) - 2.0 * std::log(d);
  for (int m = 1; m <= D; ++m) terms.push_back(m * lr + 4.0 * m * std::log(m) + 0.25 * m * lnd);
  out.log_upper = log_sum_exp(terms);
  return out;
}

BudgetExceeded::BudgetExceeded(std::uint64_t count, std::uint64_t budget)
    : std::runtime_error("exact LDLR enumeration needs " + std::to_string(count) +
                         " multi-indices, budget is " + std::to_string(budget)),
      count_(count) {}

std::uint64_t ldlr_exact_count(int n, int d, int D, const GDistribution& g) {
  // ways[r] = number of partial assignments using total degree r.
  std::vector<std::uint64_t> ways(D + 1, 0);
  ways[0] = 1;
  for (int mu = 0; mu < n; ++mu) {
    std::vector<std::uint64_t> next(D + 1, 0);
    for (int r = 0; r <= D; ++r) {
      if (ways[r] == 0) continue;
      for (int k = 0; r + k <= D; ++k) {
        if (t_coeff(k, 1.0, g) == 0.0) continue;
        next[r + k] = sat_add(next[r + k], sat_mul(ways[r], compositions(k, d)));
      }
    }
    ways = std::move(next);
  }
  std::uint64_t total = 0;
  for (auto w : ways) total = sat_add(total, w);
  return total;
}

double ldlr_exact_small_log(int n, int d, int D, double beta, const GDistribution& g,
                            PriorAverage avg, std::uint64_t budget) {
  if (n < 0 || d < 1 || D < 0) throw std::invalid_argument("ldlr_exact_small_log: bad sizes");
  if (avg == PriorAverage::FullEnumeration && d > 16)
    throw std::invalid_argument("ldlr_exact_small_log: full prior average needs d <= 16");
  std::uint64_t count = ldlr_exact_count(n, d, D, g);
  if (count > budget) throw BudgetExceeded(count, budget);
  ExactState st{n, d, D, {}, {}, std::vector<int>(d, 0), {}, avg, 0.0};
  for (int k = 0; k <= D; ++k) {
    st.t.push_back(t_coeff(k, beta, g));
    st.log_fact.push_back(std::lgamma(k + 1.0));
  }
  enumerate_row(st, 0, D, 0.0);
  return std::log(st.sum);
}

double ldlr_wishart_limit(int D, double beta, double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("ldlr_wishart_limit: gamma must be > 0");
  if (D < 0) throw std::invalid_argument("ldlr_wishart_limit: D must be >= 0");
  double term = 1.0, sum = 1.0;
  const double r = beta * beta / gamma;
  for (int k = 1; k <= D; ++k) {
    term *= (2.0 * k - 1.0) / (2.0 * k) * r;
    sum += term;
  }
  return sum;
}

std::string BoundReport::csv_header() {
  return "n,d,D,beta,g,log_lower,log_upper,log_exact,asym_lower,asym_upper";
}

std::string BoundReport::csv_row() const {
  std::ostringstream os;
  os << n << ',' << d << ',' << D << ',' << format_double(beta) << ',' << g.name() << ','
     << (log_lower ? format_double(*log_lower) : std::string()) << ',' << format_double(log_upper) << ','
     << (log_exact ? format_double(*log_exact) : std::string()) << ','
     << format_double(asym_lower) << ',' << format_double(asym_upper);
  return os.str();
}

BoundReport make_bound_report(long long n, long long d, int D, double beta, const GDistribution& g,
                              std::uint64_t exact_budget) {
  BoundReport r;
  r.n = n;
  r.d = d;
  r.D = D;
  r.beta = beta;
  r.g = g;
  if (D / 4 <= n) r.log_lower = ldlr_lower_log(n, d, D, beta, g.kappa4());
  r.log_upper = ldlr_upper_log(n, d, D, beta, g);
  if (n <= 64 && d <= 64) {
    try {
      r.log_exact = ldlr_exact_small_log(static_cast<int>(n), static_cast<int>(d), D, beta, g,
                                         PriorAverage::ParityRule, exact_budget);
    } catch (const BudgetExceeded&) {
    }
  }
  auto a = ldlr_asymptotics(static_cast<double>(n), static_cast<double>(d), D, beta, g.kappa4(),
                            g.lambda_growth());
  r.asym_lower = a.log_lower;
  r.asym_upper = a.log_upper;
  return r;
}

}  // namespace cumlab
