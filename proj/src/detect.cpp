#include "cumlab/detect.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cumlab/likelihood.hpp"

namespace cumlab {

namespace {

constexpr std::uint64_t kRefreshEvery = 4096;

// Lexicographic order on sign vectors with -1 < +1.
bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return a(i) < b(i);
  return false;
}

}  // namespace

double total_log_likelihood(const RowMatrix& data, const Eigen::VectorXd& v, double beta,
                            const GDistribution& g) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(v.size()));
  double s = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    s += projection_log_likelihood(data.row(r).dot(v) * inv, beta, g);
  return s;
}

SearchResult exhaustive_search(const RowMatrix& data, double beta, const GDistribution& g,
                               const Eigen::VectorXd& truth) {
  const int d = static_cast<int>(data.cols());
  if (d < 1) throw std::invalid_argument("exhaustive_search: empty dimension");
  if (d > kMaxSearchDim) {
    double cost = std::ldexp(1.0, d - 1) * data.rows() * d;
    throw std::invalid_argument("exhaustive_search: d = " + std::to_string(d) + " exceeds cap " +
                                std::to_string(kMaxSearchDim) + " (cost ~" +
                                std::to_string(cost) + " flops)");
  }
  const Eigen::Index n = data.rows();
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const std::uint64_t total = 1ull << (d - 1);

  Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd proj = data * v;
  SearchResult best;
  best.best_spike = v;
  best.best_loglik = -std::numeric_limits<double>::infinity();

  for (std::uint64_t step = 0; step < total; ++step) {
    if (step > 0) {
      // Gray code: coordinate 1 + ctz(step) flips.
      int j = 1 + std::countr_zero(step);
      v(j) = -v(j);
      if (step % kRefreshEvery == 0)
        proj.noalias() = data * v;
      else
        proj += (2.0 * v(j)) * data.col(j);
    }
    double score = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) score += projection_log_likelihood(proj(r) * inv, beta, g);
    if (score > best.best_loglik || (score == best.best_loglik && lex_less(v, best.best_spike))) {
      best.best_loglik = score;
      best.best_spike = v;
    }
  }
  best.evaluations = total;
  best.best_loglik = total_log_likelihood(data, best.best_spike, beta, g);
  if (truth.size() == d)
    best.success = best.best_spike == truth || best.best_spike == -truth;
  return best;
}

long long samples_for_theta(int d, double theta) {
  return static_cast<long long>(std::ceil(std::pow(static_cast<double>(d), theta) - 1e-9));
}

CurvePoint search_point(int d, double theta, double beta, const GDistribution& g, int runs,
                        std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("search: runs must be >= 1");
  CurvePoint p{theta, samples_for_theta(d, theta), 0, runs};
  Rng root(seed);
  for (int r = 0; r < runs; ++r) {
    Rng rng = root.fork(hash_words({hash_double(theta), static_cast<std::uint64_t>(d),
                                    static_cast<std::uint64_t>(r)}));
    Rng spike_rng = rng.fork(0);
    ModelSpec spec;
    spec.kind = ModelKind::SpikedCumulant;
    spec.d = d;
    spec.beta = beta;
    spec.g = g;
    spec.spike = draw_spike(d, spike_rng);
    RowMatrix x = sample_class(spec, static_cast<int>(p.n), rng.fork(1));
    if (exhaustive_search(x, beta, g, spec.spike).success) ++p.successes;
  }
  return p;
}

std::vector<CurvePoint> success_rate_curve(int d, const std::vector<double>& thetas, double beta,
                                           const GDistribution& g, int runs, std::uint64_t seed) {
  std::vector<CurvePoint> out;
  for (double t : thetas) out.push_back(search_point(d, t, beta, g, runs, seed));
  return out;
}

}  // namespace cumlab
