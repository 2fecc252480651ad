#include "cumlab/cumtensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cumlab {

FourthCumulant::FourthCumulant(int d) : d_(d) {
  if (d < 1) throw std::invalid_argument("FourthCumulant: d must be >= 1");
  if (d > kMaxCumulantDim) {
    double mb = std::pow(static_cast<double>(d), 4) * 8.0 / 1e6;
    throw std::invalid_argument("FourthCumulant: d = " + std::to_string(d) + " exceeds cap " +
                                std::to_string(kMaxCumulantDim) + " (would need " +
                                std::to_string(mb) + " MB)");
  }
  data_.assign(static_cast<std::size_t>(d) * d * d * d, 0.0);
}

void FourthCumulant::set_symmetric(int i, int j, int k, int l, double value) {
  int idx[4] = {i, j, k, l};
  std::sort(idx, idx + 4);
  do {
    data_[index(idx[0], idx[1], idx[2], idx[3])] = value;
  } while (std::next_permutation(idx, idx + 4));
}

Eigen::VectorXd FourthCumulant::contract3(const Eigen::VectorXd& v) const {
  const int d = d_;
  // t3[i] = sum_{jkl} T_ijkl v_j v_k v_l, via t2 = T . v on the last index.
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  Eigen::Map<const Eigen::MatrixXd> M(data_.data(), d, static_cast<Eigen::Index>(d) * d * d);
  // Column-major view: M(l, ijk) = T[i][j][k][l] since l is fastest.
  Eigen::VectorXd t1 = M.transpose() * v;  // indexed by (i, j, k), k fastest
  Eigen::Map<const Eigen::MatrixXd> M2(t1.data(), d, static_cast<Eigen::Index>(d) * d);
  Eigen::VectorXd t2 = M2.transpose() * v;  // indexed by (i, j)
  Eigen::Map<const Eigen::MatrixXd> M3(t2.data(), d, d);
  out = M3.transpose() * v;
  return out;
}

double FourthCumulant::contract4(const Eigen::VectorXd& v) const { return contract3(v).dot(v); }

FourthCumulant FourthCumulant::rank_one(const Eigen::VectorXd& w, double c) {
  const int d = static_cast<int>(w.size());
  FourthCumulant T(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) T.data_[T.index(i, j, k, l)] = c * w(i) * w(j) * w(k) * w(l);
  return T;
}

FourthCumulant empirical_fourth_cumulant(const RowMatrix& data) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n < 2) throw std::invalid_argument("empirical_fourth_cumulant: need n >= 2");
  FourthCumulant T(d);
  Eigen::MatrixXd X = data;
  X.rowwise() -= X.colwise().mean();
  Eigen::MatrixXd M2 = X.transpose() * X / n;

  std::vector<int> pair_of(d * d, -1);
  const int npairs = d * (d + 1) / 2;
  Eigen::MatrixXd P(n, npairs);
  int c = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      P.col(c) = X.col(i).cwiseProduct(X.col(j));
      pair_of[i * d + j] = c++;
    }
  Eigen::MatrixXd Q = P.transpose() * P / n;

  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      for (int k = j; k < d; ++k)
        for (int l = k; l < d; ++l) {
          double m4 = Q(pair_of[i * d + j], pair_of[k * d + l]);
          double kappa = m4 - M2(i, j) * M2(k, l) - M2(i, k) * M2(j, l) - M2(i, l) * M2(j, k);
          T.set_symmetric(i, j, k, l, kappa);
        }
  return T;
}

CpResult power_iteration(const FourthCumulant& T, Eigen::VectorXd v, double s, const CpOptions& opt,
                         std::vector<double>* trace) {
  v.normalize();
  const int d = T.dim();
  double bound = 0.0;
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t q = 0; q < static_cast<std::size_t>(d) * d * d; ++q)
      row += std::abs(T.data()[static_cast<std::size_t>(i) * d * d * d + q]);
    bound = std::max(bound, row);
  }
  bound *= 3.0;

  CpResult res;
  double gamma = s * T.contract4(v);
  if (trace) trace->push_back(gamma);
  double shift = 0.0;
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    Eigen::VectorXd w = s * T.contract3(v) + shift * v;
    double wn = w.norm();
    if (wn == 0.0) break;
    Eigen::VectorXd next = w / wn;
    double g_next = s * T.contract4(next);
    if (g_next < gamma - 1e-12 * std::max(1.0, std::abs(gamma))) {
      if (shift >= bound) break;
      shift = shift == 0.0 ? bound / 64.0 : std::min(2.0 * shift, bound);
      continue;
    }
    double step = std::min((next - v).norm(), (next + v).norm());
    v = next;
    gamma = g_next;
    if (trace) trace->push_back(gamma);
    if (step < opt.tol) {
      ++it;
      break;
    }
  }
  res.factor = v;
  res.weight = T.contract4(v);
  res.iterations = it;
  return res;
}

CpResult rank1_cp(const FourthCumulant& T, Rng& rng, const CpOptions& opt) {
  const int d = T.dim();
  double maxabs = 0.0;
  for (double x : T.data()) maxabs = std::max(maxabs, std::abs(x));
  CpResult best;
  bool have = false;
  for (int r = 0; r < std::max(opt.restarts, 1); ++r) {
    Eigen::VectorXd start(d);
    for (int i = 0; i < d; ++i) start(i) = rng.normal();
    if (maxabs == 0.0) {
      best.factor = start.normalized();
      best.weight = 0.0;
      best.degenerate = true;
      return best;
    }
    for (double s : {1.0, -1.0}) {
      CpResult c = power_iteration(T, start, s, opt);
      if (!have || std::abs(c.weight) > std::abs(best.weight)) {
        best = c;
        have = true;
      }
    }
  }
  if (best.weight == 0.0) best.degenerate = true;
  return best;
}

void write_tensor(const FourthCumulant& T, const std::string& path, const std::string& sidecar_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  for (double x : T.data()) {
    std::uint64_t v = std::bit_cast<std::uint64_t>(x);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  std::ofstream js(path + ".json");
  js << sidecar_json << '\n';
  if (!os || !js) throw std::runtime_error("write failed: " + path);
}

}  // namespace cumlab
