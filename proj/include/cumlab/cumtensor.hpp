#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cumlab/datagen.hpp"
#include "cumlab/rng.hpp"

namespace cumlab {

inline constexpr int kMaxCumulantDim = 64;

class FourthCumulant {
 public:
  explicit FourthCumulant(int d);

  int dim() const { return d_; }
  double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
  // Writes all permutations of (i, j, k, l).
  void set_symmetric(int i, int j, int k, int l, double value);
  const std::vector<double>& data() const { return data_; }

  // T(v, v, v, .)
  Eigen::VectorXd contract3(const Eigen::VectorXd& v) const;
  // T(v, v, v, v)
  double contract4(const Eigen::VectorXd& v) const;

  static FourthCumulant rank_one(const Eigen::VectorXd& w, double c);

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * d_ + j) * d_ + k) * d_ + l;
  }

  int d_;
  std::vector<double> data_;
};

FourthCumulant empirical_fourth_cumulant(const RowMatrix& data);

struct CpResult {
  double weight = 0.0;
  Eigen::VectorXd factor;
  bool degenerate = false;
  int iterations = 0;
};

struct CpOptions {
  int max_iters = 1000;
  double tol = 1e-10;
  int restarts = 8;
};

// One shifted power-iteration run maximising s * T(v, v, v, v) from `start`.
// `trace` (optional) receives s * T(v, v, v, v) after each accepted step.
CpResult power_iteration(const FourthCumulant& T, Eigen::VectorXd start, double s,
                         const CpOptions& opt, std::vector<double>* trace = nullptr);

CpResult rank1_cp(const FourthCumulant& T, Rng& rng, const CpOptions& opt = {});

void write_tensor(const FourthCumulant& T, const std::string& path, const std::string& sidecar_json);

}  // namespace cumlab
