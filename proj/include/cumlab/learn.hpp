#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cumlab/datagen.hpp"
#include "cumlab/rng.hpp"

namespace cumlab {

struct TwoLayerNet {
  Eigen::MatrixXd W;  // m x d
  Eigen::VectorXd v;  // m

  int width() const { return static_cast<int>(W.rows()); }
  double forward(const double* x) const;
  Eigen::VectorXd forward(const RowMatrix& x) const;
};

// W ~ N(0, 1/d), v ~ N(0, 1/m).
TwoLayerNet init_net(int m, int d, Rng& rng);

struct TrainConfig {
  double learning_rate = 0.002;
  double weight_decay = 0.002;
  int epochs = 50;
  int batch_size = 8;
  int width = 0;  // 0 means 5d
  double alpha_lazy = 1.0;
  // Target cosine of every hidden row with u at initialisation; NaN disables.
  double initial_overlap = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> test_accuracy;
  std::vector<double> overlap;
  std::vector<double> ipr;
  double early_stop_accuracy = 0.0;
  TwoLayerNet net;

  std::string csv() const;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int epoch);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

TrainReport train_2lnn(const DataMatrix& train, const DataMatrix& test, const Eigen::VectorXd& u,
                       const TrainConfig& cfg);

// Mean squared loss of the (possibly lazy-scaled) model, and its gradient.
struct LossGrad {
  double loss;
  Eigen::MatrixXd dW;
  Eigen::VectorXd dv;
};
LossGrad loss_and_grad(const TwoLayerNet& net, const TwoLayerNet& net0, double alpha,
                       const RowMatrix& x, const std::vector<int>& labels);

struct RandomFeaturesConfig {
  int width = 0;  // 0 means 5d
  double ridge = 0.1;
  std::uint64_t seed = 0;
};

double fit_random_features(const DataMatrix& train, const DataMatrix& test,
                           const RandomFeaturesConfig& cfg);

double max_spike_overlap(const Eigen::MatrixXd& W, const Eigen::VectorXd& u);
Eigen::MatrixXd enforce_initial_overlap(const Eigen::MatrixXd& W, const Eigen::VectorXd& u,
                                        double target);
double ipr(const Eigen::VectorXd& w);
double max_row_ipr(const Eigen::MatrixXd& W);

double accuracy(const Eigen::VectorXd& scores, const std::vector<int>& labels);

}  // namespace cumlab
