#include "cumlab/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cumlab {

namespace {

struct Batch {
  RowMatrix x;
  std::vector<int> y;
  Eigen::VectorXd offset;  // phi_0 on the batch rows (centred scaling only)
};

Eigen::VectorXd relu_forward(const Eigen::MatrixXd& W, const Eigen::VectorXd& v, const RowMatrix& x) {
  Eigen::MatrixXd h = (x * W.transpose()).cwiseMax(0.0);
  return h * v;
}

double batch_loss_grad(const TwoLayerNet& net, double alpha, bool centred, const Batch& b,
                       Eigen::MatrixXd& dW, Eigen::VectorXd& dv) {
  const Eigen::Index n = b.x.rows();
  Eigen::MatrixXd pre = b.x * net.W.transpose();
  Eigen::MatrixXd h = pre.cwiseMax(0.0);
  Eigen::VectorXd out = h * net.v;
  double scale = 1.0;
  if (centred) {
    out = alpha * (out - b.offset);
    scale = 1.0 / alpha;  // d(loss/alpha^2)/d(theta) = (2/alpha)(phi_a - y) dphi
  }
  Eigen::VectorXd r(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double e = out(i) - b.y[i];
    loss += e * e;
    r(i) = 2.0 * e * scale / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (centred) loss /= alpha * alpha;
  dv.noalias() = h.transpose() * r;
  Eigen::MatrixXd gh = (r * net.v.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  dW.noalias() = gh.transpose() * b.x;
  return loss;
}

}  // namespace

double TwoLayerNet::forward(const double* x) const {
  Eigen::Map<const Eigen::VectorXd> xv(x, W.cols());
  return v.dot((W * xv).cwiseMax(0.0));
}

Eigen::VectorXd TwoLayerNet::forward(const RowMatrix& x) const { return relu_forward(W, v, x); }

TwoLayerNet init_net(int m, int d, Rng& rng) {
  TwoLayerNet net;
  net.W.resize(m, d);
  net.v.resize(m);
  const double sw = 1.0 / std::sqrt(static_cast<double>(d));
  const double sv = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) net.W(i, j) = sw * rng.normal();
  for (int i = 0; i < m; ++i) net.v(i) = sv * rng.normal();
  return net;
}

std::string TrainReport::csv() const {
  std::ostringstream os;
  os << "epoch,test_acc,max_overlap,max_ipr\n";
  for (std::size_t e = 0; e < test_accuracy.size(); ++e)
    os << e + 1 << ',' << format_double(test_accuracy[e]) << ',' << format_double(overlap[e])
       << ',' << format_double(ipr[e]) << '\n';
  return os.str();
}

DivergenceError::DivergenceError(int epoch)
    : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)),
      epoch_(epoch) {}

LossGrad loss_and_grad(const TwoLayerNet& net, const TwoLayerNet& net0, double alpha,
                       const RowMatrix& x, const std::vector<int>& labels) {
  Batch b{x, labels, relu_forward(net0.W, net0.v, x)};
  LossGrad g{0.0, Eigen::MatrixXd(), Eigen::VectorXd()};
  g.loss = batch_loss_grad(net, alpha, true, b, g.dW, g.dv);
  return g;
}

double accuracy(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  if (scores.size() != static_cast<Eigen::Index>(labels.size()) || labels.empty())
    throw std::invalid_argument("accuracy: size mismatch");
  int hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int s = scores(i) > 0.0 ? 1 : -1;
    hit += s == labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

TrainReport train_2lnn(const DataMatrix& train, const DataMatrix& test, const Eigen::VectorXd& u,
                       const TrainConfig& cfg) {
  const int d = train.cols();
  if (test.cols() != d || u.size() != d) throw std::invalid_argument("train_2lnn: dimension mismatch");
  for (int y : train.labels)
    if (y != 1 && y != -1) throw std::invalid_argument("train_2lnn: labels must be +-1");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("train_2lnn: bad schedule");
  if (!(cfg.alpha_lazy >= 1.0)) throw std::invalid_argument("train_2lnn: alpha_lazy must be >= 1");

  const int m = cfg.width > 0 ? cfg.width : 5 * d;
  Rng root(cfg.seed);
  Rng init_rng = root.fork(0);
  TwoLayerNet net = init_net(m, d, init_rng);
  if (!std::isnan(cfg.initial_overlap)) net.W = enforce_initial_overlap(net.W, u, cfg.initial_overlap);

  const bool centred = cfg.alpha_lazy > 1.0;
  const double alpha = cfg.alpha_lazy;
  Eigen::VectorXd train_offset, test_offset;
  if (centred) {
    train_offset = net.forward(train.x);
    test_offset = net.forward(test.x);
  }

  const int n = train.rows();
  std::vector<int> order(n);
  Batch b;
  Eigen::MatrixXd dW;
  Eigen::VectorXd dv;
  TrainReport rep;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng perm = root.fork(static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), perm);
    for (int s = 0; s < n; s += cfg.batch_size) {
      int bs = std::min(cfg.batch_size, n - s);
      b.x.resize(bs, d);
      b.y.resize(bs);
      if (centred) b.offset.resize(bs);
      for (int i = 0; i < bs; ++i) {
        b.x.row(i) = train.x.row(order[s + i]);
        b.y[i] = train.labels[order[s + i]];
        if (centred) b.offset(i) = train_offset(order[s + i]);
      }
      double loss = batch_loss_grad(net, alpha, centred, b, dW, dv);
      if (!std::isfinite(loss)) throw DivergenceError(epoch);
      net.W -= cfg.learning_rate * (dW + cfg.weight_decay * net.W);
      net.v -= cfg.learning_rate * (dv + cfg.weight_decay * net.v);
    }
    Eigen::VectorXd scores = net.forward(test.x);
    if (centred) scores = alpha * (scores - test_offset);
    if (!scores.allFinite()) throw DivergenceError(epoch);
    rep.test_accuracy.push_back(accuracy(scores, test.labels));
    rep.overlap.push_back(max_spike_overlap(net.W, u));
    rep.ipr.push_back(max_row_ipr(net.W));
  }
  rep.early_stop_accuracy =
      rep.test_accuracy.empty() ? 0.0 : *std::max_element(rep.test_accuracy.begin(), rep.test_accuracy.end());
  rep.net = std::move(net);
  return rep;
}

double fit_random_features(const DataMatrix& train, const DataMatrix& test,
                           const RandomFeaturesConfig& cfg) {
  const int d = train.cols();
  if (test.cols() != d) throw std::invalid_argument("fit_random_features: dimension mismatch");
  if (!(cfg.ridge > 0)) throw std::invalid_argument("fit_random_features: ridge must be > 0");
  const int m = cfg.width > 0 ? cfg.width : 5 * d;
  Rng rng = Rng(cfg.seed).fork(0);
  Eigen::MatrixXd F(m, d);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) F(i, j) = s * rng.normal();

  Eigen::MatrixXd P = (train.x * F.transpose()).cwiseMax(0.0);
  Eigen::RowVectorXd mu = P.colwise().mean();
  P.rowwise() -= mu;
  Eigen::VectorXd y(train.rows());
  for (int i = 0; i < train.rows(); ++i) y(i) = train.labels[i];
  const double ybar = y.mean();
  Eigen::MatrixXd A = P.transpose() * P;
  A.diagonal().array() += cfg.ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("fit_random_features: ridge system not PD");
  Eigen::VectorXd w = llt.solve(P.transpose() * (y.array() - ybar).matrix());

  Eigen::MatrixXd Pt = (test.x * F.transpose()).cwiseMax(0.0);
  Pt.rowwise() -= mu;
  Eigen::VectorXd scores = (Pt * w).array() + ybar;
  return accuracy(scores, test.labels);
}

double max_spike_overlap(const Eigen::MatrixXd& W, const Eigen::VectorXd& u) {
  const double un = u.norm();
  if (!(un > 0)) throw std::invalid_argument("max_spike_overlap: zero spike");
  double best = -1.0;
  for (Eigen::Index k = 0; k < W.rows(); ++k) {
    double wn = W.row(k).norm();
    if (wn == 0.0) continue;
    best = std::max(best, std::abs(W.row(k).dot(u)) / (wn * un));
  }
  if (best < 0) throw std::invalid_argument("max_spike_overlap: all rows are zero");
  return std::min(best, 1.0);
}

Eigen::MatrixXd enforce_initial_overlap(const Eigen::MatrixXd& W, const Eigen::VectorXd& u,
                                        double target) {
  if (!(target >= 0.0 && target <= 1.0))
    throw std::invalid_argument("enforce_initial_overlap: target must lie in [0, 1]");
  const Eigen::VectorXd uh = u.normalized();
  Eigen::MatrixXd out = W;
  for (Eigen::Index k = 0; k < W.rows(); ++k) {
    Eigen::VectorXd w = W.row(k).transpose();
    const double norm = w.norm();
    if (norm == 0.0) continue;
    Eigen::VectorXd perp = w - w.dot(uh) * uh;
    if (perp.norm() <= 1e-12 * norm) {
      // Row parallel to u: use the basis vector least aligned with u.
      Eigen::Index i;
      uh.cwiseAbs().minCoeff(&i);
      perp = Eigen::VectorXd::Unit(u.size(), i);
      perp -= perp.dot(uh) * uh;
    }
    perp.normalize();
    out.row(k) = (norm * (target * uh + std::sqrt(1.0 - target * target) * perp)).transpose();
  }
  return out;
}

double ipr(const Eigen::VectorXd& w) {
  double s2 = w.squaredNorm();
  if (s2 == 0.0) throw std::invalid_argument("ipr: zero vector");
  return w.array().pow(4).sum() / (s2 * s2);
}

double max_row_ipr(const Eigen::MatrixXd& W) {
  double best = 0.0;
  for (Eigen::Index k = 0; k < W.rows(); ++k)
    if (W.row(k).squaredNorm() > 0) best = std::max(best, ipr(W.row(k).transpose()));
  return best;
}

}  // namespace cumlab
