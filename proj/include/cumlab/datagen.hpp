#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cumlab/hermite.hpp"
#include "cumlab/rng.hpp"

namespace cumlab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelKind { Null, SpikedWishart, SpikedCumulant, NLGP, GPMatch };
enum class Boundary { Open, Periodic };

std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::Null;
  int d = 1;
  double beta = 0.0;
  GDistribution g;
  Eigen::VectorXd spike;  // entries +-1; empty for Null/NLGP/GPMatch
  double gain = 1.0;
  double xi = 1.0;
  Boundary boundary = Boundary::Open;

  void validate() const;
};

struct DataMatrix {
  RowMatrix x;
  std::vector<int> labels;
  std::uint64_t seed = 0;
  ModelSpec positive;
  ModelSpec negative;

  int rows() const { return static_cast<int>(x.rows()); }
  int cols() const { return static_cast<int>(x.cols()); }
};

Eigen::VectorXd draw_spike(int d, Rng& rng);

Eigen::MatrixXd whitening_matrix(const Eigen::VectorXd& u, double beta);

// x = z - (ub.z) ub + (sqrt(1 - eta^2) ub.z + eta g) ub with eta^2 = beta / (1 + beta).
void spiked_cumulant_row(const Eigen::VectorXd& z, double g, const Eigen::VectorXd& u,
                         double beta, double* out);

double draw_g(const GDistribution& dist, Rng& rng);

// Z(g)^2 = E[erf(g z)^2] for z ~ N(0, 1).
double nlgp_norm_sq(double gain, int panels = 128);
double nlgp_norm_sq_closed_form(double gain);
Eigen::MatrixXd nlgp_field_covariance(int d, double xi, Boundary boundary);
Eigen::MatrixXd nlgp_output_covariance(int d, double gain, double xi, Boundary boundary);

// Lower Cholesky factor; on failure throws CholeskyError naming the
// first non-positive leading minor (1-based).
class CholeskyError : public std::runtime_error {
 public:
  CholeskyError(int minor, double pivot);
  int minor() const { return minor_; }

 private:
  int minor_;
};
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a);

class Sampler {
 public:
  explicit Sampler(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  void sample_row(Rng& rng, double* out) const;
  // Row i draws from rng.fork(i).
  RowMatrix sample(int n, const Rng& rng) const;

 private:
  ModelSpec spec_;
  Eigen::MatrixXd chol_;
  double z_norm_ = 1.0;
};

RowMatrix sample_class(const ModelSpec& spec, int n, const Rng& rng);

// n_per_class rows of each class; label +1 rows come first.
DataMatrix make_dataset(const ModelSpec& positive, const ModelSpec& negative,
                        int n_per_class, std::uint64_t seed, std::uint64_t stream = 0);

void write_csv(const DataMatrix& data, const std::string& path);
void write_csv(const DataMatrix& data, std::ostream& os);
DataMatrix read_csv(const std::string& path);
void write_binary(const DataMatrix& data, const std::string& path);
void write_binary(const DataMatrix& data, std::ostream& os);
DataMatrix read_binary(const std::string& path);

std::string format_double(double x);
double parse_double(const std::string& s);

}  // namespace cumlab
