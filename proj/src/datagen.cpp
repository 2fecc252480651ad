#include "cumlab/datagen.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cumlab/numerics.hpp"

namespace cumlab {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'M', 'L', 'A', 'B', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Null: return "null";
    case ModelKind::SpikedWishart: return "wishart";
    case ModelKind::SpikedCumulant: return "cumulant";
    case ModelKind::NLGP: return "nlgp";
    case ModelKind::GPMatch: return "gpmatch";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "null") return ModelKind::Null;
  if (s == "wishart") return ModelKind::SpikedWishart;
  if (s == "cumulant") return ModelKind::SpikedCumulant;
  if (s == "nlgp") return ModelKind::NLGP;
  if (s == "gpmatch") return ModelKind::GPMatch;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

void ModelSpec::validate() const {
  if (d < 1) throw std::invalid_argument("model: d must be >= 1");
  if (!std::isfinite(beta) || beta < 0) throw std::invalid_argument("model: beta must be finite and >= 0");
  if (kind == ModelKind::SpikedWishart || kind == ModelKind::SpikedCumulant) {
    if (spike.size() != d) throw std::invalid_argument("model: spike length must equal d");
  }
  if (kind == ModelKind::NLGP || kind == ModelKind::GPMatch) {
    if (!(gain > 0)) throw std::invalid_argument("model: gain must be > 0");
    if (!(xi > 0)) throw std::invalid_argument("model: xi must be > 0");
  }
}

Eigen::VectorXd draw_spike(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("draw_spike: d must be >= 1");
  Eigen::VectorXd u(d);
  for (int i = 0; i < d; ++i) u(i) = rng.sign();
  return u;
}

Eigen::MatrixXd whitening_matrix(const Eigen::VectorXd& u, double beta) {
  if (!std::isfinite(beta) || beta < 0)
    throw std::invalid_argument("whitening_matrix: beta must be finite and >= 0");
  const double d = static_cast<double>(u.size());
  const double c = beta / (1.0 + beta + std::sqrt(1.0 + beta));
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(u.size(), u.size());
  s.noalias() -= (c / d) * u * u.transpose();
  return s;
}

void spiked_cumulant_row(const Eigen::VectorXd& z, double g, const Eigen::VectorXd& u,
                         double beta, double* out) {
  const int d = static_cast<int>(u.size());
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const double eta2 = beta / (1.0 + beta);
  double p = 0.0;
  for (int i = 0; i < d; ++i) p += u(i) * z(i);
  p *= inv;
  const double shift = std::sqrt(1.0 - eta2) * p + std::sqrt(eta2) * g - p;
  for (int i = 0; i < d; ++i) out[i] = z(i) + shift * u(i) * inv;
}

double draw_g(const GDistribution& dist, Rng& rng) {
  switch (dist.kind) {
    case GKind::Rademacher: return rng.sign();
    case GKind::Uniform: return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
    case GKind::Gaussian: return rng.normal();
  }
  return 0.0;
}

double nlgp_norm_sq(double gain, int panels) {
  // Composite Gauss-Legendre on [-12, 12] against the normal density.
  const Quadrature q = gauss_legendre(16);
  const double lo = -12.0, w = 24.0 / panels;
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * w;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const double z = mid + 0.5 * w * q.nodes[i];
      const double e = std::erf(gain * z);
      s += 0.5 * w * q.weights[i] * c * std::exp(-0.5 * z * z) * e * e;
    }
  }
  return s;
}

double nlgp_norm_sq_closed_form(double gain) {
  double g2 = gain * gain;
  return 2.0 / std::numbers::pi * std::asin(2.0 * g2 / (1.0 + 2.0 * g2));
}

Eigen::MatrixXd nlgp_field_covariance(int d, double xi, Boundary boundary) {
  Eigen::MatrixXd c(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      int dist = std::abs(i - j);
      if (boundary == Boundary::Periodic) dist = std::min(dist, d - dist);
      c(i, j) = std::exp(-dist / xi);
    }
  }
  return c;
}

Eigen::MatrixXd nlgp_output_covariance(int d, double gain, double xi, Boundary boundary) {
  Eigen::MatrixXd c = nlgp_field_covariance(d, xi, boundary);
  const double g2 = gain * gain;
  const double z2 = nlgp_norm_sq(gain);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      c(i, j) = 2.0 / std::numbers::pi * std::asin(2.0 * g2 * c(i, j) / (1.0 + 2.0 * g2)) / z2;
  return c;
}

CholeskyError::CholeskyError(int minor, double pivot)
    : std::runtime_error("covariance not positive definite: leading minor " +
                         std::to_string(minor) + " has pivot " + std::to_string(pivot)),
      minor_(minor) {}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double s = a(j, j);
    for (int k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 1e-14 * std::abs(a(j, j)))) throw CholeskyError(j + 1, s);
    l(j, j) = std::sqrt(s);
    for (int i = j + 1; i < n; ++i) {
      double t = a(i, j);
      for (int k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / l(j, j);
    }
  }
  return l;
}

Sampler::Sampler(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == ModelKind::NLGP) {
    chol_ = cholesky_lower(nlgp_field_covariance(spec_.d, spec_.xi, spec_.boundary));
    z_norm_ = std::sqrt(nlgp_norm_sq(spec_.gain));
  } else if (spec_.kind == ModelKind::GPMatch) {
    chol_ = cholesky_lower(
        nlgp_output_covariance(spec_.d, spec_.gain, spec_.xi, spec_.boundary));
  }
}

void Sampler::sample_row(Rng& rng, double* out) const {
  const int d = spec_.d;
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z(i) = rng.normal();
  switch (spec_.kind) {
    case ModelKind::Null:
      for (int i = 0; i < d; ++i) out[i] = z(i);
      break;
    case ModelKind::SpikedWishart: {
      double c = std::sqrt(spec_.beta / d) * rng.normal();
      for (int i = 0; i < d; ++i) out[i] = z(i) + c * spec_.spike(i);
      break;
    }
    case ModelKind::SpikedCumulant:
      spiked_cumulant_row(z, draw_g(spec_.g, rng), spec_.spike, spec_.beta, out);
      break;
    case ModelKind::NLGP: {
      Eigen::VectorXd f = chol_.triangularView<Eigen::Lower>() * z;
      for (int i = 0; i < d; ++i) out[i] = std::erf(spec_.gain * f(i)) / z_norm_;
      break;
    }
    case ModelKind::GPMatch: {
      Eigen::VectorXd f = chol_.triangularView<Eigen::Lower>() * z;
      for (int i = 0; i < d; ++i) out[i] = f(i);
      break;
    }
  }
}

RowMatrix Sampler::sample(int n, const Rng& rng) const {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  RowMatrix x(n, spec_.d);
  for (int r = 0; r < n; ++r) {
    Rng row = rng.fork(static_cast<std::uint64_t>(r));
    sample_row(row, x.row(r).data());
  }
  return x;
}

RowMatrix sample_class(const ModelSpec& spec, int n, const Rng& rng) {
  return Sampler(spec).sample(n, rng);
}

DataMatrix make_dataset(const ModelSpec& positive, const ModelSpec& negative,
                        int n_per_class, std::uint64_t seed, std::uint64_t stream) {
  if (positive.d != negative.d) throw std::invalid_argument("make_dataset: dimension mismatch");
  Rng root(seed, stream);
  RowMatrix a = sample_class(positive, n_per_class, root.fork(1));
  RowMatrix b = sample_class(negative, n_per_class, root.fork(2));
  DataMatrix out;
  out.x.resize(2 * n_per_class, positive.d);
  out.x.topRows(n_per_class) = a;
  out.x.bottomRows(n_per_class) = b;
  out.labels.assign(n_per_class, 1);
  out.labels.resize(2 * n_per_class, -1);
  out.seed = seed;
  out.positive = positive;
  out.negative = negative;
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  if (b < e && *b == '+') ++b;
  auto r = std::from_chars(b, e, x);
  if (r.ec != std::errc() || r.ptr != e) throw std::invalid_argument("not a number: '" + s + "'");
  return x;
}

void write_csv(const DataMatrix& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_csv(data, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_csv(const DataMatrix& data, std::ostream& os) {
  os << "label";
  for (int j = 0; j < data.cols(); ++j) os << ",x_" << j;
  os << '\n';
  for (int i = 0; i < data.rows(); ++i) {
    os << data.labels[i];
    for (int j = 0; j < data.cols(); ++j) os << ',' << format_double(data.x(i, j));
    os << '\n';
  }
}

DataMatrix read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  int d = 0;
  for (char c : line) d += c == ',';
  std::vector<double> vals;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col == 0)
        labels.push_back(static_cast<int>(parse_double(cell)));
      else
        vals.push_back(parse_double(cell));
      ++col;
    }
    if (col != d + 1) throw std::runtime_error(path + ": ragged row " + std::to_string(labels.size()));
  }
  DataMatrix out;
  out.x = Eigen::Map<RowMatrix>(vals.data(), static_cast<Eigen::Index>(labels.size()), d);
  out.labels = std::move(labels);
  return out;
}

// Header: 8-byte magic, u32 n, u32 d. Each row is label then d values, all f64 LE.
void write_binary(const DataMatrix& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_binary(data, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_binary(const DataMatrix& data, std::ostream& os) {
  os.write(kMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(data.rows()));
  put_u32(os, static_cast<std::uint32_t>(data.cols()));
  for (int i = 0; i < data.rows(); ++i) {
    put_f64(os, data.labels[i]);
    for (int j = 0; j < data.cols(); ++j) put_f64(os, data.x(i, j));
  }
}

DataMatrix read_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error(path + ": bad magic");
  std::uint32_t n = get_u32(is), d = get_u32(is);
  DataMatrix out;
  out.x.resize(n, d);
  out.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    out.labels[i] = static_cast<int>(get_f64(is));
    for (std::uint32_t j = 0; j < d; ++j) out.x(i, j) = get_f64(is);
  }
  if (!is) throw std::runtime_error(path + ": truncated");
  return out;
}

}  // namespace cumlab
