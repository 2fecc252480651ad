#pragma once

#include <span>
#include <vector>

namespace cumlab {

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes/weights on [-1, 1], weights summing to 2.
Quadrature gauss_legendre(int n);
// Gauss-Hermite for the standard normal density, weights summing to 1.
Quadrature gauss_hermite_normal(int n);

double log_sum_exp(std::span<const double> xs);
double log_add(double a, double b);
double log_binom(double n, double k);
double log_double_factorial(int n);  // log n!!, with (-1)!! = 1
double log_cosh(double x);

}  // namespace cumlab
