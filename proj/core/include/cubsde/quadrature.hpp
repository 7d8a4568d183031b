#pragma once

#include <vector>

#include "cubsde/util.hpp"

namespace cubsde {

/// Nodes and weights integrating against a standard normal density (one
/// factor per dimension for tensor rules).  Weights sum to 1.
struct QuadratureRule {
  int dim = 1;
  std::vector<std::vector<double>> nodes;  // size q, each of length dim
  std::vector<double> weights;             // size q
  int size() const { return static_cast<int>(weights.size()); }
};

/// Gauss-Hermite rule for N(0,1) (probabilists' normalization), exact for
/// polynomials up to `degree`.  Supported degrees: 1, 3, 5, 7.
QuadratureRule gauss_hermite_normal_1d(int degree);

/// d-fold tensor product of a 1D rule.
QuadratureRule tensor_product(const QuadratureRule& axis, int d);

/// E prod_k xi_k^{a_k} for independent N(0,1) factors: prod (a_k - 1)!! over
/// even exponents, zero if any exponent is odd.
double normal_moment(const std::vector<int>& powers);

/// Worst absolute error of the rule on all monomials of total degree
/// <= max_degree against the exact normal moments.
double verify_normal_moments(const QuadratureRule& rule, int max_degree);

/// True when the node set is closed under negation with matching weights.
bool is_symmetric(const QuadratureRule& rule, double tol = 1e-14);

}  // namespace cubsde
