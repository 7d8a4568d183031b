#pragma once

#include <vector>

#include "cubsde/util.hpp"

namespace cubsde {

enum class WeightKind { Polynomial, Cosh };

/// Admissible weight function psi on R^n.  Two families:
///   Polynomial(s):  psi(x) = (1 + |x|^2)^(s/2),  s >= 1
///   Cosh(alpha):    psi(x) = cosh(alpha * |x|),  alpha > 0
/// Both are >= 1 everywhere.  Cosh grows exponentially, so callers that
/// form ratios against it should work with log_value.
class WeightFunction {
 public:
  static WeightFunction polynomial(double s);
  static WeightFunction cosh_type(double alpha);

  WeightKind kind() const { return kind_; }
  double param() const { return param_; }

  double operator()(ConstVec x) const;
  double log_value(ConstVec x) const;

  // Closed-form Euclidean norms of the first two derivative tensors.
  double grad_norm(ConstVec x) const;
  double hess_norm(ConstVec x) const;

 private:
  WeightFunction(WeightKind k, double p) : kind_(k), param_(p) {}
  WeightKind kind_;
  double param_;
};

/// max_i psi(x_i)^{-1} |f_i| over a finite cloud of states.  Ratios are taken
/// in the log domain for the Cosh kind so no intermediate overflows.
double weighted_sup_norm(const std::vector<std::vector<double>>& points,
                         ConstVec values, const WeightFunction& psi);

/// Fitted derivative-bound constants of psi over a state cloud:
///   c1 = max |Dpsi(x)| (1+|x|^2)^{1/2} / psi(x)
///   c2 = max |D2psi(x)| (1+|x|^2)    / psi(x)
///   c_alt = max (|Dpsi(x)| + |D2psi(x)|) / psi(x)
/// Polynomial weights satisfy the (c1, c2) form with constants independent of
/// the cloud; Cosh weights only satisfy the c_alt form (c2 grows with |x|).
struct DerivativeBoundReport {
  double c1 = 0;
  double c2 = 0;
  double c_alt = 0;
  bool polynomial_type = false;  // true when (c1, c2) are meaningful bounds
};

DerivativeBoundReport check_weight_derivative_bounds(
    const WeightFunction& psi, const std::vector<std::vector<double>>& points);

}  // namespace cubsde
