#include "cubsde/weights.hpp"

#include <algorithm>
#include <cmath>

namespace cubsde {

WeightFunction WeightFunction::polynomial(double s) {
  if (s < 1.0) throw ArgumentError("WeightFunction::polynomial: need s >= 1");
  return WeightFunction(WeightKind::Polynomial, s);
}

WeightFunction WeightFunction::cosh_type(double alpha) {
  if (alpha <= 0.0) throw ArgumentError("WeightFunction::cosh_type: need alpha > 0");
  return WeightFunction(WeightKind::Cosh, alpha);
}

double WeightFunction::operator()(ConstVec x) const {
  const double r2 = dot(x, x);
  if (kind_ == WeightKind::Polynomial) return std::pow(1.0 + r2, 0.5 * param_);
  return std::cosh(param_ * std::sqrt(r2));
}

double WeightFunction::log_value(ConstVec x) const {
  const double r2 = dot(x, x);
  if (kind_ == WeightKind::Polynomial) return 0.5 * param_ * std::log1p(r2);
  // log cosh(u) = u + log(1 + e^{-2u}) - log 2 for u >= 0
  const double u = param_ * std::sqrt(r2);
  return u + std::log1p(std::exp(-2.0 * u)) - std::log(2.0);
}

double WeightFunction::grad_norm(ConstVec x) const {
  const double r = norm2(x);
  if (kind_ == WeightKind::Polynomial)
    return param_ * r * std::pow(1.0 + r * r, 0.5 * param_ - 1.0);
  return param_ * std::sinh(param_ * r);
}

double WeightFunction::hess_norm(ConstVec x) const {
  const double r = norm2(x);
  const double s = param_;
  if (kind_ == WeightKind::Polynomial) {
    // D2psi = s(1+r^2)^{s/2-1} I + s(s-2)(1+r^2)^{s/2-2} x x^T; the radial
    // eigenvalue is s(1+r^2)^{s/2-2}(1+(s-1)r^2), the tangential one
    // s(1+r^2)^{s/2-1}.  In dimension 1 only the radial one exists.
    const double radial = s * std::pow(1.0 + r * r, 0.5 * s - 2.0) * (1.0 + (s - 1.0) * r * r);
    if (x.size() == 1) return std::abs(radial);
    const double tangential = s * std::pow(1.0 + r * r, 0.5 * s - 1.0);
    return std::max(std::abs(radial), tangential);
  }
  // cosh: radial eigenvalue alpha^2 cosh(alpha r) dominates the tangential
  // alpha sinh(alpha r)/r since sinh(u)/u <= cosh(u).
  return s * s * std::cosh(s * r);
}

double weighted_sup_norm(const std::vector<std::vector<double>>& points,
                         ConstVec values, const WeightFunction& psi) {
  if (points.size() != values.size())
    throw ArgumentError("weighted_sup_norm: points/values size mismatch");
  if (psi.kind() == WeightKind::Cosh) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (values[i] == 0.0) continue;
      best = std::max(best, std::log(std::abs(values[i])) - psi.log_value(points[i]));
    }
    return std::isfinite(best) ? std::exp(best) : 0.0;
  }
  double best = 0;
  for (std::size_t i = 0; i < points.size(); ++i)
    best = std::max(best, std::abs(values[i]) / psi(points[i]));
  return best;
}

DerivativeBoundReport check_weight_derivative_bounds(
    const WeightFunction& psi, const std::vector<std::vector<double>>& points) {
  DerivativeBoundReport rep;
  rep.polynomial_type = psi.kind() == WeightKind::Polynomial;
  for (const auto& x : points) {
    const double lpsi = psi.log_value(x);
    const double g = psi.grad_norm(x);
    const double h = psi.hess_norm(x);
    const double r2 = dot(x, x);
    // Ratios in log domain; for Cosh both grad and hess norms scale like psi
    // itself, so the quotients stay O(1) even where psi overflows a double.
    rep.c1 = std::max(rep.c1, std::exp(std::log(std::max(g, 1e-300)) + 0.5 * std::log1p(r2) - lpsi));
    rep.c2 = std::max(rep.c2, std::exp(std::log(std::max(h, 1e-300)) + std::log1p(r2) - lpsi));
    rep.c_alt = std::max(rep.c_alt, std::exp(std::log(std::max(g + h, 1e-300)) - lpsi));
  }
  return rep;
}

}  // namespace cubsde
