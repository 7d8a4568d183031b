#include "cubsde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cubsde {

QuadratureRule gauss_hermite_normal_1d(int degree) {
  QuadratureRule r;
  r.dim = 1;
  switch (degree) {
    case 1:
      r.nodes = {{0.0}};
      r.weights = {1.0};
      break;
    case 3:
      r.nodes = {{-1.0}, {1.0}};
      r.weights = {0.5, 0.5};
      break;
    case 5: {
      const double s3 = std::sqrt(3.0);
      r.nodes = {{-s3}, {0.0}, {s3}};
      r.weights = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
      break;
    }
    case 7: {
      // Roots of He4(x) = x^4 - 6x^2 + 3, weights 4!/(16 He3(x)^2).
      const double a = std::sqrt(3.0 - std::sqrt(6.0));
      const double b = std::sqrt(3.0 + std::sqrt(6.0));
      auto w = [](double x) {
        const double he3 = x * x * x - 3.0 * x;
        return 24.0 / (16.0 * he3 * he3);
      };
      r.nodes = {{-b}, {-a}, {a}, {b}};
      r.weights = {w(b), w(a), w(a), w(b)};
      break;
    }
    default:
      throw ArgumentError("gauss_hermite_normal_1d: supported degrees are 1, 3, 5, 7");
  }
  return r;
}

QuadratureRule tensor_product(const QuadratureRule& axis, int d) {
  if (axis.dim != 1) throw ArgumentError("tensor_product: axis rule must be 1D");
  if (d < 1) throw ArgumentError("tensor_product: need d >= 1");
  QuadratureRule r;
  r.dim = d;
  const int q = axis.size();
  int total = 1;
  for (int k = 0; k < d; ++k) total *= q;
  r.nodes.reserve(total);
  r.weights.reserve(total);
  std::vector<int> idx(d, 0);
  for (int t = 0; t < total; ++t) {
    std::vector<double> node(d);
    double w = 1;
    for (int k = 0; k < d; ++k) {
      node[k] = axis.nodes[idx[k]][0];
      w *= axis.weights[idx[k]];
    }
    r.nodes.push_back(std::move(node));
    r.weights.push_back(w);
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < q) break;
      idx[k] = 0;
    }
  }
  return r;
}

double normal_moment(const std::vector<int>& powers) {
  double m = 1;
  for (int a : powers) {
    if (a < 0) throw ArgumentError("normal_moment: negative exponent");
    if (a % 2 == 1) return 0.0;
    for (int k = a - 1; k >= 1; k -= 2) m *= k;
  }
  return m;
}

namespace {

void enumerate_powers(int dim, int budget, std::vector<int>& cur,
                      const std::function<void(const std::vector<int>&)>& fn) {
  if (static_cast<int>(cur.size()) == dim) {
    fn(cur);
    return;
  }
  for (int a = 0; a <= budget; ++a) {
    cur.push_back(a);
    enumerate_powers(dim, budget - a, cur, fn);
    cur.pop_back();
  }
}

}  // namespace

double verify_normal_moments(const QuadratureRule& rule, int max_degree) {
  double worst = 0;
  std::vector<int> cur;
  enumerate_powers(rule.dim, max_degree, cur, [&](const std::vector<int>& p) {
    double s = 0;
    for (int i = 0; i < rule.size(); ++i) {
      double t = rule.weights[i];
      for (int k = 0; k < rule.dim; ++k)
        for (int a = 0; a < p[k]; ++a) t *= rule.nodes[i][k];
      s += t;
    }
    worst = std::max(worst, std::abs(s - normal_moment(p)));
  });
  return worst;
}

bool is_symmetric(const QuadratureRule& rule, double tol) {
  for (int i = 0; i < rule.size(); ++i) {
    bool found = false;
    for (int j = 0; j < rule.size() && !found; ++j) {
      double dmax = 0;
      for (int k = 0; k < rule.dim; ++k)
        dmax = std::max(dmax, std::abs(rule.nodes[i][k] + rule.nodes[j][k]));
      if (dmax <= tol && std::abs(rule.weights[i] - rule.weights[j]) <= tol) found = true;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace cubsde
