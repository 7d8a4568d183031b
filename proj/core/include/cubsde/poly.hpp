#pragma once

#include <map>
#include <vector>

#include "cubsde/util.hpp"

namespace cubsde {

/// Dense-enough multivariate polynomial over a fixed number of variables.
/// Used where exact differentiation matters (generator iterates, closed-form
/// oracles); never on a hot path, so a coefficient map is plenty.
class Poly {
 public:
  explicit Poly(int nvars = 0) : nvars_(nvars) {}

  static Poly constant(int nvars, double c);
  static Poly var(int nvars, int k);
  /// c * x_0^{e_0} ... x_{n-1}^{e_{n-1}}
  static Poly monomial(std::vector<int> exponents, double c);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;

  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  Poly& operator*=(double c);
  Poly operator+(const Poly& o) const { Poly p = *this; p += o; return p; }
  Poly operator-(const Poly& o) const { Poly p = *this; p -= o; return p; }
  Poly operator*(const Poly& o) const;
  Poly operator*(double c) const { Poly p = *this; p *= c; return p; }

  Poly derivative(int k) const;
  double eval(ConstVec x) const;

  const std::map<std::vector<int>, double>& terms() const { return terms_; }

 private:
  void add_term(const std::vector<int>& e, double c);

  int nvars_;
  std::map<std::vector<int>, double> terms_;
};

inline Poly operator*(double c, const Poly& p) { return p * c; }

}  // namespace cubsde
