#include "cubsde/poly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cubsde {

Poly Poly::constant(int nvars, double c) {
  Poly p(nvars);
  p.add_term(std::vector<int>(nvars, 0), c);
  return p;
}

Poly Poly::var(int nvars, int k) {
  if (k < 0 || k >= nvars) throw ArgumentError("Poly::var: index out of range");
  Poly p(nvars);
  std::vector<int> e(nvars, 0);
  e[k] = 1;
  p.add_term(e, 1.0);
  return p;
}

Poly Poly::monomial(std::vector<int> exponents, double c) {
  Poly p(static_cast<int>(exponents.size()));
  p.add_term(exponents, c);
  return p;
}

int Poly::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_)
    d = std::max(d, std::accumulate(e.begin(), e.end(), 0));
  return d;
}

void Poly::add_term(const std::vector<int>& e, double c) {
  if (c == 0.0) return;
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    terms_.emplace(e, c);
  } else {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Poly& Poly::operator+=(const Poly& o) {
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Poly& Poly::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, v] : terms_) v *= c;
  return *this;
}

Poly Poly::operator*(const Poly& o) const {
  Poly p(nvars_);
  std::vector<int> e(nvars_);
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : o.terms_) {
      for (int k = 0; k < nvars_; ++k) e[k] = ea[k] + eb[k];
      p.add_term(e, ca * cb);
    }
  return p;
}

Poly Poly::derivative(int k) const {
  if (k < 0 || k >= nvars_) throw ArgumentError("Poly::derivative: index out of range");
  Poly p(nvars_);
  std::vector<int> e(nvars_);
  for (const auto& [ea, c] : terms_) {
    if (ea[k] == 0) continue;
    e = ea;
    e[k] -= 1;
    p.add_term(e, c * ea[k]);
  }
  return p;
}

double Poly::eval(ConstVec x) const {
  double s = 0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int k = 0; k < nvars_; ++k)
      for (int i = 0; i < e[k]; ++i) t *= x[k];
    s += t;
  }
  return s;
}

}  // namespace cubsde
