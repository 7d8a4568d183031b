#include "cubsde/poly.hpp"

#include "doctest.h"

using namespace cubsde;

TEST_CASE("polynomial arithmetic and evaluation") {
  const Poly x = Poly::var(2, 0);
  const Poly y = Poly::var(2, 1);
  const Poly one = Poly::constant(2, 1.0);

  Poly p = (x + one) * (y + one);  // 1 + x + y + xy
  const double pts[] = {2.0, 3.0};
  CHECK(p.eval(pts) == doctest::Approx(12.0));
  CHECK(p.degree() == 2);

  p -= x * y;
  CHECK(p.eval(pts) == doctest::Approx(6.0));
  CHECK(p.degree() == 1);

  Poly q = Poly::monomial({2, 1}, 3.0);  // 3 x^2 y
  CHECK(q.eval(pts) == doctest::Approx(36.0));
  CHECK((q * 0.0).is_zero());
}

TEST_CASE("polynomial differentiation") {
  const Poly x = Poly::var(2, 0);
  const Poly y = Poly::var(2, 1);
  Poly p = x * x * y + 2.0 * y;

  const Poly px = p.derivative(0);  // 2xy
  const Poly py = p.derivative(1);  // x^2 + 2
  const double pts[] = {1.5, -2.0};
  CHECK(px.eval(pts) == doctest::Approx(2.0 * 1.5 * -2.0));
  CHECK(py.eval(pts) == doctest::Approx(1.5 * 1.5 + 2.0));
  CHECK(px.derivative(0).derivative(0).is_zero());
}

TEST_CASE("cancelling terms vanish from the map") {
  const Poly x = Poly::var(1, 0);
  Poly p = x * x;
  p -= x * x;
  CHECK(p.is_zero());
  CHECK(p.terms().empty());
  CHECK(p.degree() == 0);
}
