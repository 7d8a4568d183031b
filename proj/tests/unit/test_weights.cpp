#include "cubsde/weights.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"

using namespace cubsde;

namespace {

double fd_grad_norm_1d(const WeightFunction& psi, double x) {
  const double h = 1e-5;
  const double xp[] = {x + h}, xm[] = {x - h};
  return std::abs((psi(xp) - psi(xm)) / (2 * h));
}

double fd_hess_norm_1d(const WeightFunction& psi, double x) {
  const double h = 1e-4;
  const double xp[] = {x + h}, x0[] = {x}, xm[] = {x - h};
  return std::abs((psi(xp) - 2 * psi(x0) + psi(xm)) / (h * h));
}

/// Spectral norm of the FD Hessian of psi at a 2D point.
double fd_hess_norm_2d(const WeightFunction& psi, double x, double y) {
  const double h = 1e-4;
  auto v = [&](double a, double b) {
    const double p[] = {a, b};
    return psi(p);
  };
  const double hxx = (v(x + h, y) - 2 * v(x, y) + v(x - h, y)) / (h * h);
  const double hyy = (v(x, y + h) - 2 * v(x, y) + v(x, y - h)) / (h * h);
  const double hxy =
      (v(x + h, y + h) - v(x + h, y - h) - v(x - h, y + h) + v(x - h, y - h)) / (4 * h * h);
  const double tr = hxx + hyy, det = hxx * hyy - hxy * hxy;
  const double disc = std::sqrt(std::max(tr * tr / 4 - det, 0.0));
  return std::max(std::abs(tr / 2 + disc), std::abs(tr / 2 - disc));
}

}  // namespace

TEST_CASE("polynomial weight values") {
  const auto psi = WeightFunction::polynomial(4.0);
  const double x[] = {1.0, 1.0};
  CHECK(psi(x) == doctest::Approx(9.0));  // (1 + 2)^2
  CHECK(psi.log_value(x) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
  const double origin[] = {0.0, 0.0};
  CHECK(psi(origin) == doctest::Approx(1.0));
  CHECK_THROWS_AS(WeightFunction::polynomial(0.5), ArgumentError);
}

TEST_CASE("cosh weight values") {
  const auto psi = WeightFunction::cosh_type(2.0);
  const double x[] = {1.0, 0.0};
  CHECK(psi(x) == doctest::Approx(std::cosh(2.0)).epsilon(1e-12));
  CHECK(psi.log_value(x) == doctest::Approx(std::log(std::cosh(2.0))).epsilon(1e-12));
  // log domain survives arguments where cosh itself overflows
  const double far[] = {400.0, 0.0};
  CHECK(std::isinf(psi(far)));
  CHECK(psi.log_value(far) == doctest::Approx(800.0 - std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(WeightFunction::cosh_type(0.0), ArgumentError);
}

TEST_CASE("derivative norms match finite differences in 1D") {
  const auto poly = WeightFunction::polynomial(3.0);
  const auto csh = WeightFunction::cosh_type(1.3);
  for (double x : {0.3, 0.7, 1.9}) {
    const double xv[] = {x};
    CHECK(poly.grad_norm(xv) == doctest::Approx(fd_grad_norm_1d(poly, x)).epsilon(1e-7));
    CHECK(poly.hess_norm(xv) == doctest::Approx(fd_hess_norm_1d(poly, x)).epsilon(1e-5));
    CHECK(csh.grad_norm(xv) == doctest::Approx(fd_grad_norm_1d(csh, x)).epsilon(1e-7));
    CHECK(csh.hess_norm(xv) == doctest::Approx(fd_hess_norm_1d(csh, x)).epsilon(1e-5));
  }
}

TEST_CASE("hessian norm matches the 2D FD spectral norm") {
  const auto poly = WeightFunction::polynomial(5.0);
  const auto csh = WeightFunction::cosh_type(0.9);
  const double pts[][2] = {{0.8, 0.3}, {1.5, -1.1}, {0.0, 2.0}};
  for (const auto& p : pts) {
    const double xv[] = {p[0], p[1]};
    CHECK(poly.hess_norm(xv) ==
          doctest::Approx(fd_hess_norm_2d(poly, p[0], p[1])).epsilon(1e-4));
    CHECK(csh.hess_norm(xv) ==
          doctest::Approx(fd_hess_norm_2d(csh, p[0], p[1])).epsilon(1e-4));
  }
}

TEST_CASE("weighted sup norm") {
  const auto psi = WeightFunction::polynomial(2.0);
  const std::vector<std::vector<double>> pts = {{0.0, 0.0}, {1.0, 1.0}};
  const double vals[] = {3.0, 9.0};
  CHECK(weighted_sup_norm(pts, vals, psi) == doctest::Approx(3.0));

  // Cosh path works entirely in logs.
  const auto csh = WeightFunction::cosh_type(1.0);
  const std::vector<std::vector<double>> far = {{0.0}, {500.0}};
  const double fv[] = {2.0, 1.0};
  CHECK(weighted_sup_norm(far, fv, csh) == doctest::Approx(2.0));

  const double bad[] = {1.0};
  CHECK_THROWS_AS(weighted_sup_norm(pts, bad, psi), ArgumentError);
}

TEST_CASE("derivative bound constants over a radial cloud") {
  std::vector<std::vector<double>> cloud;
  for (int i = 0; i <= 100; ++i) cloud.push_back({0.5 * i, 0.0});

  // (1+r^2)-scaled bounds saturate at s and s(s-1) for the polynomial kind.
  const auto rep = check_weight_derivative_bounds(WeightFunction::polynomial(4.0), cloud);
  CHECK(rep.polynomial_type);
  CHECK(rep.c1 <= 4.0 + 1e-9);
  CHECK(rep.c1 > 3.99);
  CHECK(rep.c2 <= 12.0 + 1e-9);
  CHECK(rep.c2 > 11.9);

  // cosh only admits the unscaled form, with constant alpha + alpha^2.
  std::vector<std::vector<double>> short_cloud(cloud.begin(), cloud.begin() + 41);
  const auto crep =
      check_weight_derivative_bounds(WeightFunction::cosh_type(1.5), short_cloud);
  CHECK_FALSE(crep.polynomial_type);
  CHECK(crep.c_alt <= 1.5 + 2.25 + 1e-9);
  CHECK(crep.c_alt > 3.74);
  CHECK(crep.c2 > 100.0);
}
