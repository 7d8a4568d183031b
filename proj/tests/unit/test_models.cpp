#include "cubsde/models.hpp"

#include <cmath>

#include "doctest.h"

using namespace cubsde;

namespace {

const HestonParams kPaper{0.02, 5.0, 0.09, 0.6, -0.8, std::log(9.0), 0.0625, 0.25};

// central-difference jacobian of a field at x
void fd_jacobian(const VectorField& V, ConstVec x, double* J) {
  const int n = static_cast<int>(x.size());
  std::vector<double> xp(x.begin(), x.end()), vp(n), vm(n);
  for (int k = 0; k < n; ++k) {
    const double h = 1e-6 * (1.0 + std::fabs(x[k]));
    xp[k] = x[k] + h;
    V.eval(xp, vp);
    xp[k] = x[k] - h;
    V.eval(xp, vm);
    xp[k] = x[k];
    for (int i = 0; i < n; ++i) J[i * n + k] = (vp[i] - vm[i]) / (2 * h);
  }
}

}  // namespace

TEST_CASE("heston fields and jacobians") {
  const auto m = heston_model(kPaper);
  REQUIRE(m.dim == 2);
  REQUIRE(m.d == 2);
  const double x[] = {2.1, 0.16};

  double v[2];
  m.fields[0].eval(x, v);
  // Ito drift (mu - v/2, kappa(theta - v)) minus (beta rho / 4, beta^2 / 4)
  CHECK(v[0] == doctest::Approx(0.02 - 0.08 + 0.25 * 0.6 * 0.8));
  CHECK(v[1] == doctest::Approx(5.0 * (0.09 - 0.16) - 0.09));

  m.fields[1].eval(x, v);
  CHECK(v[0] == doctest::Approx(0.4));
  CHECK(v[1] == doctest::Approx(0.6 * -0.8 * 0.4));
  m.fields[2].eval(x, v);
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(0.6 * 0.4 * 0.6));  // beta sqrt(1-rho^2) sqrt(v)

  double J[4], F[4];
  for (int j = 0; j <= 2; ++j) {
    REQUIRE(m.fields[j].jacobian);
    m.fields[j].jacobian(x, J);
    fd_jacobian(m.fields[j], x, F);
    for (int k = 0; k < 4; ++k)
      CHECK(J[k] == doctest::Approx(F[k]).epsilon(1e-6));
  }
}

TEST_CASE("heston drift flow") {
  const auto m = heston_model(kPaper);
  const double x[] = {2.1, 0.16};
  double y[2];
  m.exact_flows[0](x, 0.3, y);
  // v relaxes to vstar = theta - beta^2/(4 kappa) = 0.072 and x picks up
  // -1/2 the integral of v on the way
  const double iv = 0.072 * 0.3 + (0.16 - 0.072) * (1.0 - std::exp(-1.5)) / 5.0;
  CHECK(y[0] == doctest::Approx(2.1 + (0.02 + 0.12) * 0.3 - 0.5 * iv).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.072 + (0.16 - 0.072) * std::exp(-1.5)).epsilon(1e-13));

  // without vol-of-vol this is plain mean reversion
  HestonParams q = kPaper;
  q.beta = 0.0;
  const auto mq = heston_model(q);
  mq.exact_flows[0](x, 0.3, y);
  const double iv0 = 0.09 * 0.3 + 0.07 * (1.0 - std::exp(-1.5)) / 5.0;
  CHECK(y[0] == doctest::Approx(2.1 + 0.02 * 0.3 - 0.5 * iv0).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.09 + 0.07 * std::exp(-1.5)).epsilon(1e-13));

  // kappa = 0: v decreases linearly and clamps at zero
  q = kPaper;
  q.kappa = 0.0;
  const auto m0 = heston_model(q);
  m0.exact_flows[0](x, 0.3, y);
  CHECK(y[1] == doctest::Approx(0.16 - 0.25 * 0.36 * 0.3).epsilon(1e-13));
  CHECK(y[0] == doctest::Approx(2.1 + 0.14 * 0.3 - 0.5 * (0.16 * 0.3 - 0.045 * 0.09))
                    .epsilon(1e-14));
  m0.exact_flows[0](x, 10.0, y);
  CHECK(y[1] == 0.0);
  // after the clamp time 16/9 the integral of v is frozen at 2 v^2 / beta^2
  CHECK(y[0] == doctest::Approx(2.1 + 0.14 * 10.0 - 0.16 * 0.16 / 0.36).epsilon(1e-13));
}

TEST_CASE("heston volatility flows") {
  const auto m = heston_model(kPaper);
  const double x[] = {2.1, 0.16};
  double y[2];

  // sigma = sqrt(v) moves linearly at rate beta rho / 2 = -0.24
  m.exact_flows[1](x, 0.2, y);
  CHECK(y[0] == doctest::Approx(2.1 + 0.4 * 0.2 - 0.12 * 0.04).epsilon(1e-13));
  CHECK(y[1] == doctest::Approx(0.352 * 0.352).epsilon(1e-13));
  // the flow of V_1 conserves v - beta rho x
  CHECK(y[1] - 0.6 * -0.8 * y[0] ==
        doctest::Approx(0.16 - 0.6 * -0.8 * 2.1).epsilon(1e-12));

  // past the zero of sigma the state freezes
  m.exact_flows[1](x, 2.0, y);
  CHECK(y[0] == doctest::Approx(2.1 + 1.0 / 3.0).epsilon(1e-12));
  CHECK(y[1] == 0.0);

  // second factor leaves x alone, rate beta sqrt(1-rho^2)/2 = 0.18
  m.exact_flows[2](x, 0.2, y);
  CHECK(y[0] == 2.1);
  CHECK(y[1] == doctest::Approx(0.436 * 0.436).epsilon(1e-13));
  m.exact_flows[2](x, -0.2, y);
  CHECK(y[1] == doctest::Approx(0.364 * 0.364).epsilon(1e-13));

  // flows tolerate out aliasing the state
  double z[] = {2.1, 0.16};
  m.exact_flows[1](z, 0.2, z);
  m.exact_flows[1](x, 0.2, y);
  CHECK(z[0] == y[0]);
  CHECK(z[1] == y[1]);
}

TEST_CASE("heston moments match the reference digits") {
  const auto mom = heston_exact_moments(kPaper, kPaper.T);
  // published reference digits; their precision degrades with moment order
  // (the source evaluation carried ~1e-9 raw-moment error, amplified by the
  // central-moment cancellation)
  CHECK(mom.mean == doctest::Approx(2.192936688809).epsilon(1e-9));
  CHECK(mom.variance == doctest::Approx(0.019329503330).epsilon(1e-9));
  CHECK(mom.skewness == doctest::Approx(-0.885007761283).epsilon(2e-6));
  CHECK(mom.kurtosis == doctest::Approx(4.321997672912).epsilon(1e-4));
  // same quantities recomputed at 22-digit precision from the moment system
  CHECK(mom.mean == doctest::Approx(2.192936689144854).epsilon(1e-12));
  CHECK(mom.variance == doctest::Approx(0.019329503108510359).epsilon(1e-10));
  CHECK(mom.skewness == doctest::Approx(-0.8850086242880792).epsilon(1e-9));
  CHECK(mom.kurtosis == doctest::Approx(4.322068128854862).epsilon(1e-9));
  CHECK(mom.raw[0] == mom.mean);
  CHECK(mom.raw[1] - mom.raw[0] * mom.raw[0] ==
        doctest::Approx(mom.variance).epsilon(1e-12));
}

TEST_CASE("translating the start moves only the mean") {
  const auto a = heston_exact_moments(kPaper, kPaper.T);
  HestonParams q = kPaper;
  q.x0 += 1.0;
  const auto b = heston_exact_moments(q, q.T);
  CHECK(b.mean - a.mean == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(b.variance == doctest::Approx(a.variance).epsilon(1e-10));
  CHECK(b.skewness == doctest::Approx(a.skewness).epsilon(1e-8));
  CHECK(b.kurtosis == doctest::Approx(a.kurtosis).epsilon(1e-8));
}

TEST_CASE("vanishing vol-of-vol gives a gaussian log price") {
  HestonParams q = kPaper;
  q.beta = 1e-8;
  const auto mom = heston_exact_moments(q, 1.0);
  // integrated variance theta + (v0 - theta)(1 - e^{-kappa})/kappa
  const double iv = 0.09 + (0.0625 - 0.09) * (1.0 - std::exp(-5.0)) / 5.0;
  CHECK(mom.variance == doctest::Approx(iv).epsilon(1e-6));
  CHECK(mom.mean == doctest::Approx(std::log(9.0) + 0.02 - 0.5 * iv).epsilon(1e-9));
  CHECK(std::fabs(mom.skewness) < 1e-4);
  CHECK(std::fabs(mom.kurtosis - 3.0) < 1e-4);
}

TEST_CASE("short horizon moments") {
  const double t = 1e-4;
  const auto mom = heston_exact_moments(kPaper, t);
  CHECK(mom.mean == doctest::Approx(std::log(9.0) + (0.02 - 0.5 * 0.0625) * t)
                        .epsilon(1e-9));
  CHECK(mom.variance / t == doctest::Approx(0.0625).epsilon(0.01));
}

TEST_CASE("linear model flows") {
  const auto m = linear_test_model({-1.0}, {2.0}, {{1.0}});
  const double x[] = {0.5};
  double y[1];
  m.exact_flows[0](x, 0.3, y);
  CHECK(y[0] == doctest::Approx(0.5 * std::exp(-0.3) + 2.0 * (1.0 - std::exp(-0.3)))
                    .epsilon(1e-14));
  m.exact_flows[1](x, 0.3, y);
  CHECK(y[0] == doctest::Approx(0.8).epsilon(1e-14));

  // zero rate: the drift increment is plain b h
  const auto mz = linear_test_model({0.0}, {2.0}, {{1.0}});
  mz.exact_flows[0](x, 0.3, y);
  CHECK(y[0] == doctest::Approx(0.5 + 0.6).epsilon(1e-14));
}

TEST_CASE("gaussian expectations of the linear model") {
  const double T = 0.7;
  const double x[] = {0.4};
  const auto id = Poly::var(1, 0);
  CHECK(linear_model_expectation({-1}, {0}, {{1}}, id, x, T) ==
        doctest::Approx(0.4 * std::exp(-T)).epsilon(1e-13));
  const double mean = 0.4 * std::exp(-T);
  const double var = 0.5 * (1.0 - std::exp(-2 * T));
  CHECK(linear_model_expectation({-1}, {0}, {{1}}, id * id, x, T) ==
        doctest::Approx(mean * mean + var).epsilon(1e-13));
  // standard normal fourth moment
  const double z[] = {0.0};
  const auto q = Poly::var(1, 0);
  CHECK(linear_model_expectation({0}, {0}, {{1}}, q * q * q * q, z, 1.0) ==
        doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("gaussian expectations with two factors") {
  const std::vector<double> a{-1.0, -2.0}, b{0.5, -0.3};
  const std::vector<std::vector<double>> s{{1.0, 0.2}, {0.0, 0.7}};
  const double x0[] = {0.4, -1.1};
  const double T = 0.8;
  const double m0 = std::exp(-0.8) * 0.4 + 0.5 * (1.0 - std::exp(-0.8));
  const double m1 = std::exp(-1.6) * -1.1 - 0.15 * (1.0 - std::exp(-1.6));
  const double C00 = 0.5 * (1.0 - std::exp(-1.6));
  const double C01 = 0.2 * (1.0 - std::exp(-2.4)) / 3.0;
  const double C11 = 0.53 * (1.0 - std::exp(-3.2)) / 4.0;

  const auto X = Poly::var(2, 0), Y = Poly::var(2, 1);
  CHECK(linear_model_expectation(a, b, s, X, x0, T) == doctest::Approx(m0).epsilon(1e-13));
  CHECK(linear_model_expectation(a, b, s, Y * Y, x0, T) ==
        doctest::Approx(m1 * m1 + C11).epsilon(1e-13));
  CHECK(linear_model_expectation(a, b, s, X * Y, x0, T) ==
        doctest::Approx(m0 * m1 + C01).epsilon(1e-13));
  CHECK(linear_model_expectation(a, b, s, X * X * Y, x0, T) ==
        doctest::Approx((m0 * m0 + C00) * m1 + 2 * m0 * C01).epsilon(1e-12));
}

TEST_CASE("spectral truncation model layout") {
  SpdeParams p;
  p.K = 6;
  const auto m = spde_spectral_model(p);
  m.validate();
  CHECK(m.dim == 6);
  CHECK(m.d == 2);
  REQUIRE(m.semigroup_diag);
  for (int k = 0; k < 6; ++k)
    CHECK((*m.semigroup_diag)[k] == doctest::Approx(-double((k + 1) * (k + 1))));
  CHECK_FALSE(m.has_exact_flows());

  std::vector<double> x(6, 0.0), v(6);
  x[0] = 0.5;
  x[1] = -0.3;
  m.fields[0].eval(x, v);
  for (double c : v) CHECK(c == 0.0);
  m.fields[1].eval(x, v);
  CHECK(v[0] == doctest::Approx(0.2 * std::tanh(0.5)).epsilon(1e-14));
  for (int k = 1; k < 6; ++k) CHECK(v[k] == 0.0);
  m.fields[2].eval(x, v);
  CHECK(v[1] == doctest::Approx(0.15 * std::tanh(-0.3)).epsilon(1e-14));

  REQUIRE(m.field_support.size() == 3);
  CHECK(m.field_support[0].empty());
  CHECK(m.field_support[1] == std::vector<int>{0});
  CHECK(m.field_support[2] == std::vector<int>{1});
}
