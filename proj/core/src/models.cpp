#include "cubsde/models.hpp"

#include <cmath>
#include <memory>

namespace cubsde {

namespace {

/// (e^z - 1)/z with the removable singularity filled in.
double phi1(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }

}  // namespace

Model heston_model(const HestonParams& p) {
  if (p.kappa < 0 || p.theta < 0 || p.beta < 0 || std::abs(p.rho) > 1 || p.v0 < 0)
    throw ArgumentError("heston_model: parameters out of range");
  Model m;
  m.dim = 2;
  m.d = 2;
  const double mu = p.mu, kappa = p.kappa, theta = p.theta, beta = p.beta, rho = p.rho;
  const double rho_c = std::sqrt(1.0 - rho * rho);

  auto sqrt_pos = [](double v) { return std::sqrt(std::max(v, 0.0)); };

  // Stratonovich drift: Ito drift (mu - v/2, kappa (theta - v)) minus the
  // correction (beta rho / 4, beta^2 / 4).
  VectorField V0;
  V0.eval = [=](ConstVec x, MutVec out) {
    out[0] = mu - 0.5 * x[1] - 0.25 * beta * rho;
    out[1] = kappa * (theta - x[1]) - 0.25 * beta * beta;
  };
  V0.jacobian = [=](ConstVec, MutVec J) {
    J[0] = 0; J[1] = -0.5;
    J[2] = 0; J[3] = -kappa;
  };

  VectorField V1;
  V1.eval = [=](ConstVec x, MutVec out) {
    const double s = sqrt_pos(x[1]);
    out[0] = s;
    out[1] = beta * rho * s;
  };
  V1.jacobian = [=](ConstVec x, MutVec J) {
    const double s = sqrt_pos(x[1]);
    J[0] = 0; J[1] = 0.5 / s;
    J[2] = 0; J[3] = 0.5 * beta * rho / s;
  };

  VectorField V2;
  V2.eval = [=](ConstVec x, MutVec out) {
    out[0] = 0.0;
    out[1] = beta * rho_c * sqrt_pos(x[1]);
  };
  V2.jacobian = [=](ConstVec x, MutVec J) {
    J[0] = 0; J[1] = 0;
    J[2] = 0; J[3] = 0.5 * beta * rho_c / sqrt_pos(x[1]);
  };

  m.fields = {V0, V1, V2};

  // Segment flows.  The volatility fields move sigma = sqrt(v) linearly; they
  // vanish at v = 0, so the flow freezes where sigma would cross zero (x is
  // advanced only up to the freeze time).
  // v solves a linear ODE; x accumulates -v/2 along the way.  Should v reach
  // zero it is held there, and the accumulated integral stops with it.
  auto drift_flow = [=](ConstVec x, double h, MutVec out) {
    const double xv = x[0], vv = x[1];
    double v_end, iv;  // v at the (possibly clamped) end, and int_0^h v ds
    if (kappa == 0.0) {
      const double slope = -0.25 * beta * beta;
      double he = h;
      if (slope < 0.0 && h > 0.0 && vv + slope * h < 0.0)
        he = vv / -slope;
      v_end = vv + slope * he;
      iv = vv * he + 0.5 * slope * he * he;
    } else {
      const double vstar = theta - 0.25 * beta * beta / kappa;
      double he = h;
      if (vstar < 0.0 && h > 0.0) {
        if (vv <= 0.0)
          he = 0.0;
        else
          he = std::min(h, std::log((vstar - vv) / vstar) / kappa);
      }
      const double em = -std::expm1(-kappa * he);  // 1 - e^{-kappa he}
      v_end = vstar + (vv - vstar) * (1.0 - em);
      iv = vstar * he + (vv - vstar) * em / kappa;
    }
    out[0] = xv + (mu - 0.25 * beta * rho) * h - 0.5 * iv;
    out[1] = std::max(v_end, 0.0);
  };
  auto vol_flow = [sqrt_pos](double c, ConstVec x, double h, MutVec out, bool drive_x) {
    const double xv = x[0], vv = x[1];
    const double sigma = sqrt_pos(vv);
    if (c == 0.0) {
      out[0] = drive_x ? xv + sigma * h : xv;
      out[1] = vv;
      return;
    }
    const double sigma_end = sigma + c * h;
    if (sigma_end < 0.0) {
      const double tstar = -sigma / c;
      out[0] = drive_x ? xv + sigma * tstar + 0.5 * c * tstar * tstar : xv;
      out[1] = 0.0;
    } else {
      out[0] = drive_x ? xv + sigma * h + 0.5 * c * h * h : xv;
      out[1] = sigma_end * sigma_end;
    }
  };
  m.exact_flows.resize(3);
  m.exact_flows[0] = drift_flow;
  m.exact_flows[1] = [=](ConstVec x, double h, MutVec out) {
    vol_flow(0.5 * beta * rho, x, h, out, true);
  };
  m.exact_flows[2] = [=](ConstVec x, double h, MutVec out) {
    vol_flow(0.5 * beta * rho_c, x, h, out, false);
  };
  return m;
}

HestonMoments heston_exact_moments(const HestonParams& p, double t) {
  // State vector: m_{a,b} = E[X^a V^b] over all a + b <= 4.  The -V/2 drag
  // contributes the m_{a-1,b+1} term, which stays inside the class.
  constexpr int DEG = 4;
  struct Idx { int a, b; };
  std::vector<Idx> states;
  int index[DEG + 1][DEG + 1];
  for (int b = 0; b <= DEG; ++b)
    for (int a = 0; a + b <= DEG; ++a) {
      index[a][b] = static_cast<int>(states.size());
      states.push_back({a, b});
    }
  const int n = static_cast<int>(states.size());
  const double mu = p.mu, kappa = p.kappa, theta = p.theta, beta = p.beta, rho = p.rho;

  auto deriv = [&](const std::vector<double>& m, std::vector<double>& dm) {
    for (int i = 0; i < n; ++i) {
      const int a = states[i].a, b = states[i].b;
      double s = 0;
      if (a >= 1) s += a * mu * m[index[a - 1][b]];
      if (a >= 1) s -= 0.5 * a * m[index[a - 1][b + 1]];
      if (b >= 1) s += b * kappa * theta * m[index[a][b - 1]];
      s -= b * kappa * m[i];
      if (a >= 2) s += 0.5 * a * (a - 1) * m[index[a - 2][b + 1]];
      if (a >= 1 && b >= 1) s += a * b * beta * rho * m[index[a - 1][b]];
      if (b >= 2) s += 0.5 * b * (b - 1) * beta * beta * m[index[a][b - 1]];
      dm[i] = s;
    }
  };

  std::vector<double> m(n), k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int i = 0; i < n; ++i)
    m[i] = std::pow(p.x0, states[i].a) * std::pow(p.v0, states[i].b);

  const int steps = 20000;
  const double h = t / steps;
  for (int s = 0; s < steps; ++s) {
    deriv(m, k1);
    for (int i = 0; i < n; ++i) tmp[i] = m[i] + 0.5 * h * k1[i];
    deriv(tmp, k2);
    for (int i = 0; i < n; ++i) tmp[i] = m[i] + 0.5 * h * k2[i];
    deriv(tmp, k3);
    for (int i = 0; i < n; ++i) tmp[i] = m[i] + h * k3[i];
    deriv(tmp, k4);
    for (int i = 0; i < n; ++i)
      m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  HestonMoments out;
  const double m1 = m[index[1][0]], m2 = m[index[2][0]], m3 = m[index[3][0]],
               m4 = m[index[4][0]];
  out.raw = {m1, m2, m3, m4};
  out.mean = m1;
  out.variance = m2 - m1 * m1;
  const double c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
  const double c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
  if (out.variance > 0) {
    out.skewness = c3 / std::pow(out.variance, 1.5);
    out.kurtosis = c4 / (out.variance * out.variance);
  }
  return out;
}

Model linear_test_model(std::vector<double> a_diag, std::vector<double> b,
                        std::vector<std::vector<double>> sigma) {
  const int n = static_cast<int>(a_diag.size());
  if (static_cast<int>(b.size()) != n)
    throw ArgumentError("linear_test_model: a/b size mismatch");
  for (const auto& s : sigma)
    if (static_cast<int>(s.size()) != n)
      throw ArgumentError("linear_test_model: sigma dimension mismatch");
  if (sigma.empty()) throw ArgumentError("linear_test_model: need at least one noise field");
  Model m;
  m.dim = n;
  m.d = static_cast<int>(sigma.size());

  std::vector<Poly> drift;
  for (int k = 0; k < n; ++k)
    drift.push_back(Poly::var(n, k) * a_diag[k] + Poly::constant(n, b[k]));
  m.fields.push_back(VectorField::from_poly(std::move(drift)));
  for (const auto& s : sigma) {
    std::vector<Poly> comps;
    for (int k = 0; k < n; ++k) comps.push_back(Poly::constant(n, s[k]));
    m.fields.push_back(VectorField::from_poly(std::move(comps)));
  }

  m.exact_flows.resize(m.d + 1);
  auto ad = std::make_shared<std::vector<double>>(std::move(a_diag));
  auto bd = std::make_shared<std::vector<double>>(std::move(b));
  m.exact_flows[0] = [ad, bd, n](ConstVec x, double h, MutVec out) {
    for (int k = 0; k < n; ++k) {
      const double e = std::exp((*ad)[k] * h);
      out[k] = e * x[k] + (*bd)[k] * h * phi1((*ad)[k] * h);
    }
  };
  for (int j = 1; j <= m.d; ++j) {
    auto s = std::make_shared<std::vector<double>>(sigma[j - 1]);
    m.exact_flows[j] = [s, n](ConstVec x, double h, MutVec out) {
      for (int k = 0; k < n; ++k) out[k] = x[k] + h * (*s)[k];
    };
  }
  return m;
}

Model ou_model() { return linear_test_model({-1.0}, {0.0}, {{1.0}}); }

namespace {

/// E[g(Z)] for Z ~ N(mean, cov) by Stein's recursion:
/// E[Z_i g(Z)] = mean_i E[g] + sum_k cov_{ik} E[d_k g].
double gaussian_poly_mean(const Poly& g, const std::vector<double>& mean,
                          const std::vector<double>& cov) {
  const int n = static_cast<int>(mean.size());
  double total = 0;
  for (const auto& [e, c] : g.terms()) {
    bool constant = true;
    int pick = -1;
    for (int k = 0; k < n; ++k)
      if (e[k] > 0) {
        constant = false;
        pick = k;
        break;
      }
    if (constant) {
      total += c;
      continue;
    }
    std::vector<int> rest = e;
    rest[pick] -= 1;
    Poly mono = Poly::monomial(rest, c);
    double s = mean[pick] * gaussian_poly_mean(mono, mean, cov);
    for (int k = 0; k < n; ++k)
      if (cov[pick * n + k] != 0.0)
        s += cov[pick * n + k] * gaussian_poly_mean(mono.derivative(k), mean, cov);
    total += s;
  }
  return total;
}

}  // namespace

double linear_model_expectation(const std::vector<double>& a_diag,
                                const std::vector<double>& b,
                                const std::vector<std::vector<double>>& sigma,
                                const Poly& f, ConstVec x0, double T) {
  const int n = static_cast<int>(a_diag.size());
  std::vector<double> mean(n), cov(n * n, 0.0);
  for (int k = 0; k < n; ++k)
    mean[k] = std::exp(a_diag[k] * T) * x0[k] + b[k] * T * phi1(a_diag[k] * T);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0;
      for (const auto& sig : sigma) s += sig[i] * sig[k];
      if (s != 0.0) {
        const double z = a_diag[i] + a_diag[k];
        cov[i * n + k] = s * T * phi1(z * T);
      }
    }
  return gaussian_poly_mean(f, mean, cov);
}

Model spde_spectral_model(const SpdeParams& p) {
  if (p.K < 1 || p.d < 1 || p.d > p.K)
    throw ArgumentError("spde_spectral_model: need 1 <= d <= K");
  if (static_cast<int>(p.sigma.size()) != p.d)
    throw ArgumentError("spde_spectral_model: sigma size must equal d");
  Model m;
  m.dim = p.K;
  m.d = p.d;
  std::vector<double> mu(p.K);
  for (int k = 0; k < p.K; ++k) mu[k] = -double(k + 1) * double(k + 1);
  m.semigroup_diag = std::move(mu);
  m.semigroup_shift = 0.0;

  VectorField zero;
  const int K = p.K;
  zero.eval = [K](ConstVec, MutVec out) {
    for (int k = 0; k < K; ++k) out[k] = 0.0;
  };
  m.fields.push_back(zero);
  m.field_support.push_back({});
  for (int j = 1; j <= p.d; ++j) {
    const double s = p.sigma[j - 1];
    const int coord = j - 1;
    VectorField V;
    V.eval = [K, s, coord](ConstVec x, MutVec out) {
      for (int k = 0; k < K; ++k) out[k] = 0.0;
      out[coord] = s * std::tanh(x[coord]);
    };
    m.fields.push_back(std::move(V));
    m.field_support.push_back({coord});
  }
  return m;
}

}  // namespace cubsde
