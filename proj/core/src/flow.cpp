#include "cubsde/flow.hpp"

#include <algorithm>
#include <cmath>

namespace cubsde {

namespace {

thread_local std::vector<double> tl_scratch;

double* scratch(std::size_t n) {
  if (tl_scratch.size() < n) tl_scratch.resize(n);
  return tl_scratch.data();
}

/// Direction field W = sum_j a_j V_j for one segment.
void direction(const Model& m, ConstVec a, ConstVec x, MutVec out, MutVec tmp) {
  std::fill(out.begin(), out.end(), 0.0);
  for (int j = 0; j <= m.d; ++j) {
    if (a[j] == 0.0) continue;
    m.fields[j].eval(x, tmp);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += a[j] * tmp[k];
  }
}

void rk4_segment(const Model& m, ConstVec a, double len, int steps, MutVec y) {
  const int n = static_cast<int>(y.size());
  double* buf = scratch(static_cast<std::size_t>(6) * n);
  MutVec k1{buf, (std::size_t)n}, k2{buf + n, (std::size_t)n}, k3{buf + 2 * n, (std::size_t)n},
      k4{buf + 3 * n, (std::size_t)n}, yt{buf + 4 * n, (std::size_t)n}, tmp{buf + 5 * n, (std::size_t)n};
  const double h = len / steps;
  for (int s = 0; s < steps; ++s) {
    direction(m, a, y, k1, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + 0.5 * h * k1[i];
    direction(m, a, yt, k2, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + 0.5 * h * k2[i];
    direction(m, a, yt, k3, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + h * k3[i];
    direction(m, a, yt, k4, tmp);
    for (int i = 0; i < n; ++i)
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

// Dormand-Prince 5(4) pair.
void dopri_segment(const Model& m, ConstVec a, double len, double tol, MutVec y) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
  (void)c2; (void)c3; (void)c4; (void)c5;  // autonomous field: stage times unused
  const int n = static_cast<int>(y.size());
  double* buf = scratch(static_cast<std::size_t>(10) * n);
  auto row = [&](int i) { return MutVec{buf + i * n, (std::size_t)n}; };
  MutVec k1 = row(0), k2 = row(1), k3 = row(2), k4 = row(3), k5 = row(4), k6 = row(5),
         k7 = row(6), yt = row(7), ynew = row(8), tmp = row(9);
  double t = 0, h = len / 4;
  int rejects = 0;
  while (t < len) {
    h = std::min(h, len - t);
    direction(m, a, y, k1, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + h * a21 * k1[i];
    direction(m, a, yt, k2, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    direction(m, a, yt, k3, tmp);
    for (int i = 0; i < n; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    direction(m, a, yt, k4, tmp);
    for (int i = 0; i < n; ++i)
      yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    direction(m, a, yt, k5, tmp);
    for (int i = 0; i < n; ++i)
      yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    direction(m, a, yt, k6, tmp);
    for (int i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    direction(m, a, ynew, k7, tmp);
    double err = 0;
    for (int i = 0; i < n; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
      err = std::max(err, std::abs(e) / (tol + tol * std::abs(ynew[i])));
    }
    if (err <= 1.0 || h <= len * 1e-12) {
      t += h;
      std::copy(ynew.begin(), ynew.end(), y.begin());
      rejects = 0;
    } else if (++rejects > 50) {
      throw PlanError("adaptive flow: step control failed to converge");
    }
    const double fac = 0.9 * std::pow(err > 0 ? 1.0 / err : 1e4, 0.2);
    h *= std::clamp(fac, 0.2, 5.0);
  }
}

}  // namespace

void evolve(const Model& m, ConstVec x0, const CubaturePath& path,
            const FlowConfig& cfg, MutVec out) {
  if (path.d != m.d) throw ArgumentError("evolve: path/model dimension mismatch");
  if (m.semigroup_diag)
    throw ArgumentError("evolve: model has a semigroup part; use evolve_mild");
  std::copy(x0.begin(), x0.end(), out.begin());
  for (int k = 0; k < path.segments(); ++k) {
    const double len = path.breakpoints[k + 1] - path.breakpoints[k];
    const auto& a = path.slopes[k];
    if (cfg.method == FlowMethod::ExactFlows) {
      if (!m.has_exact_flows())
        throw ArgumentError("evolve: model carries no exact flows");
      int active = -1;
      for (int j = 0; j <= m.d; ++j) {
        if (a[j] == 0.0) continue;
        if (active >= 0)
          throw ArgumentError("evolve: exact flows need one driven component per segment");
        active = j;
      }
      if (active < 0) continue;
      m.exact_flows[active](out, a[active] * len, out);
    } else if (cfg.method == FlowMethod::RungeKutta4) {
      rk4_segment(m, a, len, cfg.rk4_steps, out);
    } else {
      dopri_segment(m, a, len, cfg.adaptive_tol, out);
    }
  }
}

FrameCache build_frame_cache(const Model& m, const CubaturePath& path, int rk4_steps) {
  if (!m.semigroup_diag) throw ArgumentError("build_frame_cache: model has no semigroup part");
  FrameCache c;
  c.steps = rk4_steps;
  const auto& mu = *m.semigroup_diag;
  // The frame runs on the path's time component, not the parameter: tau
  // advances at the segment's time slope and freezes on Brownian segments.
  double tau = 0;
  for (int k = 0; k < path.segments(); ++k) {
    const double len = path.breakpoints[k + 1] - path.breakpoints[k];
    const double h = len / rk4_steps;
    const double a0 = path.slopes[k][0];
    for (int i = 0; i < rk4_steps; ++i) {
      const double p0 = i * h;
      for (double p : {p0, p0 + 0.5 * h, p0 + h})
        c.stage_times.push_back(tau + a0 * p);
    }
    tau += a0 * len;
  }
  c.exp_fwd.resize(c.stage_times.size());
  c.exp_bwd.resize(c.stage_times.size());
  for (std::size_t s = 0; s < c.stage_times.size(); ++s) {
    c.exp_fwd[s].resize(mu.size());
    c.exp_bwd[s].resize(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) {
      c.exp_fwd[s][k] = std::exp(mu[k] * c.stage_times[s]);
      c.exp_bwd[s][k] = std::exp(-mu[k] * c.stage_times[s]);
    }
  }
  c.exp_final.resize(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k)
    c.exp_final[k] = std::exp(mu[k] * path.duration);
  return c;
}

void evolve_mild(const Model& m, ConstVec x0, const CubaturePath& path,
                 const FlowConfig& cfg, MutVec out, const FrameCache* cache) {
  if (path.d != m.d) throw ArgumentError("evolve_mild: path/model dimension mismatch");
  if (!m.semigroup_diag) throw ArgumentError("evolve_mild: model has no semigroup part");
  if (cfg.method == FlowMethod::ExactFlows)
    throw ArgumentError("evolve_mild: exact flows are not available in the moving frame");
  if (cache && cache->steps != cfg.rk4_steps)
    throw ArgumentError("evolve_mild: frame cache built for a different step count");
  const int n = m.dim;
  const auto& mu = *m.semigroup_diag;

  // Active coordinates: union of declared field supports, or everything.
  std::vector<int> act;
  if (static_cast<int>(m.field_support.size()) == m.d + 1) {
    std::vector<char> mark(n, 0);
    for (const auto& sup : m.field_support)
      for (int k : sup) mark[k] = 1;
    for (int k = 0; k < n; ++k)
      if (mark[k]) act.push_back(k);
  } else {
    act.resize(n);
    for (int k = 0; k < n; ++k) act[k] = k;
  }

  const std::size_t na = act.size();
  const bool have_support = static_cast<int>(m.field_support.size()) == m.d + 1;
  auto declared_zero = [&](int j) { return have_support && m.field_support[j].empty(); };

  double* buf = scratch(static_cast<std::size_t>(2) * n + 6 * na);
  MutVec z{buf, (std::size_t)n}, w{buf + n, (std::size_t)n};
  double* k1 = buf + 2 * n;
  double* k2 = k1 + na;
  double* k3 = k2 + na;
  double* k4 = k3 + na;
  double* yt = k4 + na;
  double* y = yt + na;
  std::copy(x0.begin(), x0.end(), z.begin());  // inactive coords never change in z
  for (std::size_t i = 0; i < na; ++i) y[i] = x0[act[i]];

  // Frame RHS at cached stage index (or explicit frame time tau):
  // r = sum_j a_j e^{-tau A} V_j(e^{tau A} y), tau the path's time component.
  auto rhs = [&](ConstVec a, std::size_t stage, double tau, const double* yv, double* r) {
    const double* ef = cache ? cache->exp_fwd[stage].data() : nullptr;
    const double* eb = cache ? cache->exp_bwd[stage].data() : nullptr;
    for (std::size_t i = 0; i < na; ++i) {
      const int k = act[i];
      z[k] = (ef ? ef[k] : std::exp(mu[k] * tau)) * yv[i];
    }
    for (std::size_t i = 0; i < na; ++i) r[i] = 0;
    for (int j = 0; j <= m.d; ++j) {
      if (a[j] == 0.0 || declared_zero(j)) continue;
      m.fields[j].eval(z, w);
      for (std::size_t i = 0; i < na; ++i) {
        const int k = act[i];
        r[i] += a[j] * (eb ? eb[k] : std::exp(-mu[k] * tau)) * w[k];
      }
    }
  };

  std::size_t stage = 0;
  double tau_seg = 0;  // frame time at the segment's left end
  for (int seg = 0; seg < path.segments(); ++seg) {
    const double len = path.breakpoints[seg + 1] - path.breakpoints[seg];
    const double h = len / cfg.rk4_steps;
    const auto& a = path.slopes[seg];
    const double a0 = a[0];
    bool quiet = true;
    for (int j = 0; j <= m.d; ++j)
      if (a[j] != 0.0 && !declared_zero(j)) quiet = false;
    if (quiet) {
      stage += 3 * static_cast<std::size_t>(cfg.rk4_steps);
      tau_seg += a0 * len;
      continue;
    }
    for (int s = 0; s < cfg.rk4_steps; ++s, stage += 3) {
      const double p0 = s * h;
      rhs(a, stage, tau_seg + a0 * p0, y, k1);
      for (std::size_t i = 0; i < na; ++i) yt[i] = y[i] + 0.5 * h * k1[i];
      rhs(a, stage + 1, tau_seg + a0 * (p0 + 0.5 * h), yt, k2);
      for (std::size_t i = 0; i < na; ++i) yt[i] = y[i] + 0.5 * h * k2[i];
      rhs(a, stage + 1, tau_seg + a0 * (p0 + 0.5 * h), yt, k3);
      for (std::size_t i = 0; i < na; ++i) yt[i] = y[i] + h * k3[i];
      rhs(a, stage + 2, tau_seg + a0 * (p0 + h), yt, k4);
      for (std::size_t i = 0; i < na; ++i)
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    tau_seg += a0 * len;
  }

  // Leave the frame: X = e^{TA} Y, with Y = x0 on inactive coordinates.
  const double T = path.duration;
  for (int k = 0; k < n; ++k)
    out[k] = (cache ? cache->exp_final[k] : std::exp(mu[k] * T)) * x0[k];
  for (std::size_t i = 0; i < na; ++i) {
    const int k = act[i];
    out[k] = (cache ? cache->exp_final[k] : std::exp(mu[k] * T)) * y[i];
  }
}

}  // namespace cubsde
