#include "cubsde/vectorfields.hpp"

#include <cmath>
#include <memory>

namespace cubsde {

VectorField VectorField::from_poly(std::vector<Poly> components) {
  VectorField V;
  auto comps = std::make_shared<std::vector<Poly>>(std::move(components));
  const int n = static_cast<int>(comps->size());
  V.poly = *comps;
  V.eval = [comps, n](ConstVec x, MutVec out) {
    for (int i = 0; i < n; ++i) out[i] = (*comps)[i].eval(x);
  };
  auto jac = std::make_shared<std::vector<Poly>>();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) jac->push_back((*comps)[i].derivative(k));
  V.jacobian = [jac, n](ConstVec x, MutVec out) {
    for (int i = 0; i < n * n; ++i) out[i] = (*jac)[i].eval(x);
  };
  return V;
}

ScalarField ScalarField::from_poly(Poly p) {
  ScalarField f;
  const int n = p.nvars();
  auto base = std::make_shared<Poly>(std::move(p));
  f.poly = *base;
  f.value = [base](ConstVec x) { return base->eval(x); };
  auto grads = std::make_shared<std::vector<Poly>>();
  for (int k = 0; k < n; ++k) grads->push_back(base->derivative(k));
  f.gradient = [grads, n](ConstVec x, MutVec out) {
    for (int k = 0; k < n; ++k) out[k] = (*grads)[k].eval(x);
  };
  auto hess = std::make_shared<std::vector<Poly>>();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) hess->push_back((*grads)[i].derivative(k));
  f.hessian = [hess, n](ConstVec x, MutVec out) {
    for (int i = 0; i < n * n; ++i) out[i] = (*hess)[i].eval(x);
  };
  return f;
}

ScalarField ScalarField::from_fn(std::function<double(ConstVec)> fn) {
  ScalarField f;
  f.value = std::move(fn);
  return f;
}

void Model::validate() const {
  if (dim < 1 || d < 1) throw ArgumentError("Model: need dim >= 1 and d >= 1");
  if (static_cast<int>(fields.size()) != d + 1)
    throw ArgumentError("Model: need d+1 fields (slot 0 = Stratonovich drift)");
  if (semigroup_diag && static_cast<int>(semigroup_diag->size()) != dim)
    throw ArgumentError("Model: semigroup_diag size mismatch");
  if (semigroup_diag)
    for (double mu : *semigroup_diag)
      if (mu > semigroup_shift)
        throw ArgumentError("Model: semigroup eigenvalues must respect the shift bound");
  if (!exact_flows.empty() && static_cast<int>(exact_flows.size()) != d + 1)
    throw ArgumentError("Model: exact_flows must cover all d+1 slots");
}

double fd_step(ConstVec x) {
  static const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
  return cbrt_eps * (1.0 + norm2(x));
}

double lie_derivative(const VectorField& V, const ScalarField& f, ConstVec x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> v(n);
  V.eval(x, v);
  if (f.gradient) {
    std::vector<double> g(n);
    f.gradient(x, g);
    return dot(g, v);
  }
  const double vn = norm2(v);
  if (vn == 0.0) return 0.0;
  const double h = fd_step(x);
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  for (int i = 0; i < n; ++i) {
    xp[i] += h * v[i] / vn;
    xm[i] -= h * v[i] / vn;
  }
  return (f.value(xp) - f.value(xm)) / (2.0 * h) * vn;
}

ScalarField lie_derivative_field(const VectorField& V, const ScalarField& f) {
  ScalarField g;
  if (V.poly && f.poly) {
    Poly acc(f.poly->nvars());
    for (int k = 0; k < f.poly->nvars(); ++k)
      acc += (*V.poly)[k] * f.poly->derivative(k);
    return ScalarField::from_poly(std::move(acc));
  }
  auto Vc = std::make_shared<VectorField>(V);
  auto fc = std::make_shared<ScalarField>(f);
  g.value = [Vc, fc](ConstVec x) { return lie_derivative(*Vc, *fc, x); };
  if (f.gradient && f.hessian && V.jacobian) {
    // D(L_V f) = Hess(f) V + (DV)^T grad(f)
    g.gradient = [Vc, fc](ConstVec x, MutVec out) {
      const int n = static_cast<int>(x.size());
      std::vector<double> v(n), gr(n), H(n * n), J(n * n);
      Vc->eval(x, v);
      fc->gradient(x, gr);
      fc->hessian(x, H);
      Vc->jacobian(x, J);
      for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += H[i * n + k] * v[k] + J[k * n + i] * gr[k];
        out[i] = s;
      }
    };
  }
  return g;
}

namespace {

/// Effective drift field beta_0(x) = A x + V_0(x) used wherever index 0
/// appears in expansion words.
VectorField effective_drift(const Model& m) {
  if (!m.semigroup_diag) return m.fields[0];
  if (m.fields[0].poly) {
    std::vector<Poly> comps = *m.fields[0].poly;
    for (int k = 0; k < m.dim; ++k)
      comps[k] += Poly::var(m.dim, k) * (*m.semigroup_diag)[k];
    return VectorField::from_poly(std::move(comps));
  }
  VectorField V;
  auto base = std::make_shared<VectorField>(m.fields[0]);
  auto diag = std::make_shared<std::vector<double>>(*m.semigroup_diag);
  V.eval = [base, diag](ConstVec x, MutVec out) {
    base->eval(x, out);
    for (std::size_t k = 0; k < x.size(); ++k) out[k] += (*diag)[k] * x[k];
  };
  if (base->jacobian) {
    V.jacobian = [base, diag](ConstVec x, MutVec out) {
      const int n = static_cast<int>(x.size());
      base->jacobian(x, out);
      for (int k = 0; k < n; ++k) out[k * n + k] += (*diag)[k];
    };
  }
  return V;
}

}  // namespace

double iterated_vector_fields(const Model& m, const MultiIndex& alpha,
                              const ScalarField& f, ConstVec x) {
  m.validate();
  for (int e : alpha.entries)
    if (e < 0 || e > m.d)
      throw ArgumentError("iterated_vector_fields: word entry out of range");
  const VectorField drift = effective_drift(m);
  auto field_at = [&](int j) -> const VectorField& {
    return j == 0 ? drift : m.fields[j];
  };
  // Innermost application first: for alpha = (i1, ..., ik) build
  // V_{ik} f, then V_{ik-1}(V_{ik} f), ..., finishing with V_{i1}.
  ScalarField cur = f;
  for (int l = alpha.length() - 1; l >= 1; --l)
    cur = lie_derivative_field(field_at(alpha.entries[l]), cur);
  if (alpha.length() == 0) return f.value(x);
  return lie_derivative(field_at(alpha.entries[0]), cur, x);
}

double apply_generator(const Model& m, const ScalarField& f, ConstVec x) {
  m.validate();
  double acc = lie_derivative(effective_drift(m), f, x);
  for (int j = 1; j <= m.d; ++j)
    acc += 0.5 * lie_derivative(m.fields[j], lie_derivative_field(m.fields[j], f), x);
  return acc;
}

bool generator_is_exact(const Model& m, const ScalarField& f) {
  if (!f.poly) return false;
  for (const auto& V : m.fields)
    if (!V.poly) return false;
  return true;
}

ScalarField generator_field(const Model& m, const ScalarField& f) {
  m.validate();
  if (generator_is_exact(m, f)) {
    const int n = m.dim;
    auto lie_poly = [&](const std::vector<Poly>& V, const Poly& g) {
      Poly acc(n);
      for (int k = 0; k < n; ++k) acc += V[k] * g.derivative(k);
      return acc;
    };
    std::vector<Poly> beta0 = *m.fields[0].poly;
    if (m.semigroup_diag)
      for (int k = 0; k < n; ++k)
        beta0[k] += Poly::var(n, k) * (*m.semigroup_diag)[k];
    Poly acc = lie_poly(beta0, *f.poly);
    for (int j = 1; j <= m.d; ++j) {
      const auto& Vj = *m.fields[j].poly;
      acc += 0.5 * lie_poly(Vj, lie_poly(Vj, *f.poly));
    }
    return ScalarField::from_poly(std::move(acc));
  }
  auto mc = std::make_shared<Model>(m);
  auto fc = std::make_shared<ScalarField>(f);
  return ScalarField::from_fn(
      [mc, fc](ConstVec x) { return apply_generator(*mc, *fc, x); });
}

VectorField stratonovich_drift(const VectorField& b_ito,
                               const std::vector<VectorField>& diffusion) {
  VectorField V;
  auto b = std::make_shared<VectorField>(b_ito);
  auto sig = std::make_shared<std::vector<VectorField>>(diffusion);
  V.eval = [b, sig](ConstVec x, MutVec out) {
    const int n = static_cast<int>(x.size());
    b->eval(x, out);
    std::vector<double> v(n), J(n * n);
    for (const auto& Vj : *sig) {
      Vj.eval(x, v);
      if (Vj.jacobian) {
        Vj.jacobian(x, J);
      } else {
        // Central-difference Jacobian column by column.
        const double h = fd_step(x);
        std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
        std::vector<double> fp(n), fm(n);
        for (int k = 0; k < n; ++k) {
          xp[k] += h;
          xm[k] -= h;
          Vj.eval(xp, fp);
          Vj.eval(xm, fm);
          for (int i = 0; i < n; ++i) J[i * n + k] = (fp[i] - fm[i]) / (2.0 * h);
          xp[k] = x[k];
          xm[k] = x[k];
        }
      }
      for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += J[i * n + k] * v[k];
        out[i] -= 0.5 * s;
      }
    }
  };
  return V;
}

}  // namespace cubsde
