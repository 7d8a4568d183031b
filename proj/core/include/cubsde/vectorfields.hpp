#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cubsde/cubature.hpp"
#include "cubsde/poly.hpp"
#include "cubsde/util.hpp"

namespace cubsde {

/// Smooth vector field on R^n.  `jacobian` (row-major n x n) and `poly`
/// (one polynomial per component) are optional upgrades: when present they
/// unlock analytic Lie derivatives and exact generator algebra.
struct VectorField {
  std::function<void(ConstVec, MutVec)> eval;
  std::function<void(ConstVec, MutVec)> jacobian;
  std::optional<std::vector<Poly>> poly;

  static VectorField from_poly(std::vector<Poly> components);
};

/// Scalar function with optional analytic gradient, Hessian (row-major), and
/// polynomial representation.
struct ScalarField {
  std::function<double(ConstVec)> value;
  std::function<void(ConstVec, MutVec)> gradient;
  std::function<void(ConstVec, MutVec)> hessian;
  std::optional<Poly> poly;

  static ScalarField from_poly(Poly p);
  static ScalarField from_fn(std::function<double(ConstVec)> f);
};

/// Closed-form segment flows (x, h) -> state, one per field slot 0..d.
/// Slot 0 advances model time by h; slot j >= 1 follows V_j for increment h.
/// Implementations must tolerate `out` aliasing the input state.
using FlowFn = std::function<void(ConstVec, double, MutVec)>;

/// Stratonovich-form model dX = (A X + V_0(X)) dt + sum_j V_j(X) o dB^j.
/// `semigroup_diag`, when present, holds the eigenvalues of a diagonal A
/// (spectral truncation of a pseudocontractive generator; the stored shift
/// bounds them from above).  fields[0] is the Stratonovich drift V_0.
struct Model {
  int dim = 0;
  int d = 0;
  std::vector<VectorField> fields;
  std::optional<std::vector<double>> semigroup_diag;
  double semigroup_shift = 0.0;
  std::vector<FlowFn> exact_flows;
  /// Optional per-field coordinate support: field j reads and writes only the
  /// listed state indices (an empty list declares the zero field).  Leaving
  /// the outer vector empty means unknown, i.e. every coordinate.  Used to
  /// restrict moving-frame integration to the touched coordinates.
  std::vector<std::vector<int>> field_support;

  bool has_exact_flows() const { return !exact_flows.empty(); }
  void validate() const;
};

/// Step size for central differences of a scalar at x.
double fd_step(ConstVec x);

/// L_V f(x) = Df(x) V(x); analytic when f has a gradient, otherwise a
/// central difference along V(x).
double lie_derivative(const VectorField& V, const ScalarField& f, ConstVec x);

/// L_V f as a ScalarField.  Its gradient is analytic when f has gradient and
/// Hessian and V has a Jacobian; deeper data is not propagated, so iterating
/// falls back to finite differences (noisy beyond a few levels).
ScalarField lie_derivative_field(const VectorField& V, const ScalarField& f);

/// V_{i_1}(V_{i_2}(...(f)))(x), innermost first; index 0 means the effective
/// drift A x + V_0.
double iterated_vector_fields(const Model& m, const MultiIndex& alpha,
                              const ScalarField& f, ConstVec x);

/// G f(x) = Df(x)(A x) + L_{V_0} f(x) + 1/2 sum_j L_{V_j}^2 f(x).
double apply_generator(const Model& m, const ScalarField& f, ConstVec x);

/// G f as a ScalarField; exact polynomial algebra when the model's fields and
/// f are polynomial, numeric closures otherwise.
ScalarField generator_field(const Model& m, const ScalarField& f);

/// True when generator_field can iterate exactly on f.
bool generator_is_exact(const Model& m, const ScalarField& f);

/// Ito-to-Stratonovich drift: b(x) - 1/2 sum_j DV_j(x) V_j(x), using analytic
/// Jacobians where provided and central differences otherwise.
VectorField stratonovich_drift(const VectorField& b_ito,
                               const std::vector<VectorField>& diffusion);

}  // namespace cubsde
