#pragma once

#include <iosfwd>
#include <vector>

#include "cubsde/quadrature.hpp"
#include "cubsde/util.hpp"

namespace cubsde {

/// Word over the alphabet {0, 1, ..., d}; 0 is the time component.  The
/// degree counts zeros twice, matching the scaling of iterated integrals.
struct MultiIndex {
  std::vector<int> entries;
  int length() const { return static_cast<int>(entries.size()); }
  int degree() const {
    int z = 0;
    for (int e : entries) z += (e == 0);
    return length() + z;
  }
};

/// All multi-indices over {0..d} with degree() <= max_degree, ordered by
/// length and then lexicographically.
std::vector<MultiIndex> enumerate_multiindices(int d, int max_degree);

/// Piecewise-linear driver path on [0, duration] with d Brownian components
/// plus the time component at slot 0.  slopes[k][j] is the slope of component
/// j on [breakpoints[k], breakpoints[k+1]].  The time component must be
/// nondecreasing with omega^0(0) = 0 and omega^0(duration) = duration; for
/// simple paths it is just s, but the Ninomiya-Victoir layout runs it on a
/// dedicated segment.
struct CubaturePath {
  int d = 0;
  double duration = 1.0;
  std::vector<double> breakpoints;
  std::vector<std::vector<double>> slopes;

  int segments() const { return static_cast<int>(slopes.size()); }
  /// omega^j(s); j in 0..d.
  double value(int j, double s) const;
  void validate() const;
};

struct CubatureFormula {
  int d = 0;
  int order = 0;  // degree m the formula is meant to match
  std::vector<CubaturePath> paths;
  std::vector<double> weights;
  int size() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

/// Brownian scaling to step size dt: breakpoints stretch by dt, Brownian
/// slopes divide by sqrt(dt) (so values shrink by sqrt(dt)), and the time
/// component becomes dt * omega^0(s/dt).
CubaturePath scale_path(const CubaturePath& p, double dt);
CubatureFormula scale_formula(const CubatureFormula& f, double dt);

/// Iterated Stratonovich (= Riemann-Stieltjes here) integral of the path over
/// its whole interval for the word alpha, computed exactly by per-segment
/// polynomial recursion.
double path_iterated_integral(const CubaturePath& p, const MultiIndex& alpha);

/// Weighted combination over the formula's paths.
double formula_iterated_integral(const CubatureFormula& f, const MultiIndex& alpha);

/// E of the iterated Stratonovich integral of Brownian motion with time over
/// [0,1] for the word alpha.  Supported up to degree 7.
double expected_iterated_integral(const MultiIndex& alpha);

struct OrderDefect {
  MultiIndex alpha;
  double value = 0;
  double expected = 0;
  double defect = 0;
};

struct OrderReport {
  int order = 0;
  double max_defect = 0;
  MultiIndex worst;
  std::vector<OrderDefect> rows;
};

/// Check the moment-matching conditions for all words of degree <= m.
OrderReport verify_order(const CubatureFormula& f, int m);

/// max over components j>=1 and times s of |sum_i lambda_i omega_i^j(s)|,
/// evaluated on the union of all breakpoints, segment midpoints, and an
/// equispaced grid.
double check_weak_symmetry(const CubatureFormula& f, int grid_points = 64);

/// Append the Brownian-negated copy of every path with halved weights.
/// Idempotent in effect: the result is weakly symmetric.
CubatureFormula symmetrize(const CubatureFormula& f);

/// Ninomiya-Victoir construction: for each node xi of a symmetric quadrature
/// rule for N(0,I_d), a forward path running time on the first of d+1 equal
/// subintervals and then component j with increment xi_j on subinterval j+1,
/// plus the reversed sweep (component d, ..., component 1, time), each with
/// half the node's weight.  With a degree-5 rule the formula has order 5.
CubatureFormula build_nv_formula(const QuadratureRule& rule, int d);

/// Text round-trip with 17 significant digits (bit-exact for doubles).
void save_formula(const CubatureFormula& f, std::ostream& os);
CubatureFormula load_formula(std::istream& is);

}  // namespace cubsde
