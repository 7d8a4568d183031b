#include "cubsde/cubature.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace cubsde {

std::vector<MultiIndex> enumerate_multiindices(int d, int max_degree) {
  if (d < 1) throw ArgumentError("enumerate_multiindices: need d >= 1");
  std::vector<MultiIndex> out;
  std::vector<int> cur;
  out.push_back(MultiIndex{});  // empty word, degree 0
  // Depth-first by length; a word of length L has degree >= L, so recursion
  // depth is bounded by max_degree.
  auto rec = [&](auto&& self, int deg_left) -> void {
    for (int j = 0; j <= d; ++j) {
      const int cost = (j == 0) ? 2 : 1;
      if (cost > deg_left) continue;
      cur.push_back(j);
      out.push_back(MultiIndex{cur});
      self(self, deg_left - cost);
      cur.pop_back();
    }
  };
  rec(rec, max_degree);
  std::stable_sort(out.begin(), out.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (a.length() != b.length()) return a.length() < b.length();
    return a.entries < b.entries;
  });
  return out;
}

double CubaturePath::value(int j, double s) const {
  if (j < 0 || j > d) throw ArgumentError("CubaturePath::value: component out of range");
  double v = 0;
  for (int k = 0; k < segments(); ++k) {
    const double lo = breakpoints[k], hi = breakpoints[k + 1];
    if (s <= lo) break;
    v += slopes[k][j] * (std::min(s, hi) - lo);
  }
  return v;
}

void CubaturePath::validate() const {
  if (d < 1) throw ArgumentError("CubaturePath: need d >= 1");
  if (breakpoints.size() != slopes.size() + 1 || slopes.empty())
    throw ArgumentError("CubaturePath: breakpoints must be segment count + 1");
  if (std::abs(breakpoints.front()) != 0.0 ||
      std::abs(breakpoints.back() - duration) > 1e-12 * std::max(1.0, duration))
    throw ArgumentError("CubaturePath: breakpoints must span [0, duration]");
  double t = 0;
  for (int k = 0; k < segments(); ++k) {
    if (breakpoints[k + 1] <= breakpoints[k])
      throw ArgumentError("CubaturePath: breakpoints must increase");
    if (static_cast<int>(slopes[k].size()) != d + 1)
      throw ArgumentError("CubaturePath: each segment needs d+1 slopes");
    if (slopes[k][0] < 0)
      throw ArgumentError("CubaturePath: time component must be nondecreasing");
    t += slopes[k][0] * (breakpoints[k + 1] - breakpoints[k]);
  }
  if (std::abs(t - duration) > 1e-9 * std::max(1.0, duration))
    throw ArgumentError("CubaturePath: time component must end at the duration");
}

void CubatureFormula::validate() const {
  if (paths.size() != weights.size() || paths.empty())
    throw ArgumentError("CubatureFormula: paths/weights size mismatch");
  double s = 0;
  for (const auto& p : paths) {
    p.validate();
    if (p.d != d) throw ArgumentError("CubatureFormula: path dimension mismatch");
  }
  for (double w : weights) s += w;
  if (std::abs(s - 1.0) > 1e-12)
    throw ArgumentError("CubatureFormula: weights must sum to 1");
}

CubaturePath scale_path(const CubaturePath& p, double dt) {
  if (dt <= 0) throw ArgumentError("scale_path: need dt > 0");
  CubaturePath q;
  q.d = p.d;
  q.duration = p.duration * dt;
  q.breakpoints.resize(p.breakpoints.size());
  for (std::size_t k = 0; k < p.breakpoints.size(); ++k)
    q.breakpoints[k] = p.breakpoints[k] * dt;
  const double inv_sqrt = 1.0 / std::sqrt(dt);
  q.slopes.resize(p.slopes.size());
  for (std::size_t k = 0; k < p.slopes.size(); ++k) {
    q.slopes[k] = p.slopes[k];
    for (int j = 1; j <= p.d; ++j) q.slopes[k][j] *= inv_sqrt;
    // time slope is invariant: d/ds [dt * omega^0(s/dt)] = (omega^0)'(s/dt)
  }
  return q;
}

CubatureFormula scale_formula(const CubatureFormula& f, double dt) {
  CubatureFormula g;
  g.d = f.d;
  g.order = f.order;
  g.weights = f.weights;
  g.paths.reserve(f.paths.size());
  for (const auto& p : f.paths) g.paths.push_back(scale_path(p, dt));
  return g;
}

double path_iterated_integral(const CubaturePath& p, const MultiIndex& alpha) {
  const int L = alpha.length();
  if (L == 0) return 1.0;
  for (int e : alpha.entries)
    if (e < 0 || e > p.d)
      throw ArgumentError("path_iterated_integral: word entry out of range");
  // F_l(s) = integral of F_{l-1} d omega^{j_l}; on each segment every F_l is a
  // polynomial in the local coordinate, so march segments carrying the values
  // at the left endpoint and integrating coefficient arrays exactly.
  std::vector<double> at_left(L + 1, 0.0);
  at_left[0] = 1.0;
  // coeff[l][r]: coefficient of tau^r of F_l on the current segment.
  std::vector<std::vector<double>> coeff(L + 1);
  for (int l = 0; l <= L; ++l) coeff[l].assign(L + 1, 0.0);
  for (int k = 0; k < p.segments(); ++k) {
    const double h = p.breakpoints[k + 1] - p.breakpoints[k];
    coeff[0].assign(L + 1, 0.0);
    coeff[0][0] = 1.0;
    for (int l = 1; l <= L; ++l) {
      const double a = p.slopes[k][alpha.entries[l - 1]];
      auto& c = coeff[l];
      c.assign(L + 1, 0.0);
      c[0] = at_left[l];
      for (int r = 0; r < l; ++r) c[r + 1] = a * coeff[l - 1][r] / (r + 1);
    }
    for (int l = 1; l <= L; ++l) {
      double v = 0;
      for (int r = l; r >= 0; --r) v = v * h + coeff[l][r];
      at_left[l] = v;
    }
  }
  return at_left[L];
}

double formula_iterated_integral(const CubatureFormula& f, const MultiIndex& alpha) {
  double s = 0;
  for (int i = 0; i < f.size(); ++i)
    s += f.weights[i] * path_iterated_integral(f.paths[i], alpha);
  return s;
}

double expected_iterated_integral(const MultiIndex& alpha) {
  if (alpha.degree() > 7)
    throw ArgumentError("expected_iterated_integral: supported up to degree 7");
  // E I_alpha(t) = c t^p with a right-to-left recursion: a trailing 0 index
  // integrates the shorter word's value in time; a trailing j >= 1
  // contributes (1/2) * integral of the word with the last two entries
  // dropped when the previous entry is also j (quadratic covariation picks
  // the dB^j coefficient), and zero otherwise.
  auto rec = [&](auto&& self, int len) -> std::pair<double, int> {
    if (len == 0) return {1.0, 0};
    const int j = alpha.entries[len - 1];
    if (j == 0) {
      auto [c, p] = self(self, len - 1);
      return {c / (p + 1), p + 1};
    }
    if (len >= 2 && alpha.entries[len - 2] == j) {
      auto [c, p] = self(self, len - 2);
      return {0.5 * c / (p + 1), p + 1};
    }
    return {0.0, 0};
  };
  return rec(rec, alpha.length()).first;
}

OrderReport verify_order(const CubatureFormula& f, int m) {
  f.validate();
  OrderReport rep;
  rep.order = m;
  for (const auto& alpha : enumerate_multiindices(f.d, m)) {
    OrderDefect row;
    row.alpha = alpha;
    row.value = formula_iterated_integral(f, alpha);
    row.expected = expected_iterated_integral(alpha);
    row.defect = std::abs(row.value - row.expected);
    if (row.defect >= rep.max_defect) {
      rep.max_defect = row.defect;
      rep.worst = alpha;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

double check_weak_symmetry(const CubatureFormula& f, int grid_points) {
  f.validate();
  std::set<double> times;
  for (const auto& p : f.paths)
    for (double b : p.breakpoints) times.insert(b);
  for (int g = 0; g <= grid_points; ++g)
    times.insert(f.paths[0].duration * g / grid_points);
  std::vector<double> ts(times.begin(), times.end());
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) times.insert(0.5 * (ts[i] + ts[i + 1]));
  double worst = 0;
  for (double s : times)
    for (int j = 1; j <= f.d; ++j) {
      double acc = 0;
      for (int i = 0; i < f.size(); ++i) acc += f.weights[i] * f.paths[i].value(j, s);
      worst = std::max(worst, std::abs(acc));
    }
  return worst;
}

CubatureFormula symmetrize(const CubatureFormula& f) {
  f.validate();
  CubatureFormula g;
  g.d = f.d;
  g.order = f.order;
  for (int i = 0; i < f.size(); ++i) {
    CubaturePath neg = f.paths[i];
    for (auto& seg : neg.slopes)
      for (int j = 1; j <= f.d; ++j) seg[j] = -seg[j];
    g.paths.push_back(f.paths[i]);
    g.weights.push_back(0.5 * f.weights[i]);
    g.paths.push_back(std::move(neg));
    g.weights.push_back(0.5 * f.weights[i]);
  }
  return g;
}

CubatureFormula build_nv_formula(const QuadratureRule& rule, int d) {
  if (rule.dim != d)
    throw ArgumentError("build_nv_formula: rule dimension must equal d");
  if (!is_symmetric(rule))
    throw ArgumentError("build_nv_formula: quadrature rule must be symmetric");
  CubatureFormula f;
  f.d = d;
  f.order = 5;
  const int segs = d + 1;
  std::vector<double> bps(segs + 1);
  for (int k = 0; k <= segs; ++k) bps[k] = static_cast<double>(k) / segs;
  bps[segs] = 1.0;
  const double slope = static_cast<double>(segs);
  // Forward sweep: time, then components 1..d.  Reversed sweep: components
  // d..1, then time.  Each segment drives exactly one component, which is
  // what lets one-field-at-a-time exact flows evolve these paths.
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 0; i < rule.size(); ++i) {
      CubaturePath p;
      p.d = d;
      p.duration = 1.0;
      p.breakpoints = bps;
      p.slopes.assign(segs, std::vector<double>(d + 1, 0.0));
      if (pass == 0) {
        p.slopes[0][0] = slope;
        for (int j = 1; j <= d; ++j) p.slopes[j][j] = slope * rule.nodes[i][j - 1];
      } else {
        for (int j = d; j >= 1; --j)
          p.slopes[d - j][j] = slope * rule.nodes[i][j - 1];
        p.slopes[segs - 1][0] = slope;
      }
      f.paths.push_back(std::move(p));
      f.weights.push_back(0.5 * rule.weights[i]);
    }
  }
  f.validate();
  return f;
}

void save_formula(const CubatureFormula& f, std::ostream& os) {
  f.validate();
  os << f.d << ' ' << f.size() << ' ' << f.order << '\n';
  for (int i = 0; i < f.size(); ++i) {
    const auto& p = f.paths[i];
    os << p.segments() << ' ' << format_full(f.weights[i]) << '\n';
    for (std::size_t k = 0; k < p.breakpoints.size(); ++k)
      os << (k ? " " : "") << format_full(p.breakpoints[k]);
    os << '\n';
    for (const auto& seg : p.slopes) {
      for (std::size_t j = 0; j < seg.size(); ++j)
        os << (j ? " " : "") << format_full(seg[j]);
      os << '\n';
    }
  }
}

CubatureFormula load_formula(std::istream& is) {
  CubatureFormula f;
  int n = 0;
  if (!(is >> f.d >> n >> f.order))
    throw ArgumentError("load_formula: malformed header");
  for (int i = 0; i < n; ++i) {
    CubaturePath p;
    p.d = f.d;
    int segs = 0;
    double w = 0;
    if (!(is >> segs >> w)) throw ArgumentError("load_formula: malformed path header");
    p.breakpoints.resize(segs + 1);
    for (auto& b : p.breakpoints)
      if (!(is >> b)) throw ArgumentError("load_formula: malformed breakpoints");
    p.duration = p.breakpoints.back();
    p.slopes.assign(segs, std::vector<double>(f.d + 1));
    for (auto& seg : p.slopes)
      for (auto& a : seg)
        if (!(is >> a)) throw ArgumentError("load_formula: malformed slopes");
    f.paths.push_back(std::move(p));
    f.weights.push_back(w);
  }
  f.validate();
  return f;
}

}  // namespace cubsde
