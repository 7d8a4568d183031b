#include "cubsde/scheme.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace cubsde {

void Mesh::validate() const {
  if (times.size() < 2) throw ArgumentError("mesh: need at least one step");
  if (times.front() != 0.0) throw ArgumentError("mesh: must start at 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1])
      throw ArgumentError("mesh: times must be strictly increasing");
}

Mesh uniform_mesh(double T, int n) {
  if (T <= 0 || n < 1) throw ArgumentError("uniform_mesh: need T > 0, n >= 1");
  Mesh m;
  m.kind = MeshKind::Uniform;
  m.times.resize(n + 1);
  for (int i = 0; i <= n; ++i) m.times[i] = T * i / n;
  m.times[n] = T;
  return m;
}

Mesh graded_mesh(double T, int n, double gamma) {
  if (T <= 0 || n < 1) throw ArgumentError("graded_mesh: need T > 0, n >= 1");
  if (gamma <= 1.0) throw ArgumentError("graded_mesh: need gamma > 1");
  Mesh m;
  m.kind = MeshKind::Graded;
  m.gamma = gamma;
  m.times.resize(n + 1);
  for (int i = 0; i <= n; ++i)
    m.times[i] = T * (1.0 - std::pow(1.0 - double(i) / n, gamma));
  m.times[0] = 0.0;
  m.times[n] = T;
  return m;
}

namespace {

/// Run fn(0..items-1) on up to `threads` workers; work items must write to
/// disjoint state.  Exceptions are rethrown on the calling thread.
void run_items(int items, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, items));
  if (threads == 1) {
    for (int i = 0; i < items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= items || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Per-level scaled paths (plus frame caches for mild models), shared by the
/// tree walk and the Monte Carlo chain.
struct StepContext {
  const Model* model = nullptr;
  FlowConfig cfg;
  bool mild = false;
  int levels = 0;
  std::vector<std::vector<CubaturePath>> paths;   // [level][path index]
  std::vector<std::vector<FrameCache>> caches;    // mild only

  void build(const Model& m, const CubatureFormula& f, const Mesh& mesh,
             const FlowConfig& c) {
    model = &m;
    cfg = c;
    mild = m.semigroup_diag.has_value();
    levels = mesh.steps();
    paths.resize(levels);
    if (mild) caches.resize(levels);
    for (int i = 0; i < levels; ++i) {
      const double dt = mesh.dt(i);
      // Identical step sizes share one set of scaled paths.
      int same = -1;
      for (int j = 0; j < i; ++j)
        if (mesh.dt(j) == dt) { same = j; break; }
      if (same >= 0) {
        paths[i] = paths[same];
        if (mild) caches[i] = caches[same];
        continue;
      }
      paths[i].reserve(f.size());
      for (const auto& p : f.paths) paths[i].push_back(scale_path(p, dt));
      if (mild) {
        caches[i].reserve(f.size());
        for (const auto& p : paths[i])
          caches[i].push_back(build_frame_cache(m, p, c.rk4_steps));
      }
    }
  }

  void edge(int level, int p, ConstVec xin, MutVec xout) const {
    if (mild)
      evolve_mild(*model, xin, paths[level][p], cfg, xout, &caches[level][p]);
    else
      evolve(*model, xin, paths[level][p], cfg, xout);
  }
};

void dfs_leafsum(const StepContext& ctx, const std::vector<double>& weights,
                 const std::vector<ScalarField>& fs, int level, const double* x,
                 int dim, double w, double* xstack, double* acc) {
  if (level == ctx.levels) {
    for (std::size_t k = 0; k < fs.size(); ++k)
      acc[k] += w * fs[k].value(ConstVec{x, (std::size_t)dim});
    return;
  }
  double* y = xstack + static_cast<std::size_t>(level) * dim;
  for (std::size_t p = 0; p < weights.size(); ++p) {
    ctx.edge(level, static_cast<int>(p), ConstVec{x, (std::size_t)dim},
             MutVec{y, (std::size_t)dim});
    dfs_leafsum(ctx, weights, fs, level + 1, y, dim, w * weights[p], xstack, acc);
  }
}

std::vector<double> full_tree_eval(const Model& m, const CubatureFormula& f,
                                   const std::vector<ScalarField>& fs, ConstVec x,
                                   const Mesh& mesh, const EvalPlan& plan,
                                   EvalResult* stats) {
  const int n = mesh.steps();
  const int N = f.size();
  const double leaves_d = std::pow(double(N), double(n));
  if (leaves_d > double(plan.budget)) {
    const std::uint64_t sug = std::max<std::uint64_t>(plan.budget / std::max(n, 1), 1);
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "full tree needs %.3g leaves (budget %llu); a MonteCarlo plan with "
                  "about %llu samples has comparable cost",
                  leaves_d, static_cast<unsigned long long>(plan.budget),
                  static_cast<unsigned long long>(sug));
    throw PlanError(msg);
  }

  StepContext ctx;
  ctx.build(m, f, mesh, plan.flow);
  const int dim = m.dim;
  const std::size_t P = fs.size();

  // One partial sum per top branch, reduced in branch order afterwards, so
  // the result does not depend on how branches land on workers.
  std::vector<std::vector<double>> partial(N, std::vector<double>(P, 0.0));
  run_items(N, plan.threads, [&](int b) {
    std::vector<double> xstack(static_cast<std::size_t>(std::max(n, 1)) * dim);
    double* y = xstack.data();
    ctx.edge(0, b, x, MutVec{y, (std::size_t)dim});
    dfs_leafsum(ctx, f.weights, fs, 1, y, dim, f.weights[b], xstack.data(),
                partial[b].data());
  });

  std::vector<double> out(P, 0.0);
  for (int b = 0; b < N; ++b)
    for (std::size_t k = 0; k < P; ++k) out[k] += partial[b][k];
  if (stats) stats->leaves = static_cast<std::uint64_t>(leaves_d + 0.5);
  return out;
}

constexpr std::int64_t kMcBlock = 8192;

std::vector<double> monte_carlo_eval(const Model& m, const CubatureFormula& f,
                                     const std::vector<ScalarField>& fs, ConstVec x,
                                     const Mesh& mesh, const EvalPlan& plan,
                                     EvalResult* stats, std::vector<double>* errs,
                                     std::vector<double>* cov) {
  if (plan.samples < 1) throw ArgumentError("monte carlo: need samples >= 1");
  for (double w : f.weights)
    if (w <= 0.0)
      throw ArgumentError("monte carlo: path weights must be strictly positive");

  StepContext ctx;
  ctx.build(m, f, mesh, plan.flow);
  const int n = mesh.steps();
  const int N = f.size();
  const int dim = m.dim;
  const std::size_t P = fs.size();
  const std::size_t npairs = P * (P + 1) / 2;

  std::vector<double> cum(N);
  double c = 0;
  for (int i = 0; i < N; ++i) { c += f.weights[i]; cum[i] = c; }
  cum[N - 1] = 1.0;  // weights sum to 1 up to round-off

  const std::int64_t nblocks = (plan.samples + kMcBlock - 1) / kMcBlock;
  // Per-block sums of payoff values and their pairwise products; blocks are
  // filled independently and reduced in index order, so the estimate is the
  // same for any worker count.
  std::vector<double> slab(static_cast<std::size_t>(nblocks) * (P + npairs), 0.0);

  run_items(static_cast<int>(nblocks), plan.threads, [&](int b) {
    std::mt19937_64 rng(block_seed(plan.seed, static_cast<std::uint64_t>(b)));
    const std::int64_t count =
        std::min<std::int64_t>(kMcBlock, plan.samples - std::int64_t(b) * kMcBlock);
    double* S = slab.data() + static_cast<std::size_t>(b) * (P + npairs);
    double* Q = S + P;
    std::vector<double> xa(dim), xb(dim), fv(P);
    for (std::int64_t s = 0; s < count; ++s) {
      std::copy(x.begin(), x.end(), xa.begin());
      for (int lev = 0; lev < n; ++lev) {
        const double u = double(rng() >> 11) * 0x1.0p-53;
        const int idx = int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        ctx.edge(lev, std::min(idx, N - 1), xa, xb);
        std::swap(xa, xb);
      }
      for (std::size_t k = 0; k < P; ++k) fv[k] = fs[k].value(xa);
      std::size_t q = 0;
      for (std::size_t k = 0; k < P; ++k) {
        S[k] += fv[k];
        for (std::size_t l = k; l < P; ++l) Q[q++] += fv[k] * fv[l];
      }
    }
  });

  std::vector<double> sum(P, 0.0), psum(npairs, 0.0);
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const double* S = slab.data() + static_cast<std::size_t>(b) * (P + npairs);
    for (std::size_t k = 0; k < P; ++k) sum[k] += S[k];
    for (std::size_t q = 0; q < npairs; ++q) psum[q] += S[P + q];
  }

  const double Ns = double(plan.samples);
  std::vector<double> out(P);
  for (std::size_t k = 0; k < P; ++k) out[k] = sum[k] / Ns;

  if (errs || cov) {
    std::vector<double> cmat(P * P, 0.0);
    if (plan.samples > 1) {
      std::size_t q = 0;
      for (std::size_t k = 0; k < P; ++k)
        for (std::size_t l = k; l < P; ++l) {
          const double c_kl = (psum[q++] - Ns * out[k] * out[l]) / (Ns - 1.0) / Ns;
          cmat[k * P + l] = cmat[l * P + k] = c_kl;
        }
    }
    if (errs) {
      errs->resize(P);
      for (std::size_t k = 0; k < P; ++k)
        (*errs)[k] = std::sqrt(std::max(cmat[k * P + k], 0.0));
    }
    if (cov) *cov = std::move(cmat);
  }
  if (stats) stats->leaves = static_cast<std::uint64_t>(plan.samples);
  return out;
}

}  // namespace

void one_step_points(const Model& m, const CubatureFormula& formula, ConstVec x,
                     double dt, const FlowConfig& cfg,
                     std::vector<std::vector<double>>& points) {
  if (dt <= 0) throw ArgumentError("one_step: need dt > 0");
  if (formula.d != m.d) throw ArgumentError("one_step: formula/model dimension mismatch");
  const bool mild = m.semigroup_diag.has_value();
  points.assign(formula.size(), std::vector<double>(m.dim));
  for (int i = 0; i < formula.size(); ++i) {
    const CubaturePath p = scale_path(formula.paths[i], dt);
    if (mild)
      evolve_mild(m, x, p, cfg, points[i]);
    else
      evolve(m, x, p, cfg, points[i]);
  }
}

double one_step(const Model& m, const CubatureFormula& formula,
                const ScalarField& f, ConstVec x, double dt,
                const FlowConfig& cfg) {
  std::vector<std::vector<double>> pts;
  one_step_points(m, formula, x, dt, cfg, pts);
  double s = 0;
  for (int i = 0; i < formula.size(); ++i) s += formula.weights[i] * f.value(pts[i]);
  return s;
}

std::vector<double> compose_multi(const Model& m, const CubatureFormula& formula,
                                  const std::vector<ScalarField>& fs, ConstVec x,
                                  const Mesh& mesh, const EvalPlan& plan,
                                  EvalResult* stats, std::vector<double>* errs,
                                  std::vector<double>* cov) {
  mesh.validate();
  formula.validate();
  if (formula.d != m.d) throw ArgumentError("compose: formula/model dimension mismatch");
  if (static_cast<int>(x.size()) != m.dim)
    throw ArgumentError("compose: state dimension mismatch");
  if (fs.empty()) return {};
  Stopwatch clock;
  std::vector<double> out;
  if (plan.strategy == Strategy::FullTree) {
    out = full_tree_eval(m, formula, fs, x, mesh, plan, stats);
    if (errs) errs->assign(fs.size(), 0.0);
    if (cov) cov->assign(fs.size() * fs.size(), 0.0);
  } else {
    out = monte_carlo_eval(m, formula, fs, x, mesh, plan, stats, errs, cov);
  }
  if (stats) {
    stats->value = out[0];
    stats->std_error = errs && !errs->empty() ? (*errs)[0] : 0.0;
    stats->seconds = clock.seconds();
  }
  return out;
}

double compose(const Model& m, const CubatureFormula& formula,
               const ScalarField& f, ConstVec x, const Mesh& mesh,
               const EvalPlan& plan, EvalResult* stats) {
  std::vector<double> errs;
  const auto v = compose_multi(m, formula, {f}, x, mesh, plan, stats, &errs);
  if (stats && !errs.empty()) stats->std_error = errs[0];
  return v[0];
}

SlopeFit fit_slope(const std::vector<double>& scales,
                   const std::vector<double>& errors, double floor_value) {
  if (scales.size() != errors.size())
    throw ArgumentError("fit_slope: length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(errors[i] > floor_value) || !std::isfinite(errors[i])) continue;
    lx.push_back(std::log(scales[i]));
    ly.push_back(std::log(errors[i]));
  }
  SlopeFit fit;
  fit.points_used = static_cast<int>(lx.size());
  if (lx.size() < 2) return fit;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
  mx /= lx.size();
  my /= ly.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0) return fit;
  fit.slope = sxy / sxx;
  fit.defined = true;
  return fit;
}

StabilityReport stability_probe(const Model& m, const CubatureFormula& formula,
                                const WeightFunction& psi,
                                const std::vector<std::vector<double>>& x_grid,
                                const std::vector<double>& dt_grid,
                                const FlowConfig& cfg) {
  if (x_grid.empty() || dt_grid.empty())
    throw ArgumentError("stability_probe: empty grid");
  for (double w : formula.weights)
    if (w <= 0.0)
      throw ArgumentError("stability_probe: needs strictly positive weights");
  std::vector<double> logw(formula.size());
  for (int i = 0; i < formula.size(); ++i) logw[i] = std::log(formula.weights[i]);

  StabilityReport rep;
  rep.dts = dt_grid;
  rep.per_dt_max.assign(dt_grid.size(), -std::numeric_limits<double>::infinity());
  rep.ratio.assign(x_grid.size(), std::vector<double>(dt_grid.size(), 0.0));
  std::vector<std::vector<double>> pts;
  std::vector<double> terms(formula.size());
  rep.c_tilde = -std::numeric_limits<double>::infinity();
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    const auto& xv = x_grid[ix];
    const double log_psi_x = psi.log_value(xv);
    for (std::size_t it = 0; it < dt_grid.size(); ++it) {
      const double dt = dt_grid[it];
      if (dt <= 0) throw ArgumentError("stability_probe: need dt > 0");
      one_step_points(m, formula, xv, dt, cfg, pts);
      for (int i = 0; i < formula.size(); ++i)
        terms[i] = logw[i] + psi.log_value(pts[i]);
      const double r = (logsumexp(terms) - log_psi_x) / dt;
      rep.ratio[ix][it] = r;
      rep.per_dt_max[it] = std::max(rep.per_dt_max[it], r);
      rep.c_tilde = std::max(rep.c_tilde, r);
    }
  }
  rep.bounded = std::isfinite(rep.c_tilde);
  for (double v : rep.per_dt_max)
    if (!std::isfinite(v) || v > rep.c_tilde + 0.1) rep.bounded = false;
  return rep;
}

LocalOrderReport local_order_probe(const Model& m, const CubatureFormula& formula,
                                   const ScalarField& f, ConstVec x,
                                   const std::vector<double>& dt_list, int k,
                                   const FlowConfig& cfg) {
  if (k < 0) throw ArgumentError("local_order_probe: need k >= 0");
  if (formula.order < 2 * k + 1)
    throw ArgumentError("local_order_probe: formula order below 2k+1");
  std::vector<double> gj(k + 1);
  ScalarField cur = f;
  gj[0] = f.value(x);
  for (int j = 1; j <= k; ++j) {
    cur = generator_field(m, cur);
    gj[j] = cur.value(x);
  }

  LocalOrderReport rep;
  rep.dts = dt_list;
  rep.defects.resize(dt_list.size());
  for (std::size_t i = 0; i < dt_list.size(); ++i) {
    const double dt = dt_list[i];
    double taylor = 0, fact = 1, pow_dt = 1;
    for (int j = 0; j <= k; ++j) {
      taylor += pow_dt / fact * gj[j];
      pow_dt *= dt;
      fact *= (j + 1);
    }
    rep.defects[i] = std::abs(one_step(m, formula, f, x, dt, cfg) - taylor);
  }
  const double floor_value = 1e-12 * (1.0 + std::abs(gj[0]));
  const SlopeFit fit = fit_slope(dt_list, rep.defects, floor_value);
  rep.slope = fit.slope;
  rep.points_used = fit.points_used;
  rep.slope_defined = fit.defined;
  rep.expansion_exact =
      std::all_of(rep.defects.begin(), rep.defects.end(),
                  [&](double e) { return e <= floor_value; });
  return rep;
}

ConvergenceReport convergence_study(const Model& m, const CubatureFormula& formula,
                                    const ScalarField& f, ConstVec x, double T,
                                    const std::vector<int>& n_list,
                                    const EvalPlan& plan, double reference,
                                    std::string reference_provenance) {
  if (n_list.size() < 3)
    throw ArgumentError("convergence_study: need at least three n values");
  ConvergenceReport rep;
  rep.reference_provenance = std::move(reference_provenance);
  std::vector<double> ns, errs;
  for (int n : n_list) {
    const Mesh mesh = uniform_mesh(T, n);
    EvalResult stats;
    const double v = compose(m, formula, f, x, mesh, plan, &stats);
    ConvergenceRow row;
    row.n = n;
    row.kind = mesh.kind;
    row.strategy = plan.strategy;
    row.value = v;
    row.reference = reference;
    row.abs_error = std::abs(v - reference);
    row.rel_error = reference != 0.0 ? row.abs_error / std::abs(reference) : row.abs_error;
    row.std_error = stats.std_error;
    row.seconds = stats.seconds;
    row.leaves = stats.leaves;
    rep.rows.push_back(row);
    const double floor_value = std::max(1e-11, 10.0 * stats.std_error);
    if (row.abs_error > floor_value) {
      ns.push_back(double(n));
      errs.push_back(row.abs_error);
    }
  }
  SlopeFit fit = fit_slope(ns, errs, 0.0);
  fit.slope = -fit.slope;  // error ~ n^{-order}
  rep.order = fit;
  return rep;
}

GradedStudy graded_mesh_study(const Model& m, const CubatureFormula& formula,
                              const ScalarField& f, ConstVec x, double T,
                              const std::vector<int>& n_list, double gamma,
                              const EvalPlan& plan, double reference,
                              std::string reference_provenance) {
  GradedStudy study;
  study.gamma = gamma;
  study.uniform = convergence_study(m, formula, f, x, T, n_list, plan, reference,
                                    reference_provenance);
  ConvergenceReport graded;
  graded.reference_provenance = reference_provenance;
  std::vector<double> ns, errs;
  for (int n : n_list) {
    const Mesh mesh = graded_mesh(T, n, gamma);
    EvalResult stats;
    const double v = compose(m, formula, f, x, mesh, plan, &stats);
    ConvergenceRow row;
    row.n = n;
    row.kind = MeshKind::Graded;
    row.strategy = plan.strategy;
    row.value = v;
    row.reference = reference;
    row.abs_error = std::abs(v - reference);
    row.rel_error = reference != 0.0 ? row.abs_error / std::abs(reference) : row.abs_error;
    row.std_error = stats.std_error;
    row.seconds = stats.seconds;
    row.leaves = stats.leaves;
    graded.rows.push_back(row);
    const double floor_value = std::max(1e-11, 10.0 * stats.std_error);
    if (row.abs_error > floor_value) {
      ns.push_back(double(n));
      errs.push_back(row.abs_error);
    }
  }
  SlopeFit fit = fit_slope(ns, errs, 0.0);
  fit.slope = -fit.slope;
  graded.order = fit;
  study.graded = std::move(graded);
  return study;
}

namespace {

const char* mesh_name(MeshKind k) {
  return k == MeshKind::Uniform ? "uniform" : "graded";
}

const char* strategy_name(Strategy s) {
  return s == Strategy::FullTree ? "full_tree" : "monte_carlo";
}

}  // namespace

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "n,mesh_kind,strategy,value,reference,abs_error,rel_error,seconds\n";
  for (const auto& r : rows)
    os << r.n << ',' << mesh_name(r.kind) << ',' << strategy_name(r.strategy) << ','
       << format_full(r.value) << ',' << format_full(r.reference) << ','
       << format_full(r.abs_error) << ',' << format_full(r.rel_error) << ','
       << format_full(r.seconds) << '\n';
}

void write_stability_csv(std::ostream& os,
                         const std::vector<std::vector<double>>& x_grid,
                         const StabilityReport& report) {
  if (x_grid.empty()) return;
  for (std::size_t k = 0; k < x_grid[0].size(); ++k) os << 'x' << k << ',';
  os << "dt,ratio\n";
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix)
    for (std::size_t it = 0; it < report.dts.size(); ++it) {
      for (double xv : x_grid[ix]) os << format_full(xv) << ',';
      os << format_full(report.dts[it]) << ',' << format_full(report.ratio[ix][it])
         << '\n';
    }
}

}  // namespace cubsde
