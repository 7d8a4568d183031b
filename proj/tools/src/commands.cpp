#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cubsde/cubature.hpp"
#include "cubsde/models.hpp"
#include "cubsde/moments.hpp"
#include "cubsde/quadrature.hpp"
#include "cubsde/scheme.hpp"
#include "cubsde/weights.hpp"

namespace cubsde::cli {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string word_str(const MultiIndex& w) {
  std::string s = "(";
  for (const int e : w.entries) s += std::to_string(e);
  return s + ")";
}

std::filesystem::path out_file(const CommonOptions& opt, const std::string& name) {
  std::filesystem::path dir(opt.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + opt.out_dir +
                            "': " + ec.message());
  return dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
}

// [formula]: either a serialized file or a Gauss-Hermite product rule fed
// into the split-step construction.
CubatureFormula formula_from_config(const Config& cfg, int dimension) {
  if (cfg.has("formula", "file")) {
    if (cfg.has("formula", "degree"))
      throw ConfigError("[formula] file and degree are mutually exclusive");
    const std::string path = cfg.get_string("formula", "file");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open formula file: " + path);
    return load_formula(in);
  }
  const int degree = static_cast<int>(cfg.get_int("formula", "degree", 5));
  const int d = static_cast<int>(cfg.get_int("formula", "dimension", dimension));
  if (d < 1) throw ConfigError("[formula] dimension must be >= 1");
  if (dimension > 0 && d != dimension)
    throw ConfigError("[formula] dimension " + std::to_string(d) +
                      " does not match the model's noise dimension " +
                      std::to_string(dimension));
  return build_nv_formula(tensor_product(gauss_hermite_normal_1d(degree), d), d);
}

EvalPlan plan_from_config(const Config& cfg, const CommonOptions& opt) {
  EvalPlan plan;
  plan.strategy = cfg.get_enum("eval", "strategy", {"full_tree", "monte_carlo"},
                               "full_tree") == 0
                      ? Strategy::FullTree
                      : Strategy::MonteCarlo;
  plan.samples = cfg.get_int("eval", "samples", 1000000);
  plan.seed = cfg.get_u64("eval", "seed", 0);
  plan.budget = cfg.get_u64("eval", "budget", 100000000);
  plan.threads = static_cast<int>(cfg.get_int("eval", "threads", 1));
  const int flow =
      cfg.get_enum("eval", "flow", {"exact", "rk4", "adaptive"}, "rk4");
  plan.flow.method = flow == 0   ? FlowMethod::ExactFlows
                     : flow == 1 ? FlowMethod::RungeKutta4
                                 : FlowMethod::Adaptive;
  plan.flow.rk4_steps = static_cast<int>(cfg.get_int("eval", "rk4_steps", 8));
  plan.flow.adaptive_tol = cfg.get_double("eval", "adaptive_tol", 1e-10);
  if (opt.threads) plan.threads = *opt.threads;
  if (opt.seed) plan.seed = *opt.seed;
  if (plan.samples < 1) throw ConfigError("[eval] samples must be positive");
  if (plan.threads < 1) throw ConfigError("[eval] threads must be positive");
  return plan;
}

const std::set<std::string> kEvalKeys{"strategy", "samples",   "seed",
                                      "budget",   "threads",   "flow",
                                      "rk4_steps", "adaptive_tol"};

struct ModelInfo {
  Model model;
  int dim = 0;  // state dimension
  int d = 0;    // noise dimension
  std::vector<double> x0;
  double T = 0;
};

HestonParams heston_params(const Config& cfg) {
  const HestonParams def;
  HestonParams p;
  p.mu = cfg.get_double("model", "mu", def.mu);
  p.kappa = cfg.get_double("model", "kappa", def.kappa);
  p.theta = cfg.get_double("model", "theta", def.theta);
  p.beta = cfg.get_double("model", "beta", def.beta);
  p.rho = cfg.get_double("model", "rho", def.rho);
  p.x0 = cfg.get_double("model", "x0", def.x0);
  p.v0 = cfg.get_double("model", "v0", def.v0);
  p.T = cfg.get_double("model", "T", def.T);
  return p;
}

const std::set<std::string> kModelKeys{
    "name",  "mu", "kappa", "theta", "beta",  "rho", "x0", "v0",
    "T",     "dim", "d",    "a_diag", "b",    "sigma", "K"};

ModelInfo model_from_config(const Config& cfg) {
  const std::string name = cfg.get_string("model", "name", "heston");
  ModelInfo mi;
  if (name == "heston") {
    const HestonParams p = heston_params(cfg);
    mi.model = heston_model(p);
    mi.dim = 2;
    mi.d = 2;
    mi.x0 = {p.x0, p.v0};
    mi.T = p.T;
  } else if (name == "ou") {
    mi.model = ou_model();
    mi.dim = 1;
    mi.d = 1;
    mi.x0 = {cfg.get_double("model", "x0", 0.0)};
    mi.T = cfg.get_double("model", "T", 1.0);
  } else if (name == "zero") {
    mi.dim = static_cast<int>(cfg.get_int("model", "dim", 2));
    mi.d = static_cast<int>(cfg.get_int("model", "d", 2));
    if (mi.dim < 1 || mi.d < 1)
      throw ConfigError("[model] zero: dim and d must be >= 1");
    mi.model = linear_test_model(std::vector<double>(mi.dim, 0.0),
                                 std::vector<double>(mi.dim, 0.0),
                                 std::vector<std::vector<double>>(
                                     mi.d, std::vector<double>(mi.dim, 0.0)));
    mi.x0.assign(mi.dim, 0.0);
    mi.T = cfg.get_double("model", "T", 1.0);
  } else if (name == "linear") {
    const auto a = cfg.get_double_list("model", "a_diag");
    const auto b = cfg.get_double_list("model", "b");
    const auto sigma = cfg.get_matrix("model", "sigma");
    if (b.size() != a.size())
      throw ConfigError("[model] linear: a_diag and b must have equal length");
    for (const auto& row : sigma)
      if (row.size() != a.size())
        throw ConfigError("[model] linear: each sigma row needs one entry per state");
    mi.dim = static_cast<int>(a.size());
    mi.d = static_cast<int>(sigma.size());
    mi.model = linear_test_model(a, b, sigma);
    mi.x0.assign(mi.dim, 0.0);
    mi.T = cfg.get_double("model", "T", 1.0);
  } else if (name == "spde") {
    SpdeParams p;
    p.K = static_cast<int>(cfg.get_int("model", "K", 8));
    p.d = static_cast<int>(cfg.get_int("model", "d", 2));
    if (cfg.has("model", "sigma")) p.sigma = cfg.get_double_list("model", "sigma");
    p.T = cfg.get_double("model", "T", 1.0);
    if (static_cast<int>(p.sigma.size()) != p.d)
      throw ConfigError("[model] spde: sigma needs one entry per noise direction");
    mi.model = spde_spectral_model(p);
    mi.dim = p.K;
    mi.d = p.d;
    mi.T = p.T;
    if (cfg.has("model", "x0")) {
      mi.x0 = cfg.get_double_list("model", "x0");
      if (static_cast<int>(mi.x0.size()) != p.K)
        throw ConfigError("[model] spde: x0 needs K entries");
    } else {
      mi.x0.resize(p.K);
      for (int k = 0; k < p.K; ++k) mi.x0[k] = 0.5 / (1.0 + k);
    }
  } else {
    throw ConfigError("[model] unknown name '" + name +
                      "' (expected heston, ou, zero, linear, spde)");
  }
  return mi;
}

// [payoff]: monomial (exponents, coef), call (strike, on exp(x_0)), or a
// constant.  Missing trailing exponents are zero.
ScalarField payoff_from_config(const Config& cfg, int dim) {
  const int kind =
      cfg.get_enum("payoff", "kind", {"monomial", "call", "constant"}, "monomial");
  if (kind == 0) {
    std::vector<int> exps{2};
    if (cfg.has("payoff", "exponents")) exps = cfg.get_int_list("payoff", "exponents");
    const double coef = cfg.get_double("payoff", "coef", 1.0);
    if (static_cast<int>(exps.size()) > dim)
      throw ConfigError("[payoff] more exponents than state dimensions");
    for (const int e : exps)
      if (e < 0) throw ConfigError("[payoff] exponents must be >= 0");
    exps.resize(dim, 0);
    return ScalarField::from_poly(Poly::monomial(exps, coef));
  }
  if (kind == 1) {
    const double strike = cfg.get_double("payoff", "strike");
    if (!(strike > 0)) throw ConfigError("[payoff] strike must be positive");
    return ScalarField::from_fn([strike](ConstVec x) {
      return std::max(std::exp(x[0]) - strike, 0.0);
    });
  }
  const double value = cfg.get_double("payoff", "value", 1.0);
  return ScalarField::from_fn([value](ConstVec) { return value; });
}

const std::set<std::string> kPayoffKeys{"kind", "exponents", "coef", "strike",
                                        "value"};

const char* strategy_name(Strategy s) {
  return s == Strategy::FullTree ? "full_tree" : "monte_carlo";
}

}  // namespace

int cmd_verify_formula(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"formula", {"file", "degree", "dimension"}},
      {"verify", {"order", "defect_tol", "symmetry_tol", "symmetry_grid"}},
  });
  const auto formula = formula_from_config(cfg, 0);
  const int order =
      static_cast<int>(cfg.get_int("verify", "order", formula.order));
  if (order < 0) throw ConfigError("[verify] order must be >= 0");
  const double defect_tol = cfg.get_double("verify", "defect_tol", 1e-10);
  const double symmetry_tol = cfg.get_double("verify", "symmetry_tol", 1e-12);
  const int grid = static_cast<int>(cfg.get_int("verify", "symmetry_grid", 64));

  const auto rep = verify_order(formula, order);
  const double sym = check_weak_symmetry(formula, grid);
  const bool pass = rep.max_defect <= defect_tol && sym <= symmetry_tol;

  std::ostringstream os;
  os << "formula: dimension " << formula.d << ", " << formula.size()
     << " paths, order " << formula.order << "\n";
  os << "moment conditions to degree " << order << ": " << rep.rows.size()
     << " words, max defect " << fmt("%.6g", rep.max_defect) << " at "
     << word_str(rep.worst) << " (tolerance " << fmt("%g", defect_tol) << ")\n";
  os << "weak symmetry residual: " << fmt("%.6g", sym) << " (tolerance "
     << fmt("%g", symmetry_tol) << ")\n";
  os << "verdict: " << (pass ? "PASS" : "FAIL") << "\n\n";
  os << "word            value        expected      defect\n";
  for (const auto& row : rep.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-12s %13.10f %13.10f %12.4e\n",
                  word_str(row.alpha).c_str(), row.value, row.expected,
                  row.defect);
    os << line;
  }
  const auto path = out_file(opt, "formula_report.txt");
  write_text(path, os.str());
  std::printf("%s  max defect %s, symmetry %s  -> %s\n",
              pass ? "PASS" : "FAIL", fmt("%.3g", rep.max_defect).c_str(),
              fmt("%.3g", sym).c_str(), path.string().c_str());
  return pass ? 0 : 1;
}

int cmd_heston(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"model", kModelKeys},
      {"formula", {"degree", "dimension"}},
      {"mesh", {"kind", "gamma", "n_list"}},
      {"eval", kEvalKeys},
      {"check",
       {"mode", "moments", "slope_min", "skip_first", "rel_tol", "se_mult"}},
  });
  if (cfg.get_string("model", "name", "heston") != "heston")
    throw ConfigError("heston command requires [model] name = heston");
  const HestonParams p = heston_params(cfg);
  const auto m = heston_model(p);
  const auto formula = formula_from_config(cfg, 2);
  const auto plan = plan_from_config(cfg, opt);

  const MeshKind kind =
      cfg.get_enum("mesh", "kind", {"uniform", "graded"}, "uniform") == 0
          ? MeshKind::Uniform
          : MeshKind::Graded;
  const double gamma = cfg.get_double("mesh", "gamma", 1.0);
  if (kind == MeshKind::Graded && !(gamma > 1.0))
    throw ConfigError("[mesh] graded meshes need gamma > 1");
  const auto n_list = cfg.get_int_list("mesh", "n_list");

  const int mode = cfg.get_enum("check", "mode",
                                {"slopes", "relative_error", "none"}, "slopes");
  const double slope_min = cfg.get_double("check", "slope_min", 1.7);
  const int skip_first = static_cast<int>(cfg.get_int("check", "skip_first", 1));
  const double rel_tol = cfg.get_double("check", "rel_tol", 1e-2);
  const double se_mult = cfg.get_double("check", "se_mult", 3.0);
  if (skip_first < 0) throw ConfigError("[check] skip_first must be >= 0");
  if (mode == 0 &&
      static_cast<int>(n_list.size()) - skip_first < 2)
    throw ConfigError("[check] mode = slopes needs at least skip_first + 2 mesh sizes");

  const char* names[4] = {"mean", "variance", "skewness", "kurtosis"};
  // [check] moments narrows the verdict to a subset (all four by default);
  // CSVs and the report always carry everything.
  std::array<bool, 4> want{true, true, true, true};
  if (cfg.has("check", "moments")) {
    want = {false, false, false, false};
    std::istringstream mss(cfg.get_string("check", "moments"));
    std::string tok;
    while (mss >> tok) {
      bool known = false;
      for (int i = 0; i < 4; ++i)
        if (tok == names[i]) want[i] = known = true;
      if (!known)
        throw ConfigError("[check] moments: unknown moment '" + tok + "'");
    }
  }

  const auto oracle = heston_exact_moments(p, p.T);
  const CentralMoments ref{oracle.mean, oracle.variance, oracle.skewness,
                           oracle.kurtosis};
  const auto xvar = Poly::var(2, 0);
  const std::vector<ScalarField> payoffs{
      ScalarField::from_poly(xvar), ScalarField::from_poly(xvar * xvar),
      ScalarField::from_poly(xvar * xvar * xvar),
      ScalarField::from_poly(xvar * xvar * xvar * xvar)};
  const double x[] = {p.x0, p.v0};

  std::array<std::vector<ConvergenceRow>, 4> rows;
  std::array<std::vector<double>, 4> ses;
  for (const int n : n_list) {
    if (n < 1) throw ConfigError("[mesh] n_list entries must be >= 1");
    const Mesh mesh = kind == MeshKind::Uniform ? uniform_mesh(p.T, n)
                                                : graded_mesh(p.T, n, gamma);
    EvalResult stats;
    std::vector<double> errs, cov;
    const auto vals =
        compose_multi(m, formula, payoffs, x, mesh, plan, &stats, &errs, &cov);
    const std::array<double, 4> raw{vals[0], vals[1], vals[2], vals[3]};
    const auto c = central_from_raw(raw);
    std::array<double, 4> se{};
    if (plan.strategy == Strategy::MonteCarlo)
      se = central_std_errors(raw, cov.data());
    for (int i = 0; i < 4; ++i) {
      ConvergenceRow row;
      row.n = n;
      row.kind = kind;
      row.strategy = plan.strategy;
      row.value = c[i];
      row.reference = ref[i];
      row.abs_error = std::fabs(c[i] - ref[i]);
      row.rel_error = row.abs_error / std::fabs(ref[i]);
      row.std_error = se[i];
      row.seconds = stats.seconds;
      row.leaves = stats.leaves;
      rows[i].push_back(row);
      ses[i].push_back(se[i]);
    }
  }

  std::ostringstream rep;
  rep << "moment oracle at T = " << fmt("%.12g", p.T) << ": mean "
      << fmt("%.12g", ref.mean) << ", variance " << fmt("%.12g", ref.variance)
      << ", skewness " << fmt("%.12g", ref.skewness) << ", kurtosis "
      << fmt("%.12g", ref.kurtosis) << "\n";
  rep << "strategy " << strategy_name(plan.strategy) << ", "
      << (kind == MeshKind::Uniform ? "uniform" : "graded") << " mesh\n\n";

  bool pass = true;
  std::string summary;
  for (int i = 0; i < 4; ++i) {
    rep << names[i] << "\n  n    value            abs_error    rel_error    std_error\n";
    for (const auto& row : rows[i]) {
      char line[160];
      std::snprintf(line, sizeof line, "%3d    %-15.10g  %-11.4e  %-11.4e  %-11.4e\n",
                    row.n, row.value, row.abs_error, row.rel_error, row.std_error);
      rep << line;
    }
    if (!want[i] && mode != 2) {
      rep << "  not part of the verdict\n";
    } else if (mode == 0) {
      std::vector<double> scales, errors;
      double se_max = 0;
      for (std::size_t j = skip_first; j < rows[i].size(); ++j) {
        scales.push_back(1.0 / rows[i][j].n);
        errors.push_back(rows[i][j].abs_error);
        se_max = std::max(se_max, ses[i][j]);
      }
      const auto fitres =
          fit_slope(scales, errors, std::max(1e-11, 10.0 * se_max));
      const bool ok = fitres.defined && fitres.slope >= slope_min;
      pass = pass && ok;
      rep << "  slope " << fmt("%.4g", fitres.slope) << " over " <<
          fitres.points_used << " points (need >= " << fmt("%g", slope_min)
          << (skip_first ? ", first " + std::to_string(skip_first) +
                               " mesh size(s) excluded as transient"
                         : std::string())
          << "): " << (ok ? "ok" : "FAIL") << "\n";
      summary += std::string(summary.empty() ? "" : ", ") + names[i] + " " +
                 fmt("%.3g", fitres.slope);
    } else if (mode == 1) {
      bool ok = true;
      double worst = 0;
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        const double allow =
            rel_tol + se_mult * ses[i][j] / std::fabs(ref[i]);
        worst = std::max(worst, rows[i][j].rel_error / allow);
        ok = ok && rows[i][j].rel_error <= allow;
      }
      pass = pass && ok;
      rep << "  worst relative error at " << fmt("%.3g", worst)
          << "x allowance: " << (ok ? "ok" : "FAIL") << "\n";
      summary += std::string(summary.empty() ? "" : ", ") + names[i] + " " +
                 fmt("%.3g", worst) + "x";
    }
    rep << "\n";
  }
  if (mode == 2) summary = "no check requested";
  rep << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";

  const char* files[4] = {"heston_mean.csv", "heston_variance.csv",
                          "heston_skewness.csv", "heston_kurtosis.csv"};
  for (int i = 0; i < 4; ++i) {
    std::ofstream os(out_file(opt, files[i]));
    write_convergence_csv(os, rows[i]);
  }
  write_text(out_file(opt, "heston_report.txt"), rep.str());
  std::printf("%s  %s  -> %s\n", pass ? "PASS" : "FAIL", summary.c_str(),
              out_file(opt, "heston_report.txt").string().c_str());
  return pass ? 0 : 1;
}

int cmd_stability(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"model", kModelKeys},
      {"formula", {"degree", "dimension"}},
      {"weight", {"kind", "s", "alpha"}},
      {"grid", {"min", "max", "count"}},
      {"stability", {"dt_list"}},
      {"eval", kEvalKeys},
  });
  const auto mi = model_from_config(cfg);
  const auto formula = formula_from_config(cfg, mi.d);
  const auto plan = plan_from_config(cfg, opt);

  const WeightFunction psi =
      cfg.get_enum("weight", "kind", {"polynomial", "cosh"}, "polynomial") == 0
          ? WeightFunction::polynomial(cfg.get_double("weight", "s", 8.0))
          : WeightFunction::cosh_type(cfg.get_double("weight", "alpha", 1.0));

  const auto mins = cfg.get_double_list("grid", "min");
  const auto maxs = cfg.get_double_list("grid", "max");
  const auto counts = cfg.get_int_list("grid", "count");
  if (static_cast<int>(mins.size()) != mi.dim ||
      static_cast<int>(maxs.size()) != mi.dim ||
      static_cast<int>(counts.size()) != mi.dim)
    throw ConfigError("[grid] min, max, count each need one entry per state dimension");
  long long total = 1;
  for (int k = 0; k < mi.dim; ++k) {
    if (counts[k] < 1) throw ConfigError("[grid] count entries must be >= 1");
    if (mins[k] > maxs[k]) throw ConfigError("[grid] min > max");
    total *= counts[k];
    if (total > 100000) throw ConfigError("[grid] more than 1e5 grid points");
  }
  std::vector<std::vector<double>> x_grid;
  std::vector<int> idx(mi.dim, 0);
  for (;;) {
    std::vector<double> x(mi.dim);
    for (int k = 0; k < mi.dim; ++k)
      x[k] = counts[k] == 1 ? mins[k]
                            : mins[k] + (maxs[k] - mins[k]) * idx[k] /
                                            double(counts[k] - 1);
    x_grid.push_back(std::move(x));
    int k = mi.dim - 1;
    while (k >= 0 && ++idx[k] == counts[k]) idx[k--] = 0;
    if (k < 0) break;
  }

  const auto dt_list = cfg.get_double_list("stability", "dt_list");
  for (const double dt : dt_list)
    if (!(dt > 0)) throw ConfigError("[stability] dt_list entries must be positive");

  const auto rep = stability_probe(mi.model, formula, psi, x_grid, dt_list,
                                   plan.flow);

  std::ostringstream os;
  os << "weight: "
     << (psi.kind() == WeightKind::Polynomial ? "polynomial s = " : "cosh alpha = ")
     << fmt("%g", psi.param()) << "\n";
  os << x_grid.size() << " grid points, " << dt_list.size() << " step sizes\n";
  os << "growth constant estimate: " << fmt("%.6g", rep.c_tilde) << "\n\n";
  os << "dt           max ratio\n";
  for (std::size_t i = 0; i < rep.dts.size(); ++i)
    os << fmt("%-12.6g", rep.dts[i]) << " " << fmt("%.6g", rep.per_dt_max[i])
       << "\n";
  os << "\nverdict: " << (rep.bounded ? "PASS" : "FAIL")
     << " (finite ratios with a step-independent bound)\n";

  {
    std::ofstream csv(out_file(opt, "stability.csv"));
    write_stability_csv(csv, x_grid, rep);
  }
  write_text(out_file(opt, "stability_report.txt"), os.str());
  std::printf("%s  growth constant %s  -> %s\n",
              rep.bounded ? "PASS" : "FAIL", fmt("%.4g", rep.c_tilde).c_str(),
              out_file(opt, "stability_report.txt").string().c_str());
  return rep.bounded ? 0 : 1;
}

int cmd_local_order(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"model", kModelKeys},
      {"formula", {"degree", "dimension"}},
      {"payoff", kPayoffKeys},
      {"local", {"x", "k", "dt_list", "slope_min"}},
      {"eval", kEvalKeys},
  });
  auto mi = model_from_config(cfg);
  const auto formula = formula_from_config(cfg, mi.d);
  const auto plan = plan_from_config(cfg, opt);
  const auto f = payoff_from_config(cfg, mi.dim);

  std::vector<double> x = mi.x0;
  if (cfg.has("local", "x")) x = cfg.get_double_list("local", "x");
  if (static_cast<int>(x.size()) != mi.dim)
    throw ConfigError("[local] x needs one entry per state dimension");
  const int k = static_cast<int>(cfg.get_int("local", "k", 2));
  if (k < 0) throw ConfigError("[local] k must be >= 0");
  const auto dt_list = cfg.get_double_list("local", "dt_list");
  const double slope_min = cfg.get_double("local", "slope_min", k + 0.7);

  const auto rep = local_order_probe(mi.model, formula, f, x, dt_list, k,
                                     plan.flow);
  const bool pass =
      rep.expansion_exact || (rep.slope_defined && rep.slope >= slope_min);

  std::ostringstream os;
  os << "expansion terms: " << k << " (defect target order " << k + 1 << ")\n\n";
  os << "dt           defect\n";
  std::ostringstream csv;
  csv << "dt,defect\n";
  for (std::size_t i = 0; i < rep.dts.size(); ++i) {
    os << fmt("%-12.6g", rep.dts[i]) << " " << fmt("%.6g", rep.defects[i]) << "\n";
    csv << fmt("%.17g", rep.dts[i]) << "," << fmt("%.17g", rep.defects[i]) << "\n";
  }
  os << "\n";
  if (rep.expansion_exact)
    os << "all defects at the noise floor: the expansion is exact here\n";
  else
    os << "slope " << fmt("%.4g", rep.slope) << " over " << rep.points_used
       << " points (need >= " << fmt("%g", slope_min) << ")\n";
  os << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";

  write_text(out_file(opt, "local_order.csv"), csv.str());
  write_text(out_file(opt, "local_order_report.txt"), os.str());
  std::printf("%s  %s  -> %s\n", pass ? "PASS" : "FAIL",
              rep.expansion_exact
                  ? "defects at noise floor"
                  : ("slope " + fmt("%.4g", rep.slope)).c_str(),
              out_file(opt, "local_order_report.txt").string().c_str());
  return pass ? 0 : 1;
}

int cmd_graded(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"model", kModelKeys},
      {"formula", {"degree", "dimension"}},
      {"payoff", kPayoffKeys},
      {"mesh", {"n_list", "gamma"}},
      {"reference", {"n", "samples", "seed"}},
      {"eval", kEvalKeys},
      {"check", {"mode", "n_min", "se_mult"}},
  });
  const auto mi = model_from_config(cfg);
  const auto formula = formula_from_config(cfg, mi.d);
  const auto plan = plan_from_config(cfg, opt);
  const auto f = payoff_from_config(cfg, mi.dim);

  const auto n_list = cfg.get_int_list("mesh", "n_list");
  const double gamma = cfg.get_double("mesh", "gamma");
  if (!(gamma > 1.0)) throw ConfigError("[mesh] gamma must be > 1");

  const int ref_n = static_cast<int>(cfg.get_int("reference", "n"));
  if (ref_n < 1) throw ConfigError("[reference] n must be >= 1");
  EvalPlan ref_plan = plan;
  ref_plan.samples = cfg.get_int("reference", "samples", plan.samples * 4);
  ref_plan.seed = cfg.get_u64("reference", "seed", plan.seed + 1);

  EvalResult ref_stats;
  const double ref = compose(mi.model, formula, f, mi.x0,
                             graded_mesh(mi.T, ref_n, gamma), ref_plan,
                             &ref_stats);
  const std::string provenance =
      std::string("graded_n") + std::to_string(ref_n) + "_" +
      strategy_name(ref_plan.strategy);

  const auto study = graded_mesh_study(mi.model, formula, f, mi.x0, mi.T,
                                       n_list, gamma, plan, ref, provenance);

  const int mode = cfg.get_enum("check", "mode", {"paired", "none"}, "paired");
  const int n_min = static_cast<int>(cfg.get_int("check", "n_min", 4));
  const double se_mult = cfg.get_double("check", "se_mult", 4.0);

  std::ostringstream os;
  os << "reference: " << fmt("%.12g", ref) << " (" << provenance
     << ", std error " << fmt("%.3g", ref_stats.std_error) << ")\n";
  os << "gamma = " << fmt("%g", study.gamma) << "\n\n";
  os << "  n    uniform_err  graded_err   allowance    paired check\n";
  bool pass = true;
  for (std::size_t i = 0; i < study.uniform.rows.size(); ++i) {
    const auto& u = study.uniform.rows[i];
    const auto& g = study.graded.rows[i];
    const double noise = se_mult * std::sqrt(u.std_error * u.std_error +
                                             g.std_error * g.std_error +
                                             4 * ref_stats.std_error *
                                                 ref_stats.std_error);
    const bool checked = mode == 0 && u.n >= n_min;
    const bool ok = !checked || g.abs_error <= u.abs_error + noise;
    pass = pass && ok;
    char line[160];
    std::snprintf(line, sizeof line, "%3d    %-11.4e  %-11.4e  %-11.4e  %s\n",
                  u.n, u.abs_error, g.abs_error, noise,
                  checked ? (ok ? "ok" : "FAIL") : "-");
    os << line;
  }
  os << "\nverdict: " << (pass ? "PASS" : "FAIL") << "\n";

  std::vector<ConvergenceRow> all = study.uniform.rows;
  all.insert(all.end(), study.graded.rows.begin(), study.graded.rows.end());
  {
    std::ofstream csv(out_file(opt, "graded.csv"));
    write_convergence_csv(csv, all);
  }
  write_text(out_file(opt, "graded_report.txt"), os.str());
  std::printf("%s  gamma %s over %zu mesh sizes  -> %s\n",
              pass ? "PASS" : "FAIL", fmt("%g", study.gamma).c_str(),
              study.uniform.rows.size(),
              out_file(opt, "graded_report.txt").string().c_str());
  return pass ? 0 : 1;
}

int cmd_spde(const Config& cfg, const CommonOptions& opt) {
  cfg.restrict_to({
      {"model", kModelKeys},
      {"formula", {"degree", "dimension"}},
      {"payoff", kPayoffKeys},
      {"mesh", {"n_list"}},
      {"reference", {"n"}},
      {"eval", kEvalKeys},
      {"check", {"mode", "slope_min", "skip_first"}},
  });
  const auto mi = model_from_config(cfg);
  if (cfg.get_string("model", "name", "heston") != "spde")
    throw ConfigError("spde command requires [model] name = spde");
  const auto formula = formula_from_config(cfg, mi.d);
  const auto plan = plan_from_config(cfg, opt);
  const auto f = payoff_from_config(cfg, mi.dim);

  const auto n_list = cfg.get_int_list("mesh", "n_list");
  const int ref_n = static_cast<int>(cfg.get_int("reference", "n"));
  for (const int n : n_list)
    if (n >= ref_n)
      throw ConfigError("[reference] n must exceed every entry of n_list");

  EvalResult ref_stats;
  const double ref = compose(mi.model, formula, f, mi.x0,
                             uniform_mesh(mi.T, ref_n), plan, &ref_stats);
  const std::string provenance = std::string(strategy_name(plan.strategy)) +
                                 "_n" + std::to_string(ref_n);

  const auto study = convergence_study(mi.model, formula, f, mi.x0, mi.T,
                                       n_list, plan, ref, provenance);

  const int mode = cfg.get_enum("check", "mode", {"slopes", "none"}, "slopes");
  const double slope_min = cfg.get_double("check", "slope_min", 1.7);
  const int skip_first = static_cast<int>(cfg.get_int("check", "skip_first", 0));
  if (skip_first < 0 || skip_first + 2 > static_cast<int>(study.rows.size()))
    throw ConfigError("[check] skip_first leaves fewer than 2 points");

  SlopeFit fitres = study.order;
  if (skip_first > 0) {
    std::vector<double> scales, errors;
    for (std::size_t j = skip_first; j < study.rows.size(); ++j) {
      scales.push_back(1.0 / study.rows[j].n);
      errors.push_back(study.rows[j].abs_error);
    }
    fitres = fit_slope(scales, errors, 1e-11);
  }
  const bool pass =
      mode == 1 || (fitres.defined && fitres.slope >= slope_min);

  std::ostringstream os;
  os << "modes: " << mi.dim << ", noise directions: " << mi.d << "\n";
  os << "reference: " << fmt("%.12g", ref) << " (" << provenance << ")\n\n";
  os << "  n    value            abs_error\n";
  for (const auto& row : study.rows) {
    char line[120];
    std::snprintf(line, sizeof line, "%3d    %-15.10g  %-11.4e\n", row.n,
                  row.value, row.abs_error);
    os << line;
  }
  os << "\nslope " << fmt("%.4g", fitres.slope) << " over " << fitres.points_used
     << " points";
  if (mode == 0) os << " (need >= " << fmt("%g", slope_min) << ")";
  os << "\nverdict: " << (pass ? "PASS" : "FAIL") << "\n";

  {
    std::ofstream csv(out_file(opt, "spde.csv"));
    write_convergence_csv(csv, study.rows);
  }
  write_text(out_file(opt, "spde_report.txt"), os.str());
  std::printf("%s  slope %s with %d modes  -> %s\n", pass ? "PASS" : "FAIL",
              fmt("%.4g", fitres.slope).c_str(), mi.dim,
              out_file(opt, "spde_report.txt").string().c_str());
  return pass ? 0 : 1;
}

}  // namespace cubsde::cli
