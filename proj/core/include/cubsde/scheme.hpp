#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cubsde/cubature.hpp"
#include "cubsde/flow.hpp"
#include "cubsde/vectorfields.hpp"
#include "cubsde/weights.hpp"

namespace cubsde {

enum class MeshKind { Uniform, Graded };

/// Partition 0 = t_0 < ... < t_n = T.
struct Mesh {
  std::vector<double> times;
  MeshKind kind = MeshKind::Uniform;
  double gamma = 1.0;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double horizon() const { return times.back(); }
  double dt(int i) const { return times[i + 1] - times[i]; }
  void validate() const;
};

Mesh uniform_mesh(double T, int n);

/// t_i = T (1 - (1 - i/n)^gamma), gamma > 1: step sizes shrink toward T.
Mesh graded_mesh(double T, int n, double gamma);

enum class Strategy { FullTree, MonteCarlo };

struct EvalPlan {
  Strategy strategy = Strategy::FullTree;
  std::uint64_t budget = 100000000;  // FullTree leaf cap
  std::int64_t samples = 1000000;    // MonteCarlo sample count
  std::uint64_t seed = 0;
  int threads = 1;
  FlowConfig flow;
};

struct EvalResult {
  double value = 0;
  double std_error = 0;      // MonteCarlo only, 0 for FullTree
  std::uint64_t leaves = 0;  // leaves enumerated or samples drawn
  double seconds = 0;
};

/// Endpoints of one cubature step of size dt from x: entry i of `points` is
/// the dim-vector reached along formula path i scaled to [0, dt].
void one_step_points(const Model& m, const CubatureFormula& formula, ConstVec x,
                     double dt, const FlowConfig& cfg,
                     std::vector<std::vector<double>>& points);

/// One-step operator Q_dt f(x) = sum_i lambda_i f(endpoint_i).
double one_step(const Model& m, const CubatureFormula& formula,
                const ScalarField& f, ConstVec x, double dt,
                const FlowConfig& cfg);

/// Composition Q_{dt_1} ... Q_{dt_n} f(x) over the mesh.  FullTree walks the
/// whole size^n tree exactly (refusing with a plan error when that exceeds
/// plan.budget); MonteCarlo draws plan.samples root-to-leaf paths, each step
/// picking path i with probability lambda_i.  Both are deterministic given
/// the plan, independent of plan.threads.
double compose(const Model& m, const CubatureFormula& formula,
               const ScalarField& f, ConstVec x, const Mesh& mesh,
               const EvalPlan& plan, EvalResult* stats = nullptr);

/// Same traversal shared by several payoffs: one flow evaluation per tree
/// edge, all payoffs read at each leaf.  With MonteCarlo, `errs` (when given)
/// receives one standard error per payoff and `cov` the full covariance
/// matrix (row-major p x p) of the returned estimates; both are zero for
/// FullTree.
std::vector<double> compose_multi(const Model& m, const CubatureFormula& formula,
                                  const std::vector<ScalarField>& fs, ConstVec x,
                                  const Mesh& mesh, const EvalPlan& plan,
                                  EvalResult* stats = nullptr,
                                  std::vector<double>* errs = nullptr,
                                  std::vector<double>* cov = nullptr);

/// Least-squares slope of log(error) against log(scale).  Points with
/// error <= floor_value are dropped as noise; `defined` is false when fewer
/// than two points survive.
struct SlopeFit {
  double slope = 0;
  int points_used = 0;
  bool defined = false;
};

SlopeFit fit_slope(const std::vector<double>& scales,
                   const std::vector<double>& errors, double floor_value);

struct StabilityReport {
  double c_tilde = 0;             // max of ratio over the whole grid
  std::vector<double> dts;
  std::vector<double> per_dt_max; // max over x for each dt
  /// ratio[ix][it] = log(Q_dt psi(x) / psi(x)) / dt.
  std::vector<std::vector<double>> ratio;
  bool bounded = false;           // finite everywhere, per-dt max <= c_tilde + 0.1
};

/// Probes the one-step weight bound Q_dt psi <= e^{C dt} psi on a state grid.
/// Ratios are formed in the log domain, so exponentially growing weights do
/// not overflow.  Requires positive formula weights.
StabilityReport stability_probe(const Model& m, const CubatureFormula& formula,
                                const WeightFunction& psi,
                                const std::vector<std::vector<double>>& x_grid,
                                const std::vector<double>& dt_grid,
                                const FlowConfig& cfg = {});

struct LocalOrderReport {
  std::vector<double> dts;
  std::vector<double> defects;  // |Q_dt f(x) - sum_{j<=k} dt^j/j! G^j f(x)|
  double slope = 0;             // of log defect vs log dt; target k+1
  int points_used = 0;
  bool slope_defined = false;
  bool expansion_exact = false; // all defects at the noise floor
};

/// Measures the local Taylor defect of the one-step operator against the
/// k-term generator expansion; for a formula of order m >= 2k+1 the defect
/// decays like dt^{k+1}.
LocalOrderReport local_order_probe(const Model& m, const CubatureFormula& formula,
                                   const ScalarField& f, ConstVec x,
                                   const std::vector<double>& dt_list, int k,
                                   const FlowConfig& cfg = {});

struct ConvergenceRow {
  int n = 0;
  MeshKind kind = MeshKind::Uniform;
  Strategy strategy = Strategy::FullTree;
  double value = 0;
  double reference = 0;
  double abs_error = 0;
  double rel_error = 0;
  double std_error = 0;
  double seconds = 0;
  std::uint64_t leaves = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  SlopeFit order;                 // rate: error ~ n^{-order.slope}
  std::string reference_provenance;
};

/// Errors of the composed scheme against `reference` over n in n_list
/// (uniform meshes); the fitted order uses a noise floor of
/// max(1e-11, 10 x standard error) per point.
ConvergenceReport convergence_study(const Model& m, const CubatureFormula& formula,
                                    const ScalarField& f, ConstVec x, double T,
                                    const std::vector<int>& n_list,
                                    const EvalPlan& plan, double reference,
                                    std::string reference_provenance = "analytic");

struct GradedStudy {
  ConvergenceReport uniform;
  ConvergenceReport graded;
  double gamma = 0;
};

/// Runs the same study on uniform and graded meshes (same plan and seed, so
/// Monte Carlo draws are common random numbers across the pair).
GradedStudy graded_mesh_study(const Model& m, const CubatureFormula& formula,
                              const ScalarField& f, ConstVec x, double T,
                              const std::vector<int>& n_list, double gamma,
                              const EvalPlan& plan, double reference,
                              std::string reference_provenance = "analytic");

/// CSV with header "n,mesh_kind,strategy,value,reference,abs_error,
/// rel_error,seconds"; all reals carry round-trip precision.
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

/// CSV with header "x0,...,x{dim-1},dt,ratio", one row per grid pair.
void write_stability_csv(std::ostream& os,
                         const std::vector<std::vector<double>>& x_grid,
                         const StabilityReport& report);

}  // namespace cubsde
