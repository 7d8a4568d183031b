#include <benchmark/benchmark.h>

#include <cmath>

#include "cubsde/cubature.hpp"
#include "cubsde/models.hpp"
#include "cubsde/quadrature.hpp"
#include "cubsde/scheme.hpp"

namespace {

using namespace cubsde;

HestonParams bench_params() {
  HestonParams p;
  p.mu = 0.02;
  p.kappa = 5.0;
  p.theta = 0.09;
  p.beta = 0.6;
  p.rho = -0.8;
  p.x0 = std::log(9.0);
  p.v0 = 0.0625;
  p.T = 0.25;
  return p;
}

const CubatureFormula& nv2() {
  static const CubatureFormula f =
      build_nv_formula(tensor_product(gauss_hermite_normal_1d(5), 2), 2);
  return f;
}

void BM_PathIntegral(benchmark::State& state) {
  const auto& f = nv2();
  const MultiIndex word{{1, 1, 2, 2}};
  for (auto _ : state)
    benchmark::DoNotOptimize(path_iterated_integral(f.paths[0], word));
}
BENCHMARK(BM_PathIntegral);

void BM_VerifyOrder(benchmark::State& state) {
  const auto& f = nv2();
  for (auto _ : state) benchmark::DoNotOptimize(verify_order(f, 5).max_defect);
}
BENCHMARK(BM_VerifyOrder);

void BM_HestonOneStep(benchmark::State& state) {
  const auto p = bench_params();
  const auto m = heston_model(p);
  const auto f = ScalarField::from_poly(Poly::var(2, 0));
  const double x[] = {p.x0, p.v0};
  FlowConfig cfg;
  cfg.method = state.range(0) == 0 ? FlowMethod::ExactFlows : FlowMethod::RungeKutta4;
  for (auto _ : state)
    benchmark::DoNotOptimize(one_step(m, nv2(), f, x, 0.0625, cfg));
}
BENCHMARK(BM_HestonOneStep)->Arg(0)->Arg(1);

void BM_HestonFullTree(benchmark::State& state) {
  const auto p = bench_params();
  const auto m = heston_model(p);
  const auto f = ScalarField::from_poly(Poly::var(2, 0));
  const double x[] = {p.x0, p.v0};
  EvalPlan plan;
  plan.flow.method = FlowMethod::ExactFlows;
  const auto mesh = uniform_mesh(p.T, static_cast<int>(state.range(0)));
  std::uint64_t leaves = 0;
  for (auto _ : state) {
    EvalResult stats;
    benchmark::DoNotOptimize(compose(m, nv2(), f, x, mesh, plan, &stats));
    leaves = stats.leaves;
  }
  state.counters["leaves"] = static_cast<double>(leaves);
}
BENCHMARK(BM_HestonFullTree)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_HestonMonteCarlo(benchmark::State& state) {
  const auto p = bench_params();
  const auto m = heston_model(p);
  const auto f = ScalarField::from_poly(Poly::var(2, 0));
  const double x[] = {p.x0, p.v0};
  EvalPlan plan;
  plan.strategy = Strategy::MonteCarlo;
  plan.samples = state.range(0);
  plan.seed = 7;
  plan.flow.method = FlowMethod::ExactFlows;
  const auto mesh = uniform_mesh(p.T, 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(compose(m, nv2(), f, x, mesh, plan));
  state.SetItemsProcessed(state.iterations() * plan.samples * mesh.steps());
}
BENCHMARK(BM_HestonMonteCarlo)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_ExactMoments(benchmark::State& state) {
  const auto p = bench_params();
  for (auto _ : state)
    benchmark::DoNotOptimize(heston_exact_moments(p, p.T).kurtosis);
}
BENCHMARK(BM_ExactMoments);

}  // namespace

BENCHMARK_MAIN();
