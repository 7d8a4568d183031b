#include "cubsde/scheme.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "cubsde/models.hpp"
#include "doctest.h"

using namespace cubsde;

namespace {

CubatureFormula nv1() {
  return build_nv_formula(gauss_hermite_normal_1d(5), 1);
}

EvalPlan exact_plan() {
  EvalPlan plan;
  plan.flow.method = FlowMethod::ExactFlows;
  return plan;
}

}  // namespace

TEST_CASE("meshes") {
  const auto u = uniform_mesh(1.0, 4);
  REQUIRE(u.steps() == 4);
  CHECK(u.times[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(u.horizon() == 1.0);
  CHECK(u.kind == MeshKind::Uniform);

  const auto g = graded_mesh(1.0, 4, 4.0);
  REQUIRE(g.steps() == 4);
  CHECK(g.kind == MeshKind::Graded);
  CHECK(g.times[1] == doctest::Approx(0.68359375).epsilon(1e-14));
  CHECK(g.times[2] == doctest::Approx(0.9375).epsilon(1e-14));
  CHECK(g.times[3] == doctest::Approx(0.99609375).epsilon(1e-14));
  CHECK(g.times[4] == 1.0);

  CHECK_THROWS_AS(graded_mesh(1.0, 4, 1.0), ArgumentError);
  CHECK_THROWS_AS(uniform_mesh(0.0, 4), ArgumentError);
  Mesh bad;
  bad.times = {0.0, 0.5, 0.25, 1.0};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad.times = {0.1, 0.5};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("single step basics") {
  const auto m = ou_model();
  const auto nv = nv1();
  const double x[] = {1.3};
  FlowConfig cfg;
  cfg.method = FlowMethod::ExactFlows;

  // constant payoffs pass through: the weights sum to one
  const auto c = ScalarField::from_poly(Poly::constant(1, 3.7));
  CHECK(one_step(m, nv, c, x, 0.25, cfg) == doctest::Approx(3.7).epsilon(1e-14));

  // frozen dynamics return the payoff at the start point
  const auto still = linear_test_model({0.0}, {0.0}, {{0.0}});
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  CHECK(one_step(still, nv, sq, x, 0.25, cfg) == doctest::Approx(1.69).epsilon(1e-15));

  // pure transport dX = 2 dt
  const auto transport = linear_test_model({0.0}, {2.0}, {{0.0}});
  const auto id = ScalarField::from_poly(Poly::var(1, 0));
  CHECK(one_step(transport, nv, id, x, 0.5, cfg) == doctest::Approx(2.3).epsilon(1e-14));

  // endpoint list agrees with the weighted sum
  std::vector<std::vector<double>> pts;
  one_step_points(m, nv, x, 0.25, cfg, pts);
  REQUIRE(int(pts.size()) == nv.size());
  double acc = 0;
  for (int i = 0; i < nv.size(); ++i) {
    REQUIRE(pts[i].size() == 1);
    acc += nv.weights[i] * (pts[i][0] * pts[i][0]);
  }
  CHECK(acc == doctest::Approx(one_step(m, nv, sq, x, 0.25, cfg)).epsilon(1e-15));

  CHECK_THROWS_AS(one_step(m, nv, sq, x, 0.0, cfg), ArgumentError);
}

TEST_CASE("composition over a mesh") {
  const auto m = ou_model();
  const auto nv = nv1();
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  const double x[] = {0.8};
  const auto plan = exact_plan();

  // a single step and a one-step mesh agree
  const auto m1 = uniform_mesh(0.4, 1);
  CHECK(compose(m, nv, sq, x, m1, plan) ==
        doctest::Approx(one_step(m, nv, sq, x, 0.4, plan.flow)).epsilon(1e-15));

  // mass conservation over several steps
  const auto ones = ScalarField::from_poly(Poly::constant(1, 1.0));
  CHECK(compose(m, nv, ones, x, uniform_mesh(1.0, 5), plan) ==
        doctest::Approx(1.0).epsilon(1e-13));

  // composing two uneven steps nests the one-step operator
  Mesh two;
  two.times = {0.0, 0.3, 1.0};
  const auto inner = ScalarField::from_fn([&](ConstVec y) {
    return one_step(m, nv, sq, y, 0.7, plan.flow);
  });
  CHECK(compose(m, nv, sq, x, two, plan) ==
        doctest::Approx(one_step(m, nv, inner, x, 0.3, plan.flow)).epsilon(1e-13));

  // full tree refuses plans past the leaf budget and points at Monte Carlo
  EvalPlan small = plan;
  small.budget = 1000;
  bool threw = false;
  try {
    compose(m, nv, sq, x, uniform_mesh(1.0, 12), small);
  } catch (const PlanError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("MonteCarlo") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("monte carlo evaluation") {
  const auto m = ou_model();
  const auto nv = nv1();
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  const double x[] = {0.8};
  const auto mesh = uniform_mesh(1.0, 4);

  EvalPlan mc = exact_plan();
  mc.strategy = Strategy::MonteCarlo;
  mc.samples = 20000;
  mc.seed = 20240901;

  EvalResult ra, rb;
  const double a = compose(m, nv, sq, x, mesh, mc, &ra);
  const double b = compose(m, nv, sq, x, mesh, mc, &rb);
  CHECK(a == b);  // same plan, same value, bit for bit
  CHECK(ra.std_error == rb.std_error);
  CHECK(ra.leaves == 20000);
  CHECK(ra.std_error > 0);

  EvalPlan threads = mc;
  threads.threads = 3;
  CHECK(compose(m, nv, sq, x, mesh, threads) == a);

  EvalPlan reseeded = mc;
  reseeded.seed = 7;
  CHECK(compose(m, nv, sq, x, mesh, reseeded) != a);

  // estimate sits near the exact tree value
  EvalPlan full = exact_plan();
  EvalResult rf;
  const double tree = compose(m, nv, sq, x, mesh, full, &rf);
  CHECK(rf.std_error == 0.0);
  CHECK(rf.leaves == 6 * 6 * 6 * 6);
  CHECK(std::fabs(a - tree) < 4.0 * ra.std_error + 1e-12);

  CubatureFormula signed_f = nv;
  signed_f.weights[0] = -signed_f.weights[0];
  CHECK_THROWS_AS(compose(m, signed_f, sq, x, mesh, mc), ArgumentError);

  EvalPlan none = mc;
  none.samples = 0;
  CHECK_THROWS_AS(compose(m, nv, sq, x, mesh, none), ArgumentError);
}

TEST_CASE("shared traversal over several payoffs") {
  const auto m = ou_model();
  const auto nv = nv1();
  const double x[] = {0.8};
  const auto mesh = uniform_mesh(1.0, 3);
  const auto X = Poly::var(1, 0);
  const std::vector<ScalarField> fs{
      ScalarField::from_poly(X), ScalarField::from_poly(X * X),
      ScalarField::from_poly(X * X * X * X)};

  EvalPlan full = exact_plan();
  const auto vals = compose_multi(m, nv, fs, x, mesh, full);
  REQUIRE(vals.size() == 3);
  for (int k = 0; k < 3; ++k)
    CHECK(vals[k] == compose(m, nv, fs[k], x, mesh, full));

  EvalPlan mc = full;
  mc.strategy = Strategy::MonteCarlo;
  mc.samples = 15000;
  mc.seed = 99;
  std::vector<double> errs, cov;
  const auto mv = compose_multi(m, nv, fs, x, mesh, mc, nullptr, &errs, &cov);
  REQUIRE(errs.size() == 3);
  REQUIRE(cov.size() == 9);
  for (int k = 0; k < 3; ++k) {
    CHECK(mv[k] == compose(m, nv, fs[k], x, mesh, mc));
    CHECK(cov[k * 3 + k] == doctest::Approx(errs[k] * errs[k]).epsilon(1e-12));
  }
  CHECK(cov[1] == doctest::Approx(cov[3]).epsilon(1e-13));
  // odd/even payoffs of a near-symmetric law still correlate positively here
  CHECK(cov[5] > 0);
}

TEST_CASE("slope fitting") {
  const auto fit = fit_slope({1.0, 0.5, 0.25, 0.125},
                             {3.0, 0.75, 0.1875, 0.046875}, 0.0);
  REQUIRE(fit.defined);
  CHECK(fit.points_used == 4);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));

  const auto floored =
      fit_slope({1.0, 0.5, 0.25}, {1e-3, 1e-13, 1e-14}, 1e-11);
  CHECK_FALSE(floored.defined);
  CHECK(floored.points_used == 1);

  const auto none = fit_slope({1.0, 0.5}, {1e-14, 1e-15}, 1e-11);
  CHECK_FALSE(none.defined);
  CHECK(none.points_used == 0);

  CHECK_THROWS_AS(fit_slope({1.0}, {1.0, 2.0}, 0.0), ArgumentError);
}

TEST_CASE("weight growth probe") {
  const auto nv = nv1();
  const auto psi = WeightFunction::polynomial(2.0);
  FlowConfig cfg;
  cfg.method = FlowMethod::ExactFlows;
  const std::vector<std::vector<double>> grid{{0.5}, {1.5}, {4.0}};
  const std::vector<double> dts{0.25, 0.125};

  // frozen dynamics: Q_dt psi = psi exactly
  const auto still = linear_test_model({0.0}, {0.0}, {{0.0}});
  const auto rz = stability_probe(still, nv, psi, grid, dts, cfg);
  CHECK(rz.c_tilde == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(rz.bounded);
  REQUIRE(rz.ratio.size() == 3);
  REQUIRE(rz.ratio[0].size() == 2);

  // exponential growth dX = X dt pushes psi(e^dt x) / psi(x)
  const auto grow = linear_test_model({1.0}, {0.0}, {{0.0}});
  const auto rg = stability_probe(grow, nv, psi, grid, dts, cfg);
  CHECK(rg.c_tilde > 1.5);
  CHECK(rg.c_tilde < 2.2);
  CHECK(rg.bounded);
  const std::vector<double> moved{4.0 * std::exp(0.25)}, base{4.0};
  const double expect = (psi.log_value(moved) - psi.log_value(base)) / 0.25;
  CHECK(rg.ratio[2][0] == doctest::Approx(expect).epsilon(1e-9));

  CHECK_THROWS_AS(stability_probe(still, nv, psi, {}, dts, cfg), ArgumentError);
}

TEST_CASE("local expansion defect") {
  const auto m = ou_model();
  const auto nv = nv1();
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  const double x[] = {2.0};
  FlowConfig cfg;
  cfg.method = FlowMethod::ExactFlows;
  const std::vector<double> dts{0.125, 0.0625, 0.03125, 0.015625};

  // k = 0: defect carries the full generator term, decay dt^1
  const auto r0 = local_order_probe(m, nv, sq, x, dts, 0, cfg);
  REQUIRE(r0.slope_defined);
  CHECK_FALSE(r0.expansion_exact);
  CHECK(r0.slope > 0.85);
  CHECK(r0.slope < 1.25);

  // k = 2 with an order-5 formula: dt^3
  const auto quart = ScalarField::from_poly(
      Poly::var(1, 0) * Poly::var(1, 0) * Poly::var(1, 0) * Poly::var(1, 0));
  const auto r2 = local_order_probe(m, nv, quart, x, dts, 2, cfg);
  REQUIRE(r2.slope_defined);
  CHECK_FALSE(r2.expansion_exact);
  CHECK(r2.slope > 2.7);
  CHECK(r2.slope < 4.6);

  // frozen dynamics: every defect sits on the floor
  const auto still = linear_test_model({0.0}, {0.0}, {{0.0}});
  const auto rs = local_order_probe(still, nv, sq, x, dts, 2, cfg);
  CHECK(rs.expansion_exact);
  CHECK_FALSE(rs.slope_defined);

  // the formula order caps the usable expansion depth
  CHECK_THROWS_AS(local_order_probe(m, nv, sq, x, dts, 3, cfg), ArgumentError);
}

TEST_CASE("convergence against a closed form") {
  const auto m = ou_model();
  const auto nv = nv1();
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  const double x[] = {0.8};
  const double T = 1.0;
  const double ref = linear_model_expectation({-1}, {0}, {{1}},
                                              Poly::var(1, 0) * Poly::var(1, 0), x, T);
  const auto plan = exact_plan();

  const auto rep = convergence_study(m, nv, sq, x, T, {1, 2, 4, 8}, plan, ref);
  REQUIRE(rep.rows.size() == 4);
  REQUIRE(rep.order.defined);
  CHECK(rep.order.slope > 1.7);
  CHECK(rep.order.slope < 2.4);
  CHECK(rep.reference_provenance == "analytic");
  for (const auto& r : rep.rows) {
    CHECK(r.reference == ref);
    CHECK(r.abs_error == doctest::Approx(std::fabs(r.value - ref)).epsilon(1e-15));
    CHECK(r.rel_error == doctest::Approx(r.abs_error / std::fabs(ref)).epsilon(1e-13));
    CHECK(r.strategy == Strategy::FullTree);
    CHECK(r.kind == MeshKind::Uniform);
  }
  CHECK(rep.rows[3].abs_error < rep.rows[0].abs_error);

  CHECK_THROWS_AS(convergence_study(m, nv, sq, x, T, {1, 2}, plan, ref),
                  ArgumentError);

  // a scheme that is exact for the payoff leaves nothing to fit
  const auto transport = linear_test_model({0.0}, {2.0}, {{0.0}});
  const auto id = ScalarField::from_poly(Poly::var(1, 0));
  const auto flat =
      convergence_study(transport, nv, id, x, T, {1, 2, 4}, plan, x[0] + 2.0);
  CHECK_FALSE(flat.order.defined);
}

TEST_CASE("graded and uniform studies share everything but the mesh") {
  const auto m = ou_model();
  const auto nv = nv1();
  const auto sq = ScalarField::from_poly(Poly::var(1, 0) * Poly::var(1, 0));
  const double x[] = {0.8};
  const double ref = 0.5;  // placeholder reference, errors are not the point
  const auto st = graded_mesh_study(m, nv, sq, x, 1.0, {1, 2, 4}, 4.0,
                                    exact_plan(), ref);
  CHECK(st.gamma == 4.0);
  REQUIRE(st.uniform.rows.size() == 3);
  REQUIRE(st.graded.rows.size() == 3);
  // n = 1 collapses both meshes to the single interval
  CHECK(st.uniform.rows[0].value == st.graded.rows[0].value);
  CHECK(st.graded.rows[0].kind == MeshKind::Graded);
  CHECK(st.uniform.rows[1].value != st.graded.rows[1].value);
}

TEST_CASE("csv output") {
  ConvergenceRow r;
  r.n = 4;
  r.kind = MeshKind::Uniform;
  r.strategy = Strategy::FullTree;
  r.value = 0.5;
  r.reference = 0.25;
  r.abs_error = 0.25;
  r.rel_error = 1.0;
  r.std_error = 0.0;
  r.seconds = 0.0625;
  std::ostringstream os;
  write_convergence_csv(os, {r});
  const std::string text = os.str();
  CHECK(text ==
        "n,mesh_kind,strategy,value,reference,abs_error,rel_error,seconds\n"
        "4,uniform,full_tree,0.5,0.25,0.25,1,0.0625\n");

  // stability table: one row per (state, dt) pair
  const auto still = linear_test_model({0.0}, {0.0}, {{0.0}});
  const auto rep = stability_probe(still, nv1(), WeightFunction::polynomial(2.0),
                                   {{0.5}, {1.5}}, {0.25});
  std::ostringstream ss;
  write_stability_csv(ss, {{0.5}, {1.5}}, rep);
  std::istringstream in(ss.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x0,dt,ratio");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    // frozen dynamics: the log ratio is zero up to round-off in sum(weights)
    const double ratio = std::stod(line.substr(line.find_last_of(',') + 1));
    CHECK(std::fabs(ratio) < 1e-12);
  }
  CHECK(rows == 2);
}
