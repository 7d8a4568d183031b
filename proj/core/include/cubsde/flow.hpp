#pragma once

#include "cubsde/cubature.hpp"
#include "cubsde/vectorfields.hpp"

namespace cubsde {

enum class FlowMethod { ExactFlows, RungeKutta4, Adaptive };

struct FlowConfig {
  FlowMethod method = FlowMethod::RungeKutta4;
  int rk4_steps = 8;          // fixed steps per path segment
  double adaptive_tol = 1e-10;
};

/// Endpoint of the driven ODE dX_s = sum_{j=0}^d V_j(X_s) domega^j(s) along a
/// (scaled) path: on a segment with slope vector (a_0, ..., a_d) the
/// direction field is sum_j a_j V_j.  ExactFlows requires the model to carry
/// closed-form flows and the path to drive one component per segment.
void evolve(const Model& m, ConstVec x0, const CubaturePath& path,
            const FlowConfig& cfg, MutVec out);

/// Semigroup factors e^{tau A} / e^{-tau A} tabulated at every RK4 stage of a
/// given scaled path, where tau is the path's time component at the stage
/// (frozen on Brownian segments), so tree traversals pay no exp() per edge.
/// Valid only for the exact (path, rk4_steps) pair it was built from.
struct FrameCache {
  std::vector<double> stage_times;            // frame time tau per stage
  std::vector<std::vector<double>> exp_fwd;   // e^{mu_k tau} per stage
  std::vector<std::vector<double>> exp_bwd;   // e^{-mu_k tau} per stage
  std::vector<double> exp_final;              // e^{mu_k * duration}
  int steps = 0;
};

FrameCache build_frame_cache(const Model& m, const CubaturePath& path, int rk4_steps);

/// Mild-form endpoint for models with diagonal semigroup part: with tau(s)
/// the path's time component, integrate the moving-frame equation
/// dY_s = sum_j a_j e^{-tau(s)A} V_j(e^{tau(s)A} Y_s) ds with RK4 over the
/// path's segments, then return e^{TA} Y_T.  Coordinates outside every
/// field's support stay constant in the frame and only pick up the semigroup
/// factor.
void evolve_mild(const Model& m, ConstVec x0, const CubaturePath& path,
                 const FlowConfig& cfg, MutVec out,
                 const FrameCache* cache = nullptr);

}  // namespace cubsde
