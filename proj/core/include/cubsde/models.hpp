#pragma once

#include <array>

#include "cubsde/vectorfields.hpp"

namespace cubsde {

/// Log-price Heston dynamics (Ito form)
///   dX = (mu - V/2) dt + sqrt(V) dB^1
///   dV = kappa (theta - V) dt + beta sqrt(V) (rho dB^1 + sqrt(1-rho^2) dB^2)
/// with state (X, V); the stock price is exp(X) with drift rate mu.
struct HestonParams {
  double mu = 0.0;
  double kappa = 1.0;
  double theta = 0.04;
  double beta = 0.2;
  double rho = 0.0;
  double x0 = 0.0;
  double v0 = 0.04;
  double T = 0.25;
};

/// Stratonovich-form model with analytic Jacobians and closed-form segment
/// flows for all three fields.  The drift correction moves (beta rho / 4,
/// beta^2 / 4) out of the Ito drift.  Segment flows freeze at v = 0 (the
/// volatility fields vanish there) and clamp round-off negatives.
Model heston_model(const HestonParams& p);

struct HestonMoments {
  double mean = 0;
  double variance = 0;
  double skewness = 0;
  double kurtosis = 0;
  std::array<double, 4> raw{};  // E X, E X^2, E X^3, E X^4
};

/// Moments of X_t from the closed ODE system for mixed moments E[X^a V^b]
/// (drift and squared diffusion are affine in the state, and the -V/2 drag
/// maps (a,b) to (a-1,b+1), so each total-degree class a + b is closed).
/// Integrated with fixed-step RK4 well inside its stability region; accuracy
/// is limited by round-off, not the step.
HestonMoments heston_exact_moments(const HestonParams& p, double t);

/// dX = (diag(a) X + b) dt + sum_j sigma_j dB^j with constant sigma_j.
/// Constant diffusion means Ito and Stratonovich coincide.  Carries exact
/// flows and polynomial fields, so generator algebra is exact.
Model linear_test_model(std::vector<double> a_diag, std::vector<double> b,
                        std::vector<std::vector<double>> sigma);

/// 1D Ornstein-Uhlenbeck dX = -X dt + dB.
Model ou_model();

/// E f(X_T) for the linear model and polynomial f: X_T is Gaussian with
/// componentwise mean e^{a T} x + (e^{a T} - 1)/a b and covariance
/// int_0^T e^{s a_i} e^{s a_k} sum_j sigma_j,i sigma_j,k ds.
double linear_model_expectation(const std::vector<double>& a_diag,
                                const std::vector<double>& b,
                                const std::vector<std::vector<double>>& sigma,
                                const Poly& f, ConstVec x0, double T);

/// Spectral-truncation demo of a dissipative mild equation: K modes with
/// semigroup eigenvalues mu_k = -k^2, d saturating single-mode noise fields
/// V_j(x) = sigma_j tanh(<x, e_j>) e_j and zero drift field.
struct SpdeParams {
  int K = 8;
  int d = 2;
  std::vector<double> sigma{0.2, 0.15};
  double T = 1.0;
};

Model spde_spectral_model(const SpdeParams& p);

}  // namespace cubsde
