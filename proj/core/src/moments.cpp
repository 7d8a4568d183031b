#include "cubsde/moments.hpp"

#include <cmath>

namespace cubsde {

namespace {

// d(central_i)/d(raw_j), rows mean, variance, skewness, kurtosis
void central_gradients(const std::array<double, 4>& r, double g[4][4]) {
  const double m1 = r[0], m2 = r[1], m3 = r[2];
  const double var = m2 - m1 * m1;
  const double c3 = r[2] - 3 * m1 * m2 + 2 * m1 * m1 * m1;
  const double c4 = r[3] - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
  const double dvar[4] = {-2 * m1, 1, 0, 0};
  const double dc3[4] = {-3 * m2 + 6 * m1 * m1, -3 * m1, 1, 0};
  const double dc4[4] = {-4 * m3 + 12 * m1 * m2 - 12 * m1 * m1 * m1, 6 * m1 * m1,
                         -4 * m1, 1};
  const double v32 = std::pow(var, 1.5), v52 = std::pow(var, 2.5);
  for (int j = 0; j < 4; ++j) {
    g[0][j] = (j == 0) ? 1.0 : 0.0;
    g[1][j] = dvar[j];
    g[2][j] = dc3[j] / v32 - 1.5 * c3 / v52 * dvar[j];
    g[3][j] = dc4[j] / (var * var) - 2.0 * c4 / (var * var * var) * dvar[j];
  }
}

}  // namespace

CentralMoments central_from_raw(const std::array<double, 4>& raw) {
  CentralMoments c;
  const double m1 = raw[0], m2 = raw[1], m3 = raw[2], m4 = raw[3];
  c.mean = m1;
  c.variance = m2 - m1 * m1;
  const double c3 = m3 - 3 * m1 * m2 + 2 * m1 * m1 * m1;
  const double c4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
  c.skewness = c3 / std::pow(c.variance, 1.5);
  c.kurtosis = c4 / (c.variance * c.variance);
  return c;
}

std::array<double, 4> central_std_errors(const std::array<double, 4>& raw,
                                         const double* cov) {
  double g[4][4];
  central_gradients(raw, g);
  std::array<double, 4> se{};
  for (int i = 0; i < 4; ++i) {
    double q = 0;
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) q += g[i][j] * cov[j * 4 + k] * g[i][k];
    se[i] = std::sqrt(std::max(q, 0.0));
  }
  return se;
}

}  // namespace cubsde
