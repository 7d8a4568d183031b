#pragma once

#include <array>

namespace cubsde {

/// Central statistics of a scalar law, derived from the raw moments E X^k,
/// k = 1..4.  Skewness and kurtosis need a positive variance.
struct CentralMoments {
  double mean = 0;
  double variance = 0;
  double skewness = 0;
  double kurtosis = 0;

  double operator[](int i) const {
    return i == 0 ? mean : i == 1 ? variance : i == 2 ? skewness : kurtosis;
  }
};

CentralMoments central_from_raw(const std::array<double, 4>& raw);

/// Delta-method standard errors of the four central statistics from the
/// covariance matrix (row-major 4 x 4) of the raw-moment estimates.
std::array<double, 4> central_std_errors(const std::array<double, 4>& raw,
                                         const double* cov);

}  // namespace cubsde
