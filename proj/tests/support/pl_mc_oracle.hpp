#pragma once

#include <cstdint>
#include <vector>

namespace cubsde {

struct McIntegralEstimate {
  double mean = 0;
  double std_error = 0;
};

/// Monte Carlo estimates of the expected iterated Stratonovich integrals of
/// (t, B^1, ..., B^d) over [0,1], computed along the piecewise-linear
/// interpolation of Brownian motion on a uniform grid.  Returns one estimate
/// per word of enumerate_multiindices(d, max_degree), in that order.  The
/// interpolation bias is O(1/grid); callers budget for it on top of the
/// standard error.  Supports d <= 2.
std::vector<McIntegralEstimate> mc_iterated_integrals(int d, int max_degree,
                                                      long long samples, int grid,
                                                      std::uint64_t seed);

}  // namespace cubsde
