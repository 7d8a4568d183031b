#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubsde {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Thrown when a caller violates an interface contract (bad argument,
/// unsupported combination).  The CLI maps it to a config error.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an evaluation plan cannot be executed (e.g. a full-tree
/// traversal would exceed its leaf budget).
struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sq(double x) { return x * x; }

inline double norm2(ConstVec x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double dot(ConstVec a, ConstVec b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// splitmix64 step; the standard way to expand one seed into a stream of
/// decorrelated 64-bit values (used for block/worker seeding).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent sub-seed for block `index` of a run seeded by `seed`.
inline std::uint64_t block_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  return splitmix64(s);
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

/// log(sum_i exp(a_i)) without overflow; -inf for an empty span.
inline double logsumexp(ConstVec a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

/// Format a double with enough digits to round-trip exactly.
inline std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace cubsde
