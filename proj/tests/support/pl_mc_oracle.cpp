#include "support/pl_mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cubsde/cubature.hpp"
#include "cubsde/util.hpp"

namespace cubsde {

namespace {

// 16 samples march through the grid together; the per-node update and the
// Box-Muller transform below then vectorize over the lane index.
constexpr int kLanes = 16;

struct LaneRng {
  std::uint64_t s0[kLanes], s1[kLanes], s2[kLanes], s3[kLanes];

  void seed_block(std::uint64_t seed, std::uint64_t block) {
    for (int l = 0; l < kLanes; ++l) {
      std::uint64_t sm = block_seed(seed, block * kLanes + l);
      s0[l] = splitmix64(sm);
      s1[l] = splitmix64(sm);
      s2[l] = splitmix64(sm);
      s3[l] = splitmix64(sm);
    }
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // xoshiro256++, one step per lane; uniforms in (0, 1]
  void uniforms(double* __restrict u) {
#pragma omp simd
    for (int l = 0; l < kLanes; ++l) {
      const std::uint64_t out = rotl(s0[l] + s3[l], 23) + s0[l];
      const std::uint64_t t = s1[l] << 17;
      s2[l] ^= s0[l];
      s3[l] ^= s1[l];
      s1[l] ^= s2[l];
      s0[l] ^= s3[l];
      s2[l] ^= t;
      s3[l] = rotl(s3[l], 45);
      u[l] = (double(out >> 11) + 1.0) * 0x1.0p-53;
    }
  }
};

}  // namespace

std::vector<McIntegralEstimate> mc_iterated_integrals(int d, int max_degree,
                                                      long long samples, int grid,
                                                      std::uint64_t seed) {
  if (d < 1 || d > 2) throw ArgumentError("mc_iterated_integrals: supports d in {1, 2}");
  if (samples < 1 || grid < 1) throw ArgumentError("mc_iterated_integrals: bad sizes");

  const auto words = enumerate_multiindices(d, max_degree);
  const int nodes = static_cast<int>(words.size());

  // Prefix trie over the word list (the list is closed under prefixes and
  // ordered parents-first).  Node 0 is the empty word with value 1.
  std::map<std::vector<int>, int> index;
  for (int i = 0; i < nodes; ++i) index[words[i].entries] = i;
  std::vector<int> parent(nodes, -1), last(nodes, -1);
  for (int i = 1; i < nodes; ++i) {
    std::vector<int> pfx = words[i].entries;
    last[i] = pfx.back();
    pfx.pop_back();
    parent[i] = index.at(pfx);
  }

  // The trapezoid step is  new_i = old_i + 0.5 (old_p + new_p) inc.  Each
  // parent's cell average 0.5 (old_p + new_p) is shared by all children, so
  // it is computed once into a side row at the parent's own update.  Nodes
  // are processed level by level (parents one level up are finished first)
  // and grouped by last letter so the increment row hoists out of the loop;
  // within a group the update is in place and branch-free.
  std::vector<int> level(nodes, 0), nchild(nodes, 0);
  for (int i = 1; i < nodes; ++i) {
    level[i] = level[parent[i]] + 1;
    ++nchild[parent[i]];
  }
  const int max_level = *std::max_element(level.begin(), level.end());
  struct Group {
    int start, end, letter;
    bool keep_avg;
  };
  std::vector<int> order;
  std::vector<Group> groups;
  for (int lv = 1; lv <= max_level; ++lv)
    for (int letter = 0; letter <= d; ++letter)
      for (int keep = 1; keep >= 0; --keep) {
        const int start = static_cast<int>(order.size());
        for (int i = 1; i < nodes; ++i)
          if (level[i] == lv && last[i] == letter && (nchild[i] > 0) == (keep == 1))
            order.push_back(i);
        if (static_cast<int>(order.size()) > start)
          groups.push_back({start, static_cast<int>(order.size()), letter, keep == 1});
      }

  const double dt = 1.0 / grid;
  const double sqrt_dt = std::sqrt(dt);

  alignas(64) double z1[kLanes], z2[kLanes], u1[kLanes], u2[kLanes], dtv[kLanes];
  alignas(64) double rad[kLanes], ang[kLanes];
  for (int l = 0; l < kLanes; ++l) dtv[l] = dt;

  std::vector<double> val(static_cast<std::size_t>(nodes) * kLanes);
  std::vector<double> avg(static_cast<std::size_t>(nodes) * kLanes);

  std::vector<double> sum(nodes, 0.0), sumsq(nodes, 0.0);
  LaneRng rng;

  const long long nblocks = (samples + kLanes - 1) / kLanes;
  for (long long b = 0; b < nblocks; ++b) {
    rng.seed_block(seed, static_cast<std::uint64_t>(b));
    std::fill(val.begin(), val.end(), 0.0);
    for (int l = 0; l < kLanes; ++l) {
      val[l] = 1.0;  // the root row is the constant 1, as is its cell average
      avg[l] = 1.0;
    }

    for (int g = 0; g < grid; ++g) {
      rng.uniforms(u1);
      rng.uniforms(u2);
      // cos and sin live in separate loops: fused they become a sincos call,
      // which has no vector variant and would force the whole loop scalar
#pragma omp simd
      for (int l = 0; l < kLanes; ++l) {
        rad[l] = sqrt_dt * std::sqrt(-2.0 * std::log(u1[l]));
        ang[l] = 6.283185307179586477 * u2[l];
      }
#pragma omp simd
      for (int l = 0; l < kLanes; ++l) z1[l] = rad[l] * std::cos(ang[l]);
#pragma omp simd
      for (int l = 0; l < kLanes; ++l) z2[l] = rad[l] * std::sin(ang[l]);

      for (const auto& grp : groups) {
        const double* __restrict inc =
            grp.letter == 0 ? dtv : (grp.letter == 1 ? z1 : z2);
        if (grp.keep_avg) {
          for (int k = grp.start; k < grp.end; ++k) {
            const int i = order[k];
            double* __restrict v = val.data() + static_cast<std::size_t>(i) * kLanes;
            double* __restrict av = avg.data() + static_cast<std::size_t>(i) * kLanes;
            const double* __restrict ap =
                avg.data() + static_cast<std::size_t>(parent[i]) * kLanes;
#pragma omp simd
            for (int l = 0; l < kLanes; ++l) {
              const double t = ap[l] * inc[l];
              const double o = v[l];
              v[l] = o + t;
              av[l] = o + 0.5 * t;
            }
          }
        } else {
          for (int k = grp.start; k < grp.end; ++k) {
            const int i = order[k];
            double* __restrict v = val.data() + static_cast<std::size_t>(i) * kLanes;
            const double* __restrict ap =
                avg.data() + static_cast<std::size_t>(parent[i]) * kLanes;
#pragma omp simd
            for (int l = 0; l < kLanes; ++l) v[l] += ap[l] * inc[l];
          }
        }
      }
    }

    const int valid = static_cast<int>(
        std::min<long long>(kLanes, samples - b * kLanes));
    for (int i = 0; i < nodes; ++i) {
      const double* v = val.data() + static_cast<std::size_t>(i) * kLanes;
      for (int l = 0; l < valid; ++l) {
        sum[i] += v[l];
        sumsq[i] += v[l] * v[l];
      }
    }
  }

  std::vector<McIntegralEstimate> out(nodes);
  const double N = double(samples);
  for (int i = 0; i < nodes; ++i) {
    out[i].mean = sum[i] / N;
    if (samples > 1) {
      const double var = std::max(sumsq[i] / N - out[i].mean * out[i].mean, 0.0);
      out[i].std_error = std::sqrt(var / (N - 1.0));
    }
  }
  return out;
}

}  // namespace cubsde
