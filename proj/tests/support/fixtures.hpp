#pragma once

#include "ucn/baselines.hpp"
#include "ucn/objective.hpp"

namespace ucn::testing {

/// A small self-consistent problem instance for randomized tests.
struct Instance {
  NetworkConfig cfg;
  ChannelSet channels;
  ClusterMap cluster;
  ChannelStack hs;
};

inline Instance make_instance(std::uint64_t seed, int b, int u, int mt, int mr,
                              int d, int bsc, double power = 2.0,
                              double noise = 0.01) {
  Instance inst;
  inst.cfg = NetworkConfig::uniform(b, u, mt, mr, d, power, noise, bsc);
  inst.cfg.area_radius_m = 100.0;  // keeps large-scale gains well above noise
  inst.cfg.rng_seed = seed;
  inst.channels = generate_channels(inst.cfg, seed);
  inst.cluster = select_clusters(inst.channels, bsc);
  inst.hs = make_channel_stack(inst.channels);
  return inst;
}

/// Variant with per-UT stream counts and per-BS power budgets.
inline Instance make_mixed_instance(std::uint64_t seed, int b, int u, int mt,
                                    int mr, int bsc) {
  Instance inst;
  inst.cfg = NetworkConfig::uniform(b, u, mt, mr, 1, 1.0, 0.01, bsc);
  for (int i = 0; i < u; ++i) inst.cfg.streams[i] = 1 + (i % mr);
  for (int k = 0; k < b; ++k) inst.cfg.bs_power[k] = 1.0 + 0.5 * k;
  inst.cfg.weights[0] = 0.25;  // exercise non-uniform weights too
  inst.cfg.area_radius_m = 100.0;
  inst.channels = generate_channels(inst.cfg, seed);
  inst.cluster = select_clusters(inst.channels, bsc);
  inst.hs = make_channel_stack(inst.channels);
  return inst;
}

inline Precoder random_point(const Instance& inst, std::uint64_t seed) {
  return random_on_manifold(inst.cfg, inst.cluster, seed);
}

inline TangentVector random_tangent(const Instance& inst, const Precoder& p,
                                    std::uint64_t seed) {
  return project_tangent(inst.cfg, inst.cluster, p,
                         random_ambient(inst.cfg, inst.cluster, seed))
      .xi;
}

}  // namespace ucn::testing
