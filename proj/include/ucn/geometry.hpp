#pragma once

#include "ucn/network.hpp"

namespace ucn {

/// The product Riemannian metric g(xi, zeta) = sum Re tr(zeta^H xi),
/// shared by the ambient product space and the power-constraint
/// submanifold. It does not depend on the base point.
inline double metric(const BlockStack& xi, const BlockStack& zeta) {
  require_same_shape(xi, zeta);
  double acc = 0.0;
  for (std::size_t i = 0; i < xi.user.size(); ++i)
    acc += re_inner(zeta.user[i], xi.user[i]);
  return acc;
}

inline double norm(const BlockStack& xi) { return std::sqrt(squared_norm(xi)); }

/// Per-BS constraint violation: per_bs_power(p) - P_k, zero for BSs with
/// an empty served group. Vanishes exactly on the manifold.
inline RVec feasibility_residual(const NetworkConfig& cfg,
                                 const ClusterMap& cluster,
                                 const Precoder& p) {
  RVec res = per_bs_power(p, cluster, cfg.mt);
  for (int k = 0; k < cluster.num_bs(); ++k)
    res[k] = cluster.served[k].empty() ? 0.0 : res[k] - cfg.bs_power[k];
  return res;
}

inline bool on_manifold(const NetworkConfig& cfg, const ClusterMap& cluster,
                        const Precoder& p, double rel_tol = 1e-9) {
  const RVec res = feasibility_residual(cfg, cluster, p);
  for (int k = 0; k < cluster.num_bs(); ++k)
    if (std::abs(res[k]) > rel_tol * cfg.bs_power[k]) return false;
  return true;
}

/// Defect of the tangency equations at p: component k is
/// sum_{i in U_k} 2 Re tr(P_{i,k}^H xi_{i,k}). Zero iff xi lies in the
/// tangent space of the submanifold at p.
inline RVec tangency_residual(const NetworkConfig& cfg,
                              const ClusterMap& cluster, const Precoder& p,
                              const TangentVector& xi) {
  require_conforming(p, cluster, cfg.mt);
  require_same_shape(p, xi);
  RVec res = RVec::Zero(cluster.num_bs());
  for (int k = 0; k < cluster.num_bs(); ++k)
    for (int i : cluster.served[k]) {
      const int s = cluster.slot[i][k];
      res[k] += 2.0 * re_inner(stack_block(p.user[i], s, cfg.mt),
                               stack_block(xi.user[i], s, cfg.mt));
    }
  return res;
}

struct ProjectionResult {
  TangentVector xi;
  RVec mu;  // one multiplier per BS (zero where the served group is empty)
};

/// Orthogonal projection of an ambient tangent vector onto the tangent
/// space at p: blockwise xi_{i,k} - mu_k P_{i,k} with
/// mu_k = (1/P_k) sum_{i in U_k} Re tr(P_{i,k}^H xi_{i,k}).
inline ProjectionResult project_tangent(const NetworkConfig& cfg,
                                        const ClusterMap& cluster,
                                        const Precoder& p,
                                        const TangentVector& xi) {
  require_conforming(p, cluster, cfg.mt);
  require_same_shape(p, xi);
  RVec mu = RVec::Zero(cluster.num_bs());
  for (int k = 0; k < cluster.num_bs(); ++k) {
    if (cluster.served[k].empty()) continue;
    if (cfg.bs_power[k] <= 0.0)
      throw ConfigError("zero power budget at a BS with served users");
    double acc = 0.0;
    for (int i : cluster.served[k]) {
      const int s = cluster.slot[i][k];
      acc += re_inner(stack_block(p.user[i], s, cfg.mt),
                      stack_block(xi.user[i], s, cfg.mt));
    }
    mu[k] = acc / cfg.bs_power[k];
  }
  ProjectionResult out{xi, std::move(mu)};
  for (int i = 0; i < cluster.num_ut(); ++i)
    for (std::size_t s = 0; s < cluster.blocks[i].size(); ++s) {
      const int k = cluster.blocks[i][s];
      if (out.mu[k] != 0.0)
        stack_block(out.xi.user[i], static_cast<int>(s), cfg.mt) -=
            out.mu[k] * stack_block(p.user[i], static_cast<int>(s), cfg.mt);
    }
  return out;
}

struct RetractionResult {
  Precoder p;
  RVec gamma;  // per-BS scale (1 where the served group is empty)
};

/// Scales a candidate point onto the manifold: each constrained BS's
/// stacked columns are renormalized to radius sqrt(P_k).
inline RetractionResult normalize_to_manifold(const NetworkConfig& cfg,
                                              const ClusterMap& cluster,
                                              const Precoder& candidate) {
  require_conforming(candidate, cluster, cfg.mt);
  RVec power = per_bs_power(candidate, cluster, cfg.mt);
  RVec gamma = RVec::Ones(cluster.num_bs());
  for (int k = 0; k < cluster.num_bs(); ++k) {
    if (cluster.served[k].empty()) continue;
    if (power[k] <= 1e-300)
      throw DegenerateRetractionError(
          "candidate power vanished at BS " + std::to_string(k));
    gamma[k] = std::sqrt(cfg.bs_power[k] / power[k]);
  }
  RetractionResult out{candidate, std::move(gamma)};
  for (int i = 0; i < cluster.num_ut(); ++i)
    for (std::size_t s = 0; s < cluster.blocks[i].size(); ++s) {
      const int k = cluster.blocks[i][s];
      if (out.gamma[k] != 1.0)
        stack_block(out.p.user[i], static_cast<int>(s), cfg.mt) *=
            out.gamma[k];
    }
  return out;
}

/// Retraction: maps a tangent step to the manifold by per-BS power
/// renormalization of p + xi.
inline RetractionResult retract(const NetworkConfig& cfg,
                                const ClusterMap& cluster, const Precoder& p,
                                const TangentVector& xi) {
  require_same_shape(p, xi);
  return normalize_to_manifold(cfg, cluster, p + xi);
}

struct TransportResult {
  TangentVector xi;
  RVec rho;
};

/// Vector transport into the tangent space at p_new: blockwise
/// xi_{i,k} - rho_k P^new_{i,k} with
/// rho_k = (1/P_k) sum_{i in U_k} Re tr((P^new_{i,k})^H xi_{i,k}).
/// Only the destination point enters the formula.
inline TransportResult transport(const NetworkConfig& cfg,
                                 const ClusterMap& cluster,
                                 const Precoder& p_new,
                                 const TangentVector& xi) {
  require_conforming(p_new, cluster, cfg.mt);
  require_same_shape(p_new, xi);
  RVec rho = RVec::Zero(cluster.num_bs());
  for (int k = 0; k < cluster.num_bs(); ++k) {
    if (cluster.served[k].empty()) continue;
    if (cfg.bs_power[k] <= 0.0)
      throw ConfigError("zero power budget at a BS with served users");
    double acc = 0.0;
    for (int i : cluster.served[k]) {
      const int s = cluster.slot[i][k];
      acc += re_inner(stack_block(p_new.user[i], s, cfg.mt),
                      stack_block(xi.user[i], s, cfg.mt));
    }
    rho[k] = acc / cfg.bs_power[k];
  }
  TransportResult out{xi, std::move(rho)};
  for (int i = 0; i < cluster.num_ut(); ++i)
    for (std::size_t s = 0; s < cluster.blocks[i].size(); ++s) {
      const int k = cluster.blocks[i][s];
      if (out.rho[k] != 0.0)
        stack_block(out.xi.user[i], static_cast<int>(s), cfg.mt) -=
            out.rho[k] *
            stack_block(p_new.user[i], static_cast<int>(s), cfg.mt);
    }
  return out;
}

/// Ambient sample with i.i.d. CN(0,1) blocks, for test fixtures.
inline BlockStack random_ambient(const NetworkConfig& cfg,
                                 const ClusterMap& cluster,
                                 std::uint64_t seed) {
  Crng rng(seed);
  BlockStack s;
  s.user.reserve(cluster.num_ut());
  for (int i = 0; i < cluster.num_ut(); ++i)
    s.user.push_back(rng.cgaussian_matrix(
        static_cast<Eigen::Index>(cluster.blocks[i].size()) * cfg.mt,
        cfg.streams[i], 1.0));
  return s;
}

/// Seed-deterministic random point on the manifold: Gaussian sample
/// normalized by the retraction scaling (resampled on the measure-zero
/// event of a degenerate draw).
inline Precoder random_on_manifold(const NetworkConfig& cfg,
                                   const ClusterMap& cluster,
                                   std::uint64_t seed) {
  for (int attempt = 0;; ++attempt) {
    try {
      return normalize_to_manifold(cfg, cluster,
                                   random_ambient(cfg, cluster, seed + attempt))
          .p;
    } catch (const DegenerateRetractionError&) {
      if (attempt > 64) throw;
    }
  }
}

}  // namespace ucn
