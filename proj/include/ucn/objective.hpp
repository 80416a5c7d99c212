#pragma once

#include <utility>

#include "ucn/geometry.hpp"

namespace ucn {

/// Channels restacked per BS: per_bs[k] holds H_{i,k} for every UT i in
/// rows [i*Mr, (i+1)*Mr). Built once per channel realization.
struct ChannelStack {
  int mt = 0;
  int mr = 0;
  std::vector<CMat> per_bs;  // per_bs[k]: (U * Mr) x Mt

  int num_bs() const { return static_cast<int>(per_bs.size()); }
  int num_ut() const {
    return per_bs.empty() ? 0 : static_cast<int>(per_bs[0].rows()) / mr;
  }

  /// View of H_{i,k}.
  auto block(int i, int k) const {
    return per_bs[k].middleRows(static_cast<Eigen::Index>(i) * mr, mr);
  }
};

inline ChannelStack make_channel_stack(const ChannelSet& ch) {
  ChannelStack s;
  s.mt = ch.mt;
  s.mr = ch.mr;
  s.per_bs.resize(ch.num_bs());
  for (int k = 0; k < ch.num_bs(); ++k) {
    CMat m(static_cast<Eigen::Index>(ch.num_ut()) * ch.mr, ch.mt);
    for (int i = 0; i < ch.num_ut(); ++i)
      m.middleRows(static_cast<Eigen::Index>(i) * ch.mr, ch.mr) = ch.h[i][k];
    s.per_bs[k] = std::move(m);
  }
  return s;
}

/// Running products that make the iterations cheap. v_blk[j][s] stacks
/// V_{i,j,l} = H_{i,l} P_{j,l} over all observers i (rows i*Mr..) for
/// the s-th serving BS l of UT j; v_user[j] is the sum over the serving
/// cluster, i.e. all effective links V_{i,j}. r/c are the interference
/// covariances and the d_i x d_i inverses entering rate and gradient.
struct ObjectiveCache {
  std::vector<std::vector<CMat>> v_blk;   // (U*Mr) x d_j per serving slot
  std::vector<CMat> v_user;               // (U*Mr) x d_j
  std::vector<CMat> r;                    // Mr x Mr, Hermitian PD
  std::vector<Eigen::LLT<CMat>> r_llt;
  std::vector<double> logdet_r;
  std::vector<CMat> c;                    // d_i x d_i, Hermitian, eigs in (0,1]

  /// View of V_{i,j}.
  auto v(int i, int j, int mr) const {
    return v_user[j].middleRows(static_cast<Eigen::Index>(i) * mr, mr);
  }
};

/// Recomputes R_i, its factor, and C_i from the V aggregates.
inline void refresh_covariances(ObjectiveCache& cache,
                                const NetworkConfig& cfg) {
  const int u = cfg.num_ut, mr = cfg.mr;
  cache.r.resize(u);
  cache.r_llt.resize(u);
  cache.logdet_r.resize(u);
  cache.c.resize(u);
  for (int i = 0; i < u; ++i) {
    CMat r = cfg.noise_power * CMat::Identity(mr, mr);
    for (int j = 0; j < u; ++j) {
      if (j == i) continue;
      const auto vij = cache.v(i, j, mr);
      r += vij * vij.adjoint();
    }
    cache.r[i] = std::move(r);
    cache.r_llt[i] = hpd_factor(cache.r[i]);
    cache.logdet_r[i] = hpd_logdet(cache.r_llt[i]);
    const auto vii = cache.v(i, i, mr);
    const CMat x = cache.r_llt[i].solve(vii);
    const CMat cinv = CMat::Identity(cfg.streams[i], cfg.streams[i]) +
                      vii.adjoint() * x;
    cache.c[i] = hpd_inverse(cinv);
  }
}

inline ObjectiveCache build_cache(const ChannelStack& hs,
                                  const NetworkConfig& cfg,
                                  const ClusterMap& cluster,
                                  const Precoder& p) {
  require_conforming(p, cluster, cfg.mt);
  ObjectiveCache cache;
  const int u = cfg.num_ut;
  cache.v_blk.resize(u);
  cache.v_user.resize(u);
  for (int j = 0; j < u; ++j) {
    const auto& blk = cluster.blocks[j];
    cache.v_blk[j].resize(blk.size());
    CMat sum = CMat::Zero(static_cast<Eigen::Index>(u) * cfg.mr,
                          cfg.streams[j]);
    for (std::size_t s = 0; s < blk.size(); ++s) {
      cache.v_blk[j][s] =
          hs.per_bs[blk[s]] * stack_block(p.user[j], static_cast<int>(s),
                                          cfg.mt);
      sum += cache.v_blk[j][s];
    }
    cache.v_user[j] = std::move(sum);
  }
  refresh_covariances(cache, cfg);
  return cache;
}

/// Rate of UT i in nats: logdet(R_i + V_ii V_ii^H) - logdet(R_i).
inline double user_rate(const ObjectiveCache& cache, const NetworkConfig& cfg,
                        int i) {
  const auto vii = cache.v(i, i, cfg.mr);
  const CMat s = cache.r[i] + vii * vii.adjoint();
  const double rate = hpd_logdet(s) - cache.logdet_r[i];
  if (!std::isfinite(rate)) throw NumericalError("non-finite user rate");
  return rate;
}

/// Weighted sum rate in nats.
inline double wsr(const ObjectiveCache& cache, const NetworkConfig& cfg) {
  double acc = 0.0;
  for (int i = 0; i < cfg.num_ut; ++i)
    acc += cfg.weights[i] * user_rate(cache, cfg, i);
  return acc;
}

/// Minimization objective f = -wsr.
inline double objective(const ObjectiveCache& cache,
                        const NetworkConfig& cfg) {
  return -wsr(cache, cfg);
}

/// Euclidean gradient of f, blockwise
///   -2 ( w_i H_{i,k}^H R_i^{-1} V_ii C_i
///        - sum_{j != i} w_j H_{j,k}^H R_j^{-1} V_jj C_j V_jj^H R_j^{-1} V_ji ).
/// Only M_r- and d_i-dimensional systems are solved.
inline TangentVector euclidean_gradient(const ChannelStack& hs,
                                        const NetworkConfig& cfg,
                                        const ClusterMap& cluster,
                                        const ObjectiveCache& cache) {
  const int u = cfg.num_ut, mr = cfg.mr;

  // Per user j: A_j = R_j^{-1} V_jj C_j and T_j = A_j (R_j^{-1} V_jj)^H.
  std::vector<CMat> a(u), t(u);
  for (int j = 0; j < u; ++j) {
    const CMat x = cache.r_llt[j].solve(cache.v(j, j, mr));
    a[j] = x * cache.c[j];
    t[j] = a[j] * x.adjoint();
  }

  // dstack[i] stacks w_j T_j V_{j,i} over the observer index j.
  std::vector<CMat> dstack(u);
  for (int i = 0; i < u; ++i) {
    CMat d(static_cast<Eigen::Index>(u) * mr, cfg.streams[i]);
    for (int j = 0; j < u; ++j)
      d.middleRows(static_cast<Eigen::Index>(j) * mr, mr) =
          cfg.weights[j] * (t[j] * cache.v(j, i, mr));
    dstack[i] = std::move(d);
  }

  TangentVector g;
  g.user.resize(u);
  for (int i = 0; i < u; ++i) {
    const auto& blk = cluster.blocks[i];
    // The j = i term of the stacked sum is removed and the own-signal
    // term w_i H^H A_i enters with the opposite sign.
    const CMat own =
        dstack[i].middleRows(static_cast<Eigen::Index>(i) * mr, mr) +
        cfg.weights[i] * a[i];
    CMat gi(static_cast<Eigen::Index>(blk.size()) * cfg.mt, cfg.streams[i]);
    for (std::size_t s = 0; s < blk.size(); ++s) {
      const int k = blk[s];
      stack_block(gi, static_cast<int>(s), cfg.mt) =
          2.0 * (hs.per_bs[k].adjoint() * dstack[i] -
                 hs.block(i, k).adjoint() * own);
    }
    g.user[i] = std::move(gi);
  }
  return g;
}

/// Riemannian gradient: projection of the Euclidean gradient onto the
/// tangent space at p. The multipliers are returned for inspection.
inline ProjectionResult riemannian_gradient(const NetworkConfig& cfg,
                                            const ClusterMap& cluster,
                                            const Precoder& p,
                                            const TangentVector& egrad) {
  return project_tangent(cfg, cluster, p, egrad);
}

/// Per-direction state for the backtracking search: the U products
/// H eta plus the per-BS quadratic coefficients of the candidate power
/// P(alpha) = pow0 + 2 alpha a + alpha^2 b. No channel-matrix product
/// happens inside the line search itself.
struct LineSearchContext {
  std::vector<std::vector<CMat>> u_blk;  // (U*Mr) x d_j per serving slot
  RVec pow0, pow_a, pow_b;
};

inline LineSearchContext begin_line_search(const ChannelStack& hs,
                                           const NetworkConfig& cfg,
                                           const ClusterMap& cluster,
                                           const Precoder& p,
                                           const TangentVector& eta) {
  require_conforming(p, cluster, cfg.mt);
  require_same_shape(p, eta);
  const int u = cfg.num_ut, b = cluster.num_bs();
  LineSearchContext ctx;
  ctx.u_blk.resize(u);
  for (int j = 0; j < u; ++j) {
    const auto& blk = cluster.blocks[j];
    ctx.u_blk[j].resize(blk.size());
    for (std::size_t s = 0; s < blk.size(); ++s)
      ctx.u_blk[j][s] =
          hs.per_bs[blk[s]] * stack_block(eta.user[j], static_cast<int>(s),
                                          cfg.mt);
  }
  ctx.pow0 = RVec::Zero(b);
  ctx.pow_a = RVec::Zero(b);
  ctx.pow_b = RVec::Zero(b);
  for (int k = 0; k < b; ++k)
    for (int i : cluster.served[k]) {
      const int s = cluster.slot[i][k];
      const auto pb = stack_block(p.user[i], s, cfg.mt);
      const auto eb = stack_block(eta.user[i], s, cfg.mt);
      ctx.pow0[k] += pb.squaredNorm();
      ctx.pow_a[k] += re_inner(pb, eb);
      ctx.pow_b[k] += eb.squaredNorm();
    }
  return ctx;
}

struct PhiResult {
  double f = 0.0;               // objective at the retracted candidate
  std::vector<CMat> v_user;     // candidate V aggregates, for promotion
  RVec gamma;                   // retraction scales at this step length
};

/// phi(alpha) = f(retract(p, alpha eta)), evaluated through the cached
/// V/U blocks: V_{i,j}(alpha) = sum_l gamma_l (V_{i,j,l} + alpha U_{i,j,l}).
inline PhiResult phi(const NetworkConfig& cfg, const ClusterMap& cluster,
                     const ObjectiveCache& cache, const LineSearchContext& ctx,
                     double alpha) {
  const int u = cfg.num_ut, b = cluster.num_bs(), mr = cfg.mr;
  PhiResult out;
  out.gamma = RVec::Ones(b);
  for (int k = 0; k < b; ++k) {
    if (cluster.served[k].empty()) continue;
    const double cand =
        ctx.pow0[k] + 2.0 * alpha * ctx.pow_a[k] + alpha * alpha * ctx.pow_b[k];
    if (cand <= 1e-300)
      throw DegenerateRetractionError("candidate power vanished at BS " +
                                      std::to_string(k));
    out.gamma[k] = std::sqrt(cfg.bs_power[k] / cand);
  }

  out.v_user.resize(u);
  for (int j = 0; j < u; ++j) {
    const auto& blk = cluster.blocks[j];
    CMat sum = CMat::Zero(static_cast<Eigen::Index>(u) * mr, cfg.streams[j]);
    for (std::size_t s = 0; s < blk.size(); ++s)
      sum += out.gamma[blk[s]] *
             (cache.v_blk[j][s] + alpha * ctx.u_blk[j][s]);
    out.v_user[j] = std::move(sum);
  }

  double acc = 0.0;
  for (int i = 0; i < u; ++i) {
    CMat r = cfg.noise_power * CMat::Identity(mr, mr);
    for (int j = 0; j < u; ++j) {
      if (j == i) continue;
      const auto vij =
          out.v_user[j].middleRows(static_cast<Eigen::Index>(i) * mr, mr);
      r += vij * vij.adjoint();
    }
    const auto vii =
        out.v_user[i].middleRows(static_cast<Eigen::Index>(i) * mr, mr);
    const CMat s = r + vii * vii.adjoint();
    acc += cfg.weights[i] * (hpd_logdet(s) - hpd_logdet(r));
  }
  out.f = -acc;
  return out;
}

/// Installs an accepted candidate: per-slot blocks follow
/// V_{i,j,l} <- gamma_l (V_{i,j,l} + alpha U_{i,j,l}), the aggregates are
/// taken from the accepted PhiResult, and R/C are refreshed.
inline void promote_cache(ObjectiveCache& cache, const LineSearchContext& ctx,
                          double alpha, PhiResult&& accepted,
                          const NetworkConfig& cfg,
                          const ClusterMap& cluster) {
  for (int j = 0; j < cfg.num_ut; ++j) {
    const auto& blk = cluster.blocks[j];
    for (std::size_t s = 0; s < blk.size(); ++s) {
      cache.v_blk[j][s] += alpha * ctx.u_blk[j][s];
      cache.v_blk[j][s] *= accepted.gamma[blk[s]];
    }
  }
  cache.v_user = std::move(accepted.v_user);
  refresh_covariances(cache, cfg);
}

}  // namespace ucn
