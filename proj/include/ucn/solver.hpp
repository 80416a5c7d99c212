#pragma once

#include <chrono>
#include <functional>

#include "ucn/objective.hpp"

namespace ucn {

enum class StopReason {
  kConverged,             // Riemannian gradient norm below grad_tol
  kMaxOuterReached,
  kLineSearchFailed,      // no sufficient decrease within max_inner trials
  kDegenerateRetraction,
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kConverged: return "converged";
    case StopReason::kMaxOuterReached: return "max_outer";
    case StopReason::kLineSearchFailed: return "line_search_failed";
    case StopReason::kDegenerateRetraction: return "degenerate_retraction";
  }
  return "unknown";
}

struct IterationRecord {
  int iter = 0;           // 1-based outer iteration
  double f = 0.0;         // objective after the accepted step
  double wsr_nats = 0.0;
  double grad_norm = 0.0; // Riemannian gradient norm that drove this step
  double beta = 0.0;
  double alpha = 0.0;     // accepted step length
  int inner_iters = 0;    // phi evaluations spent by the backtracking
  double wall_ms = 0.0;
};

struct SolverTrace {
  double f_initial = 0.0;
  double wsr_initial_nats = 0.0;
  std::vector<IterationRecord> rows;
  StopReason reason = StopReason::kMaxOuterReached;
  double final_grad_norm = 0.0;

  int total_inner() const {
    int n = 0;
    for (const auto& r : rows) n += r.inner_iters;
    return n;
  }
};

/// Modified Polak-Ribiere momentum: beta = max(0, min(beta_PRP, beta_FR))
/// with nu = g_now - (g_prev transported to the current point). A zero
/// previous gradient yields beta = 0 (steepest-descent restart).
inline double beta_modified_prp(const TangentVector& g_now,
                                const TangentVector& g_prev_transported,
                                double g_prev_normsq) {
  if (g_prev_normsq <= 0.0) return 0.0;
  const TangentVector nu = g_now - g_prev_transported;
  const double beta_prp = metric(g_now, nu) / g_prev_normsq;
  const double beta_fr = metric(g_now, g_now) / g_prev_normsq;
  return std::max(0.0, std::min(beta_prp, beta_fr));
}

struct DirectionResult {
  TangentVector eta;
  double beta_used = 0.0;  // zero after a restart
};

/// Conjugate direction eta = -g + beta * transport(eta_prev). If the
/// combination fails to be a descent direction, falls back to -g.
inline DirectionResult search_direction(const NetworkConfig& cfg,
                                        const ClusterMap& cluster,
                                        const Precoder& p_new,
                                        const TangentVector& g_riem,
                                        const TangentVector& eta_prev,
                                        double beta, bool allow_restart = true) {
  if (beta <= 0.0) return {-g_riem, 0.0};
  TangentVector eta =
      -g_riem + beta * transport(cfg, cluster, p_new, eta_prev).xi;
  if (metric(eta, g_riem) >= 0.0 && allow_restart) return {-g_riem, 0.0};
  return {std::move(eta), beta};
}

struct BacktrackResult {
  bool accepted = false;
  double alpha = 0.0;
  int inner_iters = 0;
  PhiResult phi;
};

/// Armijo backtracking over the retraction: accepts the first
/// alpha = r^m alpha0 with f(p) - phi(alpha) >= c * |alpha * slope|,
/// where slope = metric(grad f, eta) < 0.
inline BacktrackResult backtrack(const NetworkConfig& cfg,
                                 const ClusterMap& cluster,
                                 const ObjectiveCache& cache,
                                 const LineSearchContext& ctx, double f0,
                                 double slope, const SolverOptions& opts) {
  BacktrackResult out;
  if (!(slope < 0.0)) return out;
  double alpha = opts.alpha0;
  for (int m = 1; m <= opts.max_inner; ++m) {
    PhiResult ph = phi(cfg, cluster, cache, ctx, alpha);
    if (f0 - ph.f >= -opts.c * alpha * slope) {
      out.accepted = true;
      out.alpha = alpha;
      out.inner_iters = m;
      out.phi = std::move(ph);
      return out;
    }
    alpha *= opts.r;
  }
  out.inner_iters = opts.max_inner;
  return out;
}

struct SolveResult {
  Precoder p;
  SolverTrace trace;
};

/// Observer invoked after every accepted step, with the new iterate,
/// the promoted cache and the trace row just recorded.
using IterationObserver = std::function<void(
    const Precoder&, const ObjectiveCache&, const IterationRecord&)>;

/// Riemannian conjugate gradient for the weighted-sum-rate precoder:
/// steepest-descent start, modified-PRP conjugate directions carried by
/// vector transport, Armijo backtracking over the retraction, and
/// incrementally maintained V/U caches. Every iterate stays on the
/// manifold; f never increases across accepted steps.
inline SolveResult rcg_solve(const ChannelSet& channels,
                             const ClusterMap& cluster,
                             const NetworkConfig& cfg, const Precoder& p0,
                             const SolverOptions& opts,
                             const IterationObserver& observer = {}) {
  cfg.validate();
  if (!on_manifold(cfg, cluster, p0, 1e-7))
    throw ConfigError("initial point is not on the constraint manifold");

  const ChannelStack hs = make_channel_stack(channels);
  Precoder p = p0;
  ObjectiveCache cache = build_cache(hs, cfg, cluster, p);
  double f = objective(cache, cfg);

  SolverTrace trace;
  trace.f_initial = f;
  trace.wsr_initial_nats = -f;

  TangentVector g_prev, eta_prev;
  double g_prev_normsq = 0.0;
  bool have_history = false;

  using Clock = std::chrono::steady_clock;
  for (int n = 1; n <= opts.max_outer; ++n) {
    const auto t0 = Clock::now();

    const TangentVector egrad = euclidean_gradient(hs, cfg, cluster, cache);
    TangentVector g = riemannian_gradient(cfg, cluster, p, egrad).xi;
    const double g_normsq = metric(g, g);
    const double g_norm = std::sqrt(g_normsq);
    trace.final_grad_norm = g_norm;
    if (g_norm <= opts.grad_tol) {
      trace.reason = StopReason::kConverged;
      return {std::move(p), std::move(trace)};
    }

    DirectionResult dir;
    if (!have_history) {
      dir = {-g, 0.0};
    } else {
      const TangentVector g_prev_t = transport(cfg, cluster, p, g_prev).xi;
      const double beta = beta_modified_prp(g, g_prev_t, g_prev_normsq);
      dir = search_direction(cfg, cluster, p, g, eta_prev, beta,
                             opts.allow_restart);
    }
    const double slope = metric(g, dir.eta);

    const LineSearchContext ctx =
        begin_line_search(hs, cfg, cluster, p, dir.eta);
    BacktrackResult bt;
    try {
      bt = backtrack(cfg, cluster, cache, ctx, f, slope, opts);
    } catch (const DegenerateRetractionError&) {
      trace.reason = StopReason::kDegenerateRetraction;
      return {std::move(p), std::move(trace)};
    }
    if (!bt.accepted) {
      trace.reason = StopReason::kLineSearchFailed;
      return {std::move(p), std::move(trace)};
    }

    // P^{n+1}_{i,k} = gamma_k (P^n_{i,k} + alpha eta_{i,k}); the cache
    // follows the same scaling so both stay consistent.
    for (int i = 0; i < cfg.num_ut; ++i) {
      const auto& blk = cluster.blocks[i];
      for (std::size_t s = 0; s < blk.size(); ++s) {
        auto pb = stack_block(p.user[i], static_cast<int>(s), cfg.mt);
        pb += bt.alpha * stack_block(dir.eta.user[i], static_cast<int>(s),
                                     cfg.mt);
        pb *= bt.phi.gamma[blk[s]];
      }
    }
    f = bt.phi.f;
    promote_cache(cache, ctx, bt.alpha, std::move(bt.phi), cfg, cluster);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    trace.rows.push_back({n, f, -f, g_norm, dir.beta_used, bt.alpha,
                          bt.inner_iters, wall_ms});
    if (observer) observer(p, cache, trace.rows.back());

    g_prev = std::move(g);
    eta_prev = std::move(dir.eta);
    g_prev_normsq = g_normsq;
    have_history = true;
  }

  // Report the gradient norm at the final iterate.
  const TangentVector egrad = euclidean_gradient(hs, cfg, cluster, cache);
  trace.final_grad_norm =
      norm(riemannian_gradient(cfg, cluster, p, egrad).xi);
  trace.reason = StopReason::kMaxOuterReached;
  return {std::move(p), std::move(trace)};
}

}  // namespace ucn
