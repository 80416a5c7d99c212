#pragma once

#include <optional>
#include <string>

#include "ucn/geometry.hpp"

namespace ucn {

enum class BaselineKind { kMrt, kZf, kMmse, kBd, kEzf };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kMrt: return "mrt";
    case BaselineKind::kZf: return "zf";
    case BaselineKind::kMmse: return "mmse";
    case BaselineKind::kBd: return "bd";
    case BaselineKind::kEzf: return "ezf";
  }
  return "unknown";
}

inline std::optional<BaselineKind> parse_baseline(const std::string& name) {
  if (name == "mrt") return BaselineKind::kMrt;
  if (name == "zf") return BaselineKind::kZf;
  if (name == "mmse") return BaselineKind::kMmse;
  if (name == "bd") return BaselineKind::kBd;
  if (name == "ezf") return BaselineKind::kEzf;
  return std::nullopt;
}

namespace detail {

/// Top-d right singular directions of H (M_r x M_t), computed through
/// the M_r x M_r Gram matrix so nothing larger than M_r is factorized.
/// Rank-deficient channels are padded with an orthonormal complement.
inline CMat top_right_directions(const CMat& h, int d) {
  const int mr = static_cast<int>(h.rows());
  const int mt = static_cast<int>(h.cols());
  const auto es = hermitian_eig(h * h.adjoint());  // ascending eigenvalues
  CMat v(mt, d);
  const double tol = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  int filled = 0;
  for (int j = mr - 1; j >= 0 && filled < d; --j) {
    const double ev = es.eigenvalues()(j);
    if (ev <= tol) break;
    v.col(filled++) =
        h.adjoint() * es.eigenvectors().col(j) / std::sqrt(ev);
  }
  // Pad with unit vectors orthogonal to what is already there.
  for (int e = 0; filled < d && e < mt; ++e) {
    Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(mt);
    cand(e) = 1.0;
    for (int c = 0; c < filled; ++c) cand -= v.col(c).dot(cand) * v.col(c);
    const double n = cand.norm();
    if (n > 1e-8) v.col(filled++) = cand / n;
  }
  if (filled < d)
    throw BaselineInfeasibleError("cannot span the requested stream count");
  return v;
}

/// H_j restricted to the columns of UT i's serving cluster, i.e. the
/// channel every user sees from the antennas that may carry P_i.
inline CMat cluster_channel(const ChannelSet& ch, const ClusterMap& cluster,
                            int j, int i) {
  const auto& blk = cluster.blocks[i];
  CMat a(ch.mr, static_cast<Eigen::Index>(blk.size()) * ch.mt);
  for (std::size_t s = 0; s < blk.size(); ++s)
    a.middleCols(static_cast<Eigen::Index>(s) * ch.mt, ch.mt) =
        ch.h[j][blk[s]];
  return a;
}

/// Scales every stream column to unit norm (equal per-stream power
/// before the manifold push).
inline void equalize_columns(CMat& p) {
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double n = p.col(c).norm();
    if (n <= 1e-300)
      throw BaselineInfeasibleError("baseline produced a zero stream");
    p.col(c) /= n;
  }
}

}  // namespace detail

/// Maximum ratio transmission: each block transmits along the top-d_i
/// right singular directions of its own channel. Used as the solver's
/// initial point.
inline Precoder mrt_precoder(const ChannelSet& ch, const ClusterMap& cluster,
                             const NetworkConfig& cfg) {
  Precoder p;
  p.user.resize(cfg.num_ut);
  for (int i = 0; i < cfg.num_ut; ++i) {
    const auto& blk = cluster.blocks[i];
    CMat pi(static_cast<Eigen::Index>(blk.size()) * cfg.mt, cfg.streams[i]);
    for (std::size_t s = 0; s < blk.size(); ++s)
      stack_block(pi, static_cast<int>(s), cfg.mt) =
          detail::top_right_directions(ch.h[i][blk[s]], cfg.streams[i]);
    detail::equalize_columns(pi);
    p.user[i] = std::move(pi);
  }
  return normalize_to_manifold(cfg, cluster, p).p;
}

/// Closed-form linear precoders, each applied per serving cluster on the
/// stacked effective channels and then forced onto the power-constraint
/// manifold by the retraction scaling.
inline Precoder linear_baseline(BaselineKind kind, const ChannelSet& ch,
                                const ClusterMap& cluster,
                                const NetworkConfig& cfg) {
  if (kind == BaselineKind::kMrt) return mrt_precoder(ch, cluster, cfg);

  const int u = cfg.num_ut, mr = cfg.mr;
  Precoder p;
  p.user.resize(u);
  for (int i = 0; i < u; ++i) {
    const Eigen::Index cols =
        static_cast<Eigen::Index>(cluster.blocks[i].size()) * cfg.mt;
    CMat pi;
    switch (kind) {
      case BaselineKind::kZf:
      case BaselineKind::kMmse: {
        // Null (ZF) or softly null (MMSE) every user's reception of the
        // antennas in UT i's cluster.
        CMat g(static_cast<Eigen::Index>(u) * mr, cols);
        for (int j = 0; j < u; ++j)
          g.middleRows(static_cast<Eigen::Index>(j) * mr, mr) =
              detail::cluster_channel(ch, cluster, j, i);
        CMat gram = g * g.adjoint();
        if (kind == BaselineKind::kMmse)
          gram += cfg.noise_power * CMat::Identity(gram.rows(), gram.cols());
        CMat rhs = CMat::Zero(static_cast<Eigen::Index>(u) * mr,
                              cfg.streams[i]);
        rhs.middleRows(static_cast<Eigen::Index>(i) * mr, mr) =
            CMat::Identity(mr, mr).leftCols(cfg.streams[i]);
        try {
          pi = g.adjoint() * hpd_factor(gram).solve(rhs);
        } catch (const NumericalError&) {
          throw BaselineInfeasibleError(
              "stacked channel is rank deficient; ZF needs B_sc*Mt >= U*Mr");
        }
        break;
      }
      case BaselineKind::kBd: {
        // Project onto the null space of every other user's channel,
        // then eigen-beamform the surviving effective channel.
        CMat null_basis;
        if (u == 1) {
          null_basis = CMat::Identity(cols, cols);
        } else {
          CMat gt(static_cast<Eigen::Index>(u - 1) * mr, cols);
          Eigen::Index row = 0;
          for (int j = 0; j < u; ++j) {
            if (j == i) continue;
            gt.middleRows(row, mr) = detail::cluster_channel(ch, cluster, j, i);
            row += mr;
          }
          const auto svd = svd_full_v(gt);
          const double smax = svd.singularValues().size()
                                  ? svd.singularValues()(0)
                                  : 0.0;
          Eigen::Index rank = 0;
          for (Eigen::Index s = 0; s < svd.singularValues().size(); ++s)
            if (svd.singularValues()(s) > 1e-12 * std::max(1.0, smax)) ++rank;
          const Eigen::Index nullity = cols - rank;
          if (nullity < cfg.streams[i])
            throw BaselineInfeasibleError(
                "interference null space too small for BD");
          null_basis = svd.matrixV().rightCols(nullity);
        }
        const CMat h_eff =
            detail::cluster_channel(ch, cluster, i, i) * null_basis;
        pi = null_basis *
             detail::top_right_directions(h_eff, cfg.streams[i]);
        break;
      }
      case BaselineKind::kEzf: {
        // Reduce every user to its top-d eigen-directions, then zero-force
        // the reduced rows.
        Eigen::Index total_d = 0;
        for (int j = 0; j < u; ++j) total_d += cfg.streams[j];
        if (total_d > cols)
          throw BaselineInfeasibleError(
              "EZF needs B_sc*Mt >= total stream count");
        CMat ge(total_d, cols);
        Eigen::Index row = 0, own_row = 0;
        for (int j = 0; j < u; ++j) {
          const CMat a = detail::cluster_channel(ch, cluster, j, i);
          const auto es = hermitian_eig(a * a.adjoint());
          CMat u_top(mr, cfg.streams[j]);
          for (int d = 0; d < cfg.streams[j]; ++d)
            u_top.col(d) = es.eigenvectors().col(mr - 1 - d);
          if (j == i) own_row = row;
          ge.middleRows(row, cfg.streams[j]) = u_top.adjoint() * a;
          row += cfg.streams[j];
        }
        CMat rhs = CMat::Zero(total_d, cfg.streams[i]);
        rhs.middleRows(own_row, cfg.streams[i]) =
            CMat::Identity(cfg.streams[i], cfg.streams[i]);
        try {
          pi = ge.adjoint() * hpd_factor(ge * ge.adjoint()).solve(rhs);
        } catch (const NumericalError&) {
          throw BaselineInfeasibleError("reduced channel is rank deficient");
        }
        break;
      }
      case BaselineKind::kMrt:
        break;  // handled above
    }
    detail::equalize_columns(pi);
    p.user[i] = std::move(pi);
  }
  try {
    return normalize_to_manifold(cfg, cluster, p).p;
  } catch (const DegenerateRetractionError&) {
    // The closed form left some BS without transmit energy; there is no
    // way to force this shape onto the power constraints.
    throw BaselineInfeasibleError("baseline carries no power at some BS");
  }
}

}  // namespace ucn
