#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ucn/block_stack.hpp"
#include "ucn/linalg.hpp"
#include "ucn/options.hpp"

namespace ucn {

/// The single source of truth for one experiment instance: dimensions,
/// powers (linear watts), weights and solver knobs.
struct NetworkConfig {
  int num_bs = 0;   // B
  int num_ut = 0;   // U
  int mt = 0;       // transmit antennas per BS
  int mr = 0;       // receive antennas per UT
  IVec streams;     // d_i per UT
  RVec bs_power;    // P_k per BS, watts
  double noise_power = 0.0;  // sigma_z^2, watts
  RVec weights;     // w_i per UT, nonnegative
  int cluster_size = 1;      // B_sc
  SolverOptions solver;
  std::uint64_t rng_seed = 1;

  // Log-distance path loss beta = (1 + dist/ref)^(-exp) over positions
  // drawn uniformly in a disc of the given radius.
  double pathloss_ref_m = 50.0;
  double pathloss_exp = 3.5;
  double area_radius_m = 500.0;

  void validate() const {
    if (num_bs < 1 || num_ut < 1 || mt < 1 || mr < 1)
      throw ConfigError("num_bs, num_ut, mt, mr must be positive");
    if (streams.size() != num_ut)
      throw ConfigError("streams must have one entry per UT");
    if (bs_power.size() != num_bs)
      throw ConfigError("bs_power must have one entry per BS");
    if (weights.size() != num_ut)
      throw ConfigError("weights must have one entry per UT");
    for (int i = 0; i < num_ut; ++i) {
      if (streams[i] < 1) throw ConfigError("stream counts must be positive");
      if (streams[i] > mr)
        throw ConfigError("d_i must not exceed the receive antenna count");
      if (static_cast<long>(streams[i]) > static_cast<long>(cluster_size) * mt)
        throw ConfigError("d_i must not exceed B_sc * M_t");
      if (weights[i] < 0.0) throw ConfigError("weights must be nonnegative");
    }
    if (weights.maxCoeff() <= 0.0)
      throw ConfigError("at least one weight must be positive");
    for (int k = 0; k < num_bs; ++k)
      if (bs_power[k] <= 0.0) throw ConfigError("BS powers must be positive");
    if (noise_power <= 0.0) throw ConfigError("noise power must be positive");
    if (cluster_size < 1 || cluster_size > num_bs)
      throw ConfigError("cluster size must satisfy 1 <= B_sc <= B");
    if (pathloss_ref_m <= 0.0 || area_radius_m <= 0.0)
      throw ConfigError("path-loss distances must be positive");
  }

  /// Uniform-parameter convenience constructor.
  static NetworkConfig uniform(int b, int u, int mt_, int mr_, int d,
                               double power, double noise, int bsc) {
    NetworkConfig c;
    c.num_bs = b;
    c.num_ut = u;
    c.mt = mt_;
    c.mr = mr_;
    c.streams = IVec::Constant(u, d);
    c.bs_power = RVec::Constant(b, power);
    c.noise_power = noise;
    c.weights = RVec::Ones(u);
    c.cluster_size = bsc;
    return c;
  }
};

/// Serving cluster B_i per UT and served group U_k per BS. `serving`
/// keeps the selection order (descending large-scale gain); `blocks`
/// holds the same indices sorted ascending and fixes the row-block
/// layout of every Precoder, so a full-size cluster map coincides
/// exactly with conventional full stacking.
struct ClusterMap {
  std::vector<std::vector<int>> serving;  // B_i, descending gain
  std::vector<std::vector<int>> blocks;   // B_i, ascending index (layout)
  std::vector<std::vector<int>> served;   // U_k, ascending index
  std::vector<std::vector<int>> slot;     // slot[i][k] in blocks[i], or -1

  int num_ut() const { return static_cast<int>(serving.size()); }
  int num_bs() const { return static_cast<int>(served.size()); }
  int cluster_size(int i) const { return static_cast<int>(serving[i].size()); }

  static ClusterMap from_serving(int num_bs,
                                 std::vector<std::vector<int>> serving_lists) {
    ClusterMap m;
    m.serving = std::move(serving_lists);
    const int u = m.num_ut();
    m.blocks.resize(u);
    m.slot.assign(u, std::vector<int>(num_bs, -1));
    m.served.assign(num_bs, {});
    for (int i = 0; i < u; ++i) {
      m.blocks[i] = m.serving[i];
      std::sort(m.blocks[i].begin(), m.blocks[i].end());
      for (std::size_t s = 0; s < m.blocks[i].size(); ++s) {
        const int k = m.blocks[i][s];
        if (k < 0 || k >= num_bs)
          throw ConfigError("serving cluster index out of range");
        if (m.slot[i][k] != -1)
          throw ConfigError("duplicate BS index in a serving cluster");
        m.slot[i][k] = static_cast<int>(s);
        m.served[k].push_back(i);
      }
      if (m.blocks[i].empty())
        throw ConfigError("every UT needs a nonempty serving cluster");
    }
    return m;
  }

  /// Conventional network: every UT served by every BS, natural order.
  static ClusterMap full_network(int num_bs, int num_ut) {
    std::vector<int> all(num_bs);
    std::iota(all.begin(), all.end(), 0);
    return from_serving(num_bs, std::vector<std::vector<int>>(num_ut, all));
  }
};

/// Channel blocks H_{i,k} (M_r x M_t) for every UT-BS pair, plus the
/// large-scale gains the clusters are ranked by.
struct ChannelSet {
  int mt = 0;
  int mr = 0;
  std::vector<std::vector<CMat>> h;  // h[i][k]
  Eigen::MatrixXd beta;              // U x B

  int num_ut() const { return static_cast<int>(h.size()); }
  int num_bs() const { return h.empty() ? 0 : static_cast<int>(h[0].size()); }
};

/// Synthetic Rayleigh channels over a log-distance path-loss model.
/// Deterministic for a fixed seed.
inline ChannelSet generate_channels(const NetworkConfig& cfg,
                                    std::uint64_t seed) {
  cfg.validate();
  Crng rng(seed);
  const int b = cfg.num_bs, u = cfg.num_ut;

  auto disc_point = [&](double radius) {
    const double rad = radius * std::sqrt(rng.uniform());
    const double ang = 2.0 * M_PI * rng.uniform();
    return std::pair<double, double>{rad * std::cos(ang), rad * std::sin(ang)};
  };

  std::vector<std::pair<double, double>> bs_pos(b), ut_pos(u);
  for (int k = 0; k < b; ++k) bs_pos[k] = disc_point(cfg.area_radius_m);
  for (int i = 0; i < u; ++i) ut_pos[i] = disc_point(cfg.area_radius_m);

  ChannelSet ch;
  ch.mt = cfg.mt;
  ch.mr = cfg.mr;
  ch.beta.resize(u, b);
  ch.h.assign(u, std::vector<CMat>(b));
  for (int i = 0; i < u; ++i) {
    for (int k = 0; k < b; ++k) {
      const double dx = ut_pos[i].first - bs_pos[k].first;
      const double dy = ut_pos[i].second - bs_pos[k].second;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double beta =
          std::pow(1.0 + dist / cfg.pathloss_ref_m, -cfg.pathloss_exp);
      ch.beta(i, k) = beta;
      ch.h[i][k] = rng.cgaussian_matrix(cfg.mr, cfg.mt, beta);
    }
  }
  return ch;
}

/// Picks, for each UT, the B_sc base stations with the best channel
/// conditions: largest large-scale gain, ties broken by squared
/// Frobenius norm and then by lowest index.
inline ClusterMap select_clusters(const ChannelSet& ch, int bsc) {
  const int b = ch.num_bs(), u = ch.num_ut();
  if (bsc < 1 || bsc > b)
    throw ConfigError("cluster size must satisfy 1 <= B_sc <= B");

  std::vector<std::vector<int>> serving(u);
  std::vector<int> order(b);
  for (int i = 0; i < u; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int ka, int kb) {
      if (ch.beta(i, ka) != ch.beta(i, kb))
        return ch.beta(i, ka) > ch.beta(i, kb);
      const double fa = ch.h[i][ka].squaredNorm();
      const double fb = ch.h[i][kb].squaredNorm();
      if (fa != fb) return fa > fb;
      return ka < kb;
    });
    serving[i].assign(order.begin(), order.begin() + bsc);
  }
  return ClusterMap::from_serving(b, serving);
}

/// Scatters a per-cluster stack into the full B*M_t-row stack (the
/// action of the selection matrix W_i). Rows of non-serving BSs are zero.
inline CMat embed(const CMat& p_i, const ClusterMap& cluster, int mt, int i) {
  const auto& blk = cluster.blocks[i];
  if (p_i.rows() != static_cast<Eigen::Index>(blk.size()) * mt)
    throw DimensionError("per-cluster stack does not match the cluster");
  CMat full = CMat::Zero(static_cast<Eigen::Index>(cluster.num_bs()) * mt,
                         p_i.cols());
  for (std::size_t s = 0; s < blk.size(); ++s)
    full.middleRows(static_cast<Eigen::Index>(blk[s]) * mt, mt) =
        stack_block(p_i, static_cast<int>(s), mt);
  return full;
}

/// Inverse of embed on conforming inputs.
inline CMat extract(const CMat& full, const ClusterMap& cluster, int mt,
                    int i) {
  if (full.rows() != static_cast<Eigen::Index>(cluster.num_bs()) * mt)
    throw DimensionError("full stack has the wrong row count");
  const auto& blk = cluster.blocks[i];
  CMat p_i(static_cast<Eigen::Index>(blk.size()) * mt, full.cols());
  for (std::size_t s = 0; s < blk.size(); ++s)
    stack_block(p_i, static_cast<int>(s), mt) =
        full.middleRows(static_cast<Eigen::Index>(blk[s]) * mt, mt);
  return p_i;
}

inline void require_conforming(const BlockStack& p, const ClusterMap& cluster,
                               int mt) {
  if (p.num_ut() != cluster.num_ut())
    throw DimensionError("block stack has the wrong user count");
  for (int i = 0; i < p.num_ut(); ++i)
    if (p.user[i].rows() !=
        static_cast<Eigen::Index>(cluster.blocks[i].size()) * mt)
      throw DimensionError("block stack rows do not match the cluster");
}

/// Transmit power drawn from each BS: component k is
/// sum_{i in U_k} tr(P_{i,k}^H P_{i,k}). BSs with an empty served group
/// report zero.
inline RVec per_bs_power(const BlockStack& p, const ClusterMap& cluster,
                         int mt) {
  require_conforming(p, cluster, mt);
  RVec power = RVec::Zero(cluster.num_bs());
  for (int k = 0; k < cluster.num_bs(); ++k)
    for (int i : cluster.served[k])
      power[k] += stack_block(p.user[i], cluster.slot[i][k], mt).squaredNorm();
  return power;
}

namespace detail {
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// Textual channel dump: header "B U Mt Mr", then one line per
/// (UT, BS, receive row) with M_t entries as "re,im" separated by
/// spaces. 17 significant digits, so save/load round-trips exactly.
inline void save_channels(std::ostream& os, const ChannelSet& ch) {
  os << ch.num_bs() << ' ' << ch.num_ut() << ' ' << ch.mt << ' ' << ch.mr
     << '\n';
  for (int i = 0; i < ch.num_ut(); ++i)
    for (int k = 0; k < ch.num_bs(); ++k)
      for (int r = 0; r < ch.mr; ++r) {
        const CMat& m = ch.h[i][k];
        for (int c = 0; c < ch.mt; ++c) {
          if (c) os << ' ';
          os << detail::fmt17(m(r, c).real()) << ','
             << detail::fmt17(m(r, c).imag());
        }
        os << '\n';
      }
}

/// Reads the save_channels format. Large-scale gains are not part of the
/// format; they are recovered as mean squared entry magnitude per block.
inline ChannelSet load_channels(std::istream& is) {
  int b = 0, u = 0, mt = 0, mr = 0;
  std::string line;
  int line_no = 1;
  if (!std::getline(is, line)) throw ParseError("missing header", line_no);
  {
    std::istringstream hs(line);
    if (!(hs >> b >> u >> mt >> mr) || b < 1 || u < 1 || mt < 1 || mr < 1)
      throw ParseError("bad header, expected 'B U Mt Mr'", line_no);
  }
  ChannelSet ch;
  ch.mt = mt;
  ch.mr = mr;
  ch.beta.resize(u, b);
  ch.h.assign(u, std::vector<CMat>(b, CMat(mr, mt)));
  for (int i = 0; i < u; ++i)
    for (int k = 0; k < b; ++k) {
      for (int r = 0; r < mr; ++r) {
        ++line_no;
        if (!std::getline(is, line))
          throw ParseError("unexpected end of channel dump", line_no);
        std::istringstream ls(line);
        std::string tok;
        for (int c = 0; c < mt; ++c) {
          if (!(ls >> tok)) throw ParseError("missing channel entry", line_no);
          const auto comma = tok.find(',');
          if (comma == std::string::npos)
            throw ParseError("channel entry is not 're,im'", line_no);
          try {
            const double re = std::stod(tok.substr(0, comma));
            const double im = std::stod(tok.substr(comma + 1));
            ch.h[i][k](r, c) = {re, im};
          } catch (const std::exception&) {
            throw ParseError("unparsable channel entry '" + tok + "'",
                             line_no);
          }
        }
      }
      ch.beta(i, k) =
          ch.h[i][k].squaredNorm() / static_cast<double>(mr * mt);
    }
  return ch;
}

}  // namespace ucn
