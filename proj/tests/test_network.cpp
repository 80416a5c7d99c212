#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

using namespace ucn;
using ucn::testing::Instance;
using ucn::testing::make_instance;

TEST_CASE("config validation rejects bad dimensions") {
  NetworkConfig cfg = NetworkConfig::uniform(2, 3, 4, 2, 2, 1.0, 0.1, 2);
  REQUIRE_NOTHROW(cfg.validate());

  SECTION("streams above receive antennas") {
    cfg.streams[1] = 3;  // > mr
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("streams above cluster transmit dimensions") {
    cfg = NetworkConfig::uniform(2, 3, 1, 2, 2, 1.0, 0.1, 1);
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);  // d=2 > B_sc*Mt=1
  }
  SECTION("nonpositive powers") {
    cfg.bs_power[0] = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("noise must be positive") {
    cfg.noise_power = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("all-zero weights") {
    cfg.weights.setZero();
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("cluster size out of range") {
    cfg.cluster_size = 3;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("channel generation is seed-deterministic and shape-correct") {
  NetworkConfig cfg = NetworkConfig::uniform(3, 4, 4, 2, 2, 1.0, 0.1, 2);
  const ChannelSet a = generate_channels(cfg, 7);
  const ChannelSet b = generate_channels(cfg, 7);
  const ChannelSet c = generate_channels(cfg, 8);

  bool identical = true;
  bool differs = false;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) {
      REQUIRE(a.h[i][k].rows() == 2);
      REQUIRE(a.h[i][k].cols() == 4);
      REQUIRE(a.h[i][k].allFinite());
      REQUIRE(a.beta(i, k) >= 0.0);
      identical = identical && (a.h[i][k] == b.h[i][k]);
      differs = differs || (a.h[i][k] != c.h[i][k]);
    }
  REQUIRE(identical);
  REQUIRE(a.beta == b.beta);
  REQUIRE(differs);
}

TEST_CASE("channel entries have the configured variance") {
  // 10^4 draws of one entry at beta = 1: sample E|h|^2 within 5% of 1.
  Crng rng(123);
  const int n = 10000;
  double acc = 0.0;
  for (int s = 0; s < n; ++s) acc += std::norm(rng.cgaussian(1.0));
  const double sample_var = acc / n;
  REQUIRE(sample_var == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("cluster selection") {
  const Instance inst = make_instance(42, 4, 3, 2, 2, 1, 2);

  SECTION("full selection serves every UT from every BS") {
    const ClusterMap full = select_clusters(inst.channels, 4);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(full.blocks[i] == std::vector<int>{0, 1, 2, 3});
      REQUIRE(full.serving[i].size() == 4);
    }
  }

  SECTION("top-1 picks the strongest gain") {
    const ClusterMap one = select_clusters(inst.channels, 1);
    for (int i = 0; i < 3; ++i) {
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (inst.channels.beta(i, k) > inst.channels.beta(i, best)) best = k;
      REQUIRE(one.serving[i] == std::vector<int>{best});
    }
  }

  SECTION("serving lists are sorted by descending gain") {
    const ClusterMap m = select_clusters(inst.channels, 3);
    for (int i = 0; i < 3; ++i)
      for (std::size_t s = 1; s < m.serving[i].size(); ++s)
        REQUIRE(inst.channels.beta(i, m.serving[i][s - 1]) >=
                inst.channels.beta(i, m.serving[i][s]));
  }

  SECTION("duality U_k rebuilt from B_i matches") {
    for (int bsc = 1; bsc <= 4; ++bsc) {
      const ClusterMap m = select_clusters(inst.channels, bsc);
      // Exhaustive re-derivation of the served groups.
      std::vector<std::vector<int>> served(4);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k) {
          const bool in_cluster =
              std::find(m.serving[i].begin(), m.serving[i].end(), k) !=
              m.serving[i].end();
          REQUIRE(in_cluster == (m.slot[i][k] >= 0));
          if (in_cluster) served[k].push_back(i);
        }
      REQUIRE(m.served == served);
      for (int i = 0; i < 3; ++i)
        REQUIRE(static_cast<int>(m.serving[i].size()) == bsc);
    }
  }

  SECTION("out-of-range cluster size") {
    REQUIRE_THROWS_AS(select_clusters(inst.channels, 0), ConfigError);
    REQUIRE_THROWS_AS(select_clusters(inst.channels, 5), ConfigError);
  }
}

TEST_CASE("embed and extract") {
  SECTION("single placement puts the block at the serving BS") {
    const ClusterMap m = ClusterMap::from_serving(2, {{1}});
    const int mt = 3;
    const CMat p = CMat::Random(3, 2);
    const CMat full = embed(p, m, mt, 0);
    REQUIRE(full.rows() == 6);
    REQUIRE(full.topRows(3).isZero(0.0));
    REQUIRE(full.bottomRows(3) == p);
  }

  SECTION("full cluster embeds as identity stacking") {
    const ClusterMap m = ClusterMap::full_network(3, 1);
    const CMat p = CMat::Random(6, 2);
    REQUIRE(embed(p, m, 2, 0) == p);
  }

  SECTION("extract inverts embed on random instances") {
    const Instance inst = make_instance(5, 4, 3, 3, 2, 2, 2);
    for (int i = 0; i < 3; ++i) {
      const CMat p = CMat::Random(2 * 3, 2);
      REQUIRE(extract(embed(p, inst.cluster, 3, i), inst.cluster, 3, i) == p);
    }
  }

  SECTION("shape mismatch raises") {
    const ClusterMap m = ClusterMap::from_serving(2, {{1}});
    REQUIRE_THROWS_AS(embed(CMat::Random(4, 2), m, 3, 0), DimensionError);
  }
}

TEST_CASE("per-BS power") {
  const Instance inst = make_instance(11, 3, 3, 2, 2, 1, 2);
  const Precoder p = ucn::testing::random_point(inst, 99);

  SECTION("a point on the manifold draws exactly the budget") {
    const RVec power = per_bs_power(p, inst.cluster, inst.cfg.mt);
    for (int k = 0; k < 3; ++k) {
      if (inst.cluster.served[k].empty()) continue;
      REQUIRE(power[k] ==
              Catch::Approx(inst.cfg.bs_power[k]).epsilon(1e-12));
    }
  }

  SECTION("quadratic homogeneity") {
    const RVec p1 = per_bs_power(p, inst.cluster, inst.cfg.mt);
    const RVec p4 = per_bs_power(2.0 * p, inst.cluster, inst.cfg.mt);
    for (int k = 0; k < 3; ++k)
      REQUIRE(p4[k] == Catch::Approx(4.0 * p1[k]).epsilon(1e-12));
  }

  SECTION("matches the dense W/Q oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const BlockStack x = random_ambient(inst.cfg, inst.cluster, 100 + seed);
      const RVec fast = per_bs_power(x, inst.cluster, inst.cfg.mt);
      const RVec dense = oracle::per_bs_power(inst.cfg, inst.cluster, x);
      for (int k = 0; k < 3; ++k)
        REQUIRE(fast[k] == Catch::Approx(dense[k]).epsilon(1e-12));
    }
  }

  SECTION("empty served group reports zero") {
    // Two UTs, both pinned to BS 0 by construction.
    const ClusterMap m = ClusterMap::from_serving(2, {{0}, {0}});
    REQUIRE(m.served[1].empty());
    BlockStack x;
    x.user = {CMat::Random(2, 1), CMat::Random(2, 1)};
    const RVec power = per_bs_power(x, m, 2);
    REQUIRE(power[1] == 0.0);
  }
}

TEST_CASE("channel dump round-trips exactly") {
  const Instance inst = make_instance(3, 3, 2, 4, 2, 2, 2);
  std::ostringstream os;
  save_channels(os, inst.channels);

  std::istringstream is(os.str());
  const ChannelSet back = load_channels(is);
  REQUIRE(back.mt == inst.channels.mt);
  REQUIRE(back.mr == inst.channels.mr);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 3; ++k)
      REQUIRE(back.h[i][k] == inst.channels.h[i][k]);

  // A second dump of the loaded set is byte-identical.
  std::ostringstream os2;
  save_channels(os2, back);
  REQUIRE(os.str() == os2.str());
}

TEST_CASE("channel load rejects malformed input") {
  SECTION("bad header") {
    std::istringstream is("2 x 2 2\n");
    REQUIRE_THROWS_AS(load_channels(is), ParseError);
  }
  SECTION("missing entry") {
    std::istringstream is("1 1 2 1\n0.0,0.0\n");
    REQUIRE_THROWS_AS(load_channels(is), ParseError);
  }
  SECTION("entry without comma") {
    std::istringstream is("1 1 1 1\n0.5\n");
    REQUIRE_THROWS_AS(load_channels(is), ParseError);
  }
  SECTION("truncated body") {
    std::istringstream is("1 1 1 2\n0.5,0.5\n");
    try {
      load_channels(is);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      REQUIRE(e.line == 3);
    }
  }
}
