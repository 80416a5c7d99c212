#include <catch2/catch_amalgamated.hpp>

#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

using namespace ucn;
using ucn::testing::Instance;
using ucn::testing::make_instance;
using ucn::testing::random_point;
using ucn::testing::random_tangent;

namespace {

double rel_feasibility(const Instance& inst, const Precoder& p) {
  const RVec res = feasibility_residual(inst.cfg, inst.cluster, p);
  double worst = 0.0;
  for (int k = 0; k < inst.cluster.num_bs(); ++k)
    worst = std::max(worst, std::abs(res[k]) / inst.cfg.bs_power[k]);
  return worst;
}

double max_tangency(const Instance& inst, const Precoder& p,
                    const TangentVector& xi) {
  return tangency_residual(inst.cfg, inst.cluster, p, xi)
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("metric") {
  const Instance inst = make_instance(1, 3, 4, 3, 2, 2, 2);
  const BlockStack xi = random_ambient(inst.cfg, inst.cluster, 10);
  const BlockStack zeta = random_ambient(inst.cfg, inst.cluster, 11);
  const BlockStack chi = random_ambient(inst.cfg, inst.cluster, 12);

  SECTION("metric(xi, xi) is the squared Frobenius norm") {
    REQUIRE(metric(xi, xi) == Catch::Approx(squared_norm(xi)).epsilon(1e-12));
  }
  SECTION("symmetry") {
    REQUIRE(metric(xi, zeta) == Catch::Approx(metric(zeta, xi)).epsilon(1e-12));
  }
  SECTION("real bilinearity") {
    for (auto [a, b] : {std::pair{0.7, -2.5}, {1.0, 3.0}, {-0.3, 0.0}}) {
      const double lhs = metric(a * xi + b * zeta, chi);
      const double rhs = a * metric(xi, chi) + b * metric(zeta, chi);
      REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10).margin(1e-12));
    }
  }
  SECTION("shape mismatch raises") {
    BlockStack bad = xi;
    bad.user[0].resize(1, 1);
    REQUIRE_THROWS_AS(metric(bad, zeta), DimensionError);
  }
}

TEST_CASE("feasibility residual") {
  const Instance inst = make_instance(2, 3, 4, 3, 2, 2, 2);
  const Precoder p = random_point(inst, 20);

  SECTION("vanishes on the manifold") { REQUIRE(rel_feasibility(inst, p) <= 1e-9); }

  SECTION("doubling the point leaves 3 P_k") {
    const RVec res = feasibility_residual(inst.cfg, inst.cluster, 2.0 * p);
    for (int k = 0; k < 3; ++k) {
      if (inst.cluster.served[k].empty()) continue;
      REQUIRE(res[k] ==
              Catch::Approx(3.0 * inst.cfg.bs_power[k]).epsilon(1e-9));
    }
  }

  SECTION("any retraction lands back on the manifold") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const BlockStack xi = random_ambient(inst.cfg, inst.cluster, 100 + s);
      const Precoder q = retract(inst.cfg, inst.cluster, p, xi).p;
      REQUIRE(rel_feasibility(inst, q) <= 1e-9);
    }
  }
}

TEST_CASE("tangency residual") {
  const Instance inst = make_instance(3, 3, 4, 3, 2, 2, 2);
  const Precoder p = random_point(inst, 30);

  SECTION("zero vector is tangent") {
    REQUIRE(max_tangency(inst, p, zeros_like(p)) == 0.0);
  }
  SECTION("the point itself has residual 2 P_k") {
    const RVec res = tangency_residual(inst.cfg, inst.cluster, p, p);
    for (int k = 0; k < 3; ++k) {
      if (inst.cluster.served[k].empty()) continue;
      REQUIRE(res[k] ==
              Catch::Approx(2.0 * inst.cfg.bs_power[k]).epsilon(1e-9));
    }
  }
  SECTION("projections are tangent") {
    for (std::uint64_t s = 0; s < 20; ++s)
      REQUIRE(max_tangency(inst, p, random_tangent(inst, p, 200 + s)) <= 1e-9);
  }
}

TEST_CASE("tangent projection") {
  const Instance inst = make_instance(4, 3, 4, 3, 2, 2, 2);
  const Precoder p = random_point(inst, 40);

  SECTION("idempotence on tangent inputs") {
    const TangentVector xi = random_tangent(inst, p, 41);
    const TangentVector again =
        project_tangent(inst.cfg, inst.cluster, p, xi).xi;
    for (int i = 0; i < 4; ++i)
      REQUIRE((again.user[i] - xi.user[i]).norm() <=
              1e-12 * std::max(1.0, xi.user[i].norm()));
  }

  SECTION("normal-space elements project to zero with mu = c") {
    const double c = 1.7;
    const auto res = project_tangent(inst.cfg, inst.cluster, p, c * p);
    REQUIRE(squared_norm(res.xi) <= 1e-18 * squared_norm(p));
    for (int k = 0; k < 3; ++k)
      if (!inst.cluster.served[k].empty())
        REQUIRE(res.mu[k] == Catch::Approx(c).epsilon(1e-10));
  }

  SECTION("the decomposition is metric-orthogonal") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const BlockStack xi = random_ambient(inst.cfg, inst.cluster, 300 + s);
      const TangentVector t = project_tangent(inst.cfg, inst.cluster, p, xi).xi;
      const BlockStack n = xi - t;
      REQUIRE(std::abs(metric(t, n)) <= 1e-9 * squared_norm(xi));
    }
  }

  SECTION("zero power budget with served users raises") {
    NetworkConfig broken = inst.cfg;
    broken.bs_power.setZero();
    REQUIRE_THROWS_AS(
        project_tangent(broken, inst.cluster, p,
                        random_ambient(inst.cfg, inst.cluster, 1)),
        ConfigError);
  }
}

TEST_CASE("retraction") {
  const Instance inst = make_instance(5, 3, 4, 3, 2, 2, 2);
  const Precoder p = random_point(inst, 50);

  SECTION("zero step is the identity with unit scales") {
    const auto res = retract(inst.cfg, inst.cluster, p, zeros_like(p));
    for (int k = 0; k < 3; ++k)
      if (!inst.cluster.served[k].empty())
        REQUIRE(res.gamma[k] == Catch::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 4; ++i)
      REQUIRE((res.p.user[i] - p.user[i]).norm() <= 1e-12 * p.user[i].norm());
  }

  SECTION("scalar hand case: gamma = 1/2") {
    // B = U = Mt = d = 1, P1 = sqrt(P), xi = sqrt(P).
    const double power = 2.25;
    NetworkConfig cfg = NetworkConfig::uniform(1, 1, 1, 1, 1, power, 0.1, 1);
    const ClusterMap cluster = ClusterMap::full_network(1, 1);
    Precoder sp;
    sp.user = {CMat::Constant(1, 1, std::sqrt(power))};
    TangentVector sx;
    sx.user = {CMat::Constant(1, 1, std::sqrt(power))};
    const auto res = retract(cfg, cluster, sp, sx);
    REQUIRE(res.gamma[0] == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(res.p.user[0](0, 0).real() ==
            Catch::Approx(std::sqrt(power)).epsilon(1e-12));
  }

  SECTION("output power matches the budget to 1e-12 relative") {
    const Instance wide = make_instance(6, 3, 4, 3, 2, 2, 2);
    const Precoder q = random_point(wide, 60);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const BlockStack xi = random_ambient(wide.cfg, wide.cluster, 400 + s);
      const Precoder out = retract(wide.cfg, wide.cluster, q, xi).p;
      const RVec power = per_bs_power(out, wide.cluster, wide.cfg.mt);
      for (int k = 0; k < 3; ++k) {
        if (wide.cluster.served[k].empty()) continue;
        REQUIRE(power[k] ==
                Catch::Approx(wide.cfg.bs_power[k]).epsilon(1e-12));
      }
    }
  }

  SECTION("degenerate candidate raises") {
    REQUIRE_THROWS_AS(retract(inst.cfg, inst.cluster, p, -p),
                      DegenerateRetractionError);
  }

  SECTION("first-order rigidity: |R(t xi) - (p + t xi)| <= C t^2") {
    const TangentVector xi = random_tangent(inst, p, 51);
    std::vector<double> cs;
    for (double t : {1e-3, 1e-4, 1e-5}) {
      const Precoder r = retract(inst.cfg, inst.cluster, p, t * xi).p;
      const BlockStack lin = p + t * xi;
      double diff = 0.0;
      for (int i = 0; i < 4; ++i)
        diff += (r.user[i] - lin.user[i]).squaredNorm();
      cs.push_back(std::sqrt(diff) / (t * t));
    }
    const double cmax = *std::max_element(cs.begin(), cs.end());
    const double cmin = *std::min_element(cs.begin(), cs.end());
    REQUIRE(cmax / cmin <= 1.05);
  }
}

TEST_CASE("vector transport") {
  const Instance inst = make_instance(7, 3, 4, 3, 2, 2, 2);
  const Precoder p = random_point(inst, 70);

  SECTION("transport to the same point reduces to projection") {
    const TangentVector xi = random_tangent(inst, p, 71);
    const TangentVector moved = transport(inst.cfg, inst.cluster, p, xi).xi;
    for (int i = 0; i < 4; ++i)
      REQUIRE((moved.user[i] - xi.user[i]).norm() <=
              1e-12 * std::max(1.0, xi.user[i].norm()));
  }

  SECTION("zero transports to zero") {
    const TangentVector z = zeros_like(p);
    REQUIRE(squared_norm(transport(inst.cfg, inst.cluster, p, z).xi) == 0.0);
  }

  SECTION("results are tangent at the destination") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const TangentVector xi = random_tangent(inst, p, 500 + s);
      const TangentVector eta = random_tangent(inst, p, 600 + s);
      const Precoder p_new = retract(inst.cfg, inst.cluster, p, eta).p;
      const TangentVector moved =
          transport(inst.cfg, inst.cluster, p_new, xi).xi;
      REQUIRE(max_tangency(inst, p_new, moved) <= 1e-9);
    }
  }
}

TEST_CASE("random manifold points") {
  const Instance inst = make_instance(8, 3, 4, 3, 2, 2, 2);
  const Precoder a = random_on_manifold(inst.cfg, inst.cluster, 80);
  const Precoder b = random_on_manifold(inst.cfg, inst.cluster, 80);
  const Precoder c = random_on_manifold(inst.cfg, inst.cluster, 81);

  REQUIRE(rel_feasibility(inst, a) <= 1e-9);
  bool identical = true, differs = false;
  for (int i = 0; i < 4; ++i) {
    identical = identical && (a.user[i] == b.user[i]);
    differs = differs || (a.user[i] != c.user[i]);
  }
  REQUIRE(identical);
  REQUIRE(differs);
}

TEST_CASE("multipliers match the dense W/Q oracle") {
  // mu (projection), rho (transport), gamma (retraction) on instances
  // small enough to materialize the selection matrices.
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Instance inst = make_instance(seed, 4, 4, 4, 2, 2,
                                        1 + static_cast<int>(seed % 4));
    const Precoder p = random_point(inst, 1000 + seed);
    const BlockStack xi = random_ambient(inst.cfg, inst.cluster, 2000 + seed);

    const RVec mu = project_tangent(inst.cfg, inst.cluster, p, xi).mu;
    const RVec mu_dense =
        oracle::projection_multipliers(inst.cfg, inst.cluster, p, xi);
    const auto tr = transport(inst.cfg, inst.cluster, p, xi);
    const RVec rho_dense =
        oracle::transport_multipliers(inst.cfg, inst.cluster, p, xi);
    const RVec gamma = retract(inst.cfg, inst.cluster, p, xi).gamma;
    const RVec gamma_dense =
        oracle::retraction_scales(inst.cfg, inst.cluster, p, xi);

    for (int k = 0; k < inst.cluster.num_bs(); ++k) {
      REQUIRE(mu[k] == Catch::Approx(mu_dense[k]).epsilon(1e-12).margin(1e-14));
      REQUIRE(tr.rho[k] ==
              Catch::Approx(rho_dense[k]).epsilon(1e-12).margin(1e-14));
      REQUIRE(gamma[k] ==
              Catch::Approx(gamma_dense[k]).epsilon(1e-12).margin(1e-14));
    }
  }
}
