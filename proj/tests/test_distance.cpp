#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srgeo/distance.hpp"
#include "srgeo/manifold.hpp"

using namespace srgeo;

namespace {

Vec pt(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

Manifold man(const std::string& name) { return instantiate(builtin_manifold(name)); }

}  // namespace

TEST_CASE("euclidean shooting distance is the euclidean norm") {
  Manifold m = man("euclidean3");
  DistanceQuery q{&m.frame, pt({0, 0, 0}), pt({1.0, -2.0, 0.5}), m.box,
                  DistanceEngine::kShooting};
  DistanceResult r = distance_shooting(q, {});
  REQUIRE(r.converged);
  CHECK(r.value == doctest::Approx(pt({1.0, -2.0, 0.5}).norm()).epsilon(1e-8));
}

TEST_CASE("euclidean geodesic shot is a straight line") {
  Manifold m = man("euclidean2");
  Vec p0 = pt({0.6, 0.8});
  GeodesicArc arc = geodesic_shoot(m.frame, Vec::Zero(2), p0, 1.0, {});
  CHECK((arc.samples.col(16) - p0).norm() < 1e-9);
  CHECK(arc.hamiltonian_drift < 1e-8);
}

TEST_CASE("heisenberg horizontal shot stays straight") {
  Manifold m = man("heisenberg1");
  Vec p0 = pt({1.0, 0.0, 0.0});
  GeodesicArc arc = geodesic_shoot(m.frame, Vec::Zero(3), p0, 0.8, {});
  CHECK(std::abs(arc.samples(1, 16)) < 1e-10);
  CHECK(std::abs(arc.samples(2, 16)) < 1e-10);
  CHECK(arc.samples(0, 16) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("heisenberg geodesics with vertical covector project to circles") {
  Manifold m = man("heisenberg1");
  double lambda = 2.0;
  Vec p0 = pt({1.0, 0.0, lambda});
  GeodesicArc arc = geodesic_shoot(m.frame, Vec::Zero(3), p0, 1.5, {}, 48);
  // Projection must stay at constant distance from the circle center
  // (0, 1/lambda) with radius 1/|lambda|.
  Vec center = pt({0.0, 1.0 / lambda});
  for (int s = 0; s <= 48; ++s) {
    Vec xy = arc.samples.col(s).head(2);
    CHECK(std::abs((xy - center).norm() - 1.0 / std::abs(lambda)) < 1e-7);
  }
  CHECK(arc.hamiltonian_drift < 1e-8);
}

TEST_CASE("heisenberg planar anchor: distance 1 to (0.6, 0.8, 0)") {
  Manifold m = man("heisenberg1");
  DistanceQuery q{&m.frame, Vec::Zero(3), pt({0.6, 0.8, 0.0}), m.box,
                  DistanceEngine::kShooting};
  DistanceResult r = distance_shooting(q, {});
  REQUIRE(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("heisenberg vertical anchor: distance 2 sqrt(pi) to (0,0,1)") {
  Manifold m = man("heisenberg1");
  DistanceQuery q{&m.frame, Vec::Zero(3), pt({0.0, 0.0, 1.0}), m.box,
                  DistanceEngine::kShooting};
  DistanceResult r = distance_shooting(q, {});
  REQUIRE(r.converged);
  CHECK(r.value == doctest::Approx(2.0 * std::sqrt(M_PI)).epsilon(5e-3));
}

TEST_CASE("oracle certifies the planar anchor within 2 percent") {
  Manifold m = man("heisenberg1");
  DistanceQuery q{&m.frame, Vec::Zero(3), pt({0.6, 0.8, 0.0}), m.box,
                  DistanceEngine::kOracle};
  OracleParams op;
  op.segments = 16;
  DistanceResult r = distance_oracle(q, op);
  REQUIRE(r.converged);
  CHECK(r.upper_bound >= 1.0 - 1e-6);
  CHECK(r.upper_bound <= 1.02);
}

TEST_CASE("identical endpoints give zero") {
  Manifold m = man("heisenberg1");
  Vec x = pt({0.2, 0.1, -0.1});
  DistanceQuery q{&m.frame, x, x, m.box, DistanceEngine::kBoth};
  DistanceResult r = distance(q);
  CHECK(r.value == 0.0);
  CHECK(r.upper_bound == 0.0);
}

TEST_CASE("engines agree on random heisenberg pairs") {
  Manifold m = man("heisenberg1");
  std::vector<Vec> targets{pt({0.3, -0.2, 0.1}), pt({-0.2, 0.4, -0.05})};
  for (const Vec& y : targets) {
    DistanceQuery q{&m.frame, Vec::Zero(3), y, m.box, DistanceEngine::kBoth};
    DistanceResult r = distance(q);
    CHECK(r.converged);
    CHECK(r.cross_check_ok);
    CHECK(r.value <= r.upper_bound * 1.01 + 1e-9);
  }
}

TEST_CASE("oracle is monotone in the segment count") {
  Manifold m = man("heisenberg1");
  DistanceQuery q{&m.frame, Vec::Zero(3), pt({0.0, 0.0, 0.4}), m.box,
                  DistanceEngine::kOracle};
  OracleParams p8, p16, p32;
  p8.segments = 8;
  p16.segments = 16;
  p32.segments = 32;
  double d8 = distance_oracle(q, p8).upper_bound;
  double d16 = distance_oracle(q, p16).upper_bound;
  double d32 = distance_oracle(q, p32).upper_bound;
  CHECK(d16 <= d8 + 1e-12);
  CHECK(d32 <= d16 + 1e-12);
}

TEST_CASE("shooting symmetry") {
  Manifold m = man("heisenberg1");
  Vec a = pt({0.1, 0.2, 0.05}), b = pt({-0.2, 0.15, -0.02});
  DistanceQuery qab{&m.frame, a, b, m.box, DistanceEngine::kShooting};
  DistanceQuery qba{&m.frame, b, a, m.box, DistanceEngine::kShooting};
  DistanceResult rab = distance_shooting(qab, {});
  DistanceResult rba = distance_shooting(qba, {});
  REQUIRE(rab.converged);
  REQUIRE(rba.converged);
  CHECK(std::abs(rab.value - rba.value) < 1e-6);
}

TEST_CASE("triangle inequality on sampled triples") {
  Manifold m = man("heisenberg1");
  std::vector<Vec> pts{pt({0, 0, 0}), pt({0.3, 0.1, 0.02}), pt({-0.1, 0.25, -0.04})};
  auto d = [&](const Vec& a, const Vec& b) {
    DistanceQuery q{&m.frame, a, b, m.box, DistanceEngine::kShooting};
    DistanceResult r = distance_shooting(q, {});
    REQUIRE(r.converged);
    return r.value;
  };
  double dxy = d(pts[0], pts[1]), dyz = d(pts[1], pts[2]), dxz = d(pts[0], pts[2]);
  CHECK(dxz <= dxy + dyz + 1e-6);
}

TEST_CASE("ball boundary samples") {
  Manifold m = man("heisenberg1");
  SUBCASE("antipodal horizontal pair at mutual distance 2r") {
    auto s = ball_boundary_sample(m.frame, Vec::Zero(3), 0.1, 2, {}, &m.box);
    REQUIRE(s.size() == 2);
    DistanceQuery q{&m.frame, s[0].point, s[1].point, m.box, DistanceEngine::kShooting};
    DistanceResult r = distance_shooting(q, {});
    REQUIRE(r.converged);
    CHECK(r.value == doctest::Approx(0.2).epsilon(1e-4));
  }
  SUBCASE("endpoints lie at distance r") {
    auto s = ball_boundary_sample(m.frame, Vec::Zero(3), 0.1, 12, {}, &m.box);
    for (const auto& bs : s) {
      DistanceQuery q{&m.frame, Vec::Zero(3), bs.point, m.box, DistanceEngine::kShooting};
      DistanceResult r = distance_shooting(q, {});
      REQUIRE(r.converged);
      CHECK(std::abs(r.value - 0.1) < 1e-4);
    }
  }
  SUBCASE("euclidean endpoints on the round sphere") {
    Manifold e = man("euclidean3");
    auto s = ball_boundary_sample(e.frame, Vec::Zero(3), 0.5, 16, {}, &e.box);
    for (const auto& bs : s) CHECK(bs.point.norm() == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("diameter estimate") {
  SUBCASE("euclidean ball diameter is 2r") {
    Manifold e = man("euclidean2");
    DiameterEstimate est = diameter_estimate(e.frame, Vec::Zero(2), 0.3, 12, e.box);
    CHECK(est.value == doctest::Approx(0.6).epsilon(1e-6));
  }
  SUBCASE("heisenberg small ball diameter within the Thm 5.3 band") {
    Manifold m = man("heisenberg1");
    DiameterEstimate est = diameter_estimate(m.frame, Vec::Zero(3), 0.1, 12, m.box);
    CHECK(est.value <= 0.2 * (1.0 + 1e-3));
    CHECK(est.value >= 0.2 * 0.95);
  }
  SUBCASE("monotone in the sample count") {
    Manifold m = man("heisenberg1");
    DiameterEstimate e16 = diameter_estimate(m.frame, Vec::Zero(3), 0.1, 16, m.box);
    DiameterEstimate e8 = diameter_estimate(m.frame, Vec::Zero(3), 0.1, 8, m.box);
    CHECK(e16.value >= e8.value - 1e-9);
  }
}

TEST_CASE("heisenberg left invariance and dilation homogeneity") {
  Manifold m = man("heisenberg1");
  auto mult = [](const Vec& g, const Vec& x) {
    return pt({g[0] + x[0], g[1] + x[1], g[2] + x[2] + 0.5 * (g[0] * x[1] - g[1] * x[0])});
  };
  auto d = [&](const Vec& a, const Vec& b) {
    DistanceQuery q{&m.frame, a, b, m.box, DistanceEngine::kShooting};
    DistanceResult r = distance_shooting(q, {});
    REQUIRE(r.converged);
    return r.value;
  };
  Vec x = pt({0.2, -0.1, 0.05}), y = pt({-0.1, 0.2, -0.02});
  double dxy = d(x, y);
  for (Vec g : {pt({0.1, 0.3, -0.1}), pt({-0.3, 0.2, 0.2})})
    CHECK(std::abs(d(mult(g, x), mult(g, y)) - dxy) < 1e-4);
  std::vector<int> w{1, 1, 2};
  for (double r : {0.5, 0.25})
    CHECK(std::abs(d(dilate(x, w, r), dilate(y, w, r)) - r * dxy) < 1e-4 * r);
}

TEST_CASE("local-global chart consistency (Prop 2.12 check)") {
  Manifold m = man("heisenberg1");
  ConsistencyReport rep = local_global_consistency(m.frame, Vec::Zero(3), 0.1, m.box, 8);
  CHECK(rep.ok);
  CHECK(rep.max_discrepancy < 1e-3);
}
