#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srgeo/manifold.hpp"
#include "srgeo/measure.hpp"
#include "srgeo/nilpotent.hpp"

using namespace srgeo;

namespace {

Vec pt(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

Manifold man(const std::string& name) { return instantiate(builtin_manifold(name)); }

// Closed-form Heisenberg origin distance: straight segments for z = 0,
// 2 sqrt(pi |z|) on the center, otherwise the arc angle theta in (0, 2 pi)
// solves (theta - sin theta) / (8 sin^2(theta/2)) = |z| / R^2.
double heisenberg_rho(const Vec& p) {
  double R = std::hypot(p[0], p[1]);
  double z = std::abs(p[2]);
  if (z < 1e-15) return R;
  if (R < 1e-12) return 2.0 * std::sqrt(M_PI * z);
  double target = z / (R * R);
  auto h = [](double th) {
    double s = std::sin(0.5 * th);
    return (th - std::sin(th)) / (8.0 * s * s);
  };
  double lo = 1e-9, hi = 2.0 * M_PI - 1e-9;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (h(mid) < target ? lo : hi) = mid;
  }
  double theta = 0.5 * (lo + hi);
  return theta * R / (2.0 * std::sin(0.5 * theta));
}

const GroupTangentMetric& heisenberg_metric() {
  static GroupTangentMetric* metric = [] {
    Manifold m = man("heisenberg1");
    NilpotentFrame nf = nilpotent_approximation_at(m.frame, Vec::Zero(3));
    GroupTangentMetric::Options opts;
    opts.polar_nodes = 48;
    opts.azimuth_nodes = 64;
    return new GroupTangentMetric(nf, opts);
  }();
  return *metric;
}

}  // namespace

TEST_CASE("heisenberg closed-form origin distance matches shooting") {
  Manifold m = man("heisenberg1");
  for (Vec p : {pt({0.6, 0.8, 0.0}), pt({0.0, 0.0, 0.3}), pt({0.5, -0.2, 0.2}),
                pt({-0.3, 0.1, -0.15})}) {
    DistanceQuery q{&m.frame, Vec::Zero(3), p, m.box, DistanceEngine::kShooting};
    ShootingParams sp;
    sp.attempts = 40;
    DistanceResult r = distance_shooting(q, sp);
    REQUIRE(r.converged);
    CHECK(r.value == doctest::Approx(heisenberg_rho(p)).epsilon(1e-5));
  }
}

TEST_CASE("group product polynomials reproduce the Heisenberg law") {
  const GroupTangentMetric& g = heisenberg_metric();
  Vec a = pt({0.3, -0.2, 0.1}), x = pt({-0.1, 0.4, 0.05});
  Vec prod = g.translate(a, x);
  Vec expect = pt({a[0] + x[0], a[1] + x[1],
                   a[2] + x[2] + 0.5 * (a[0] * x[1] - a[1] * x[0])});
  CHECK((prod - expect).norm() < 1e-10);
  // inverse: (-a) . (a . x) = x
  CHECK((g.translate(-a, prod) - x).norm() < 1e-10);
}

TEST_CASE("group metric table interpolates the closed form") {
  const GroupTangentMetric& g = heisenberg_metric();
  for (Vec p : {pt({0.5, 0.3, 0.1}), pt({0.1, -0.6, -0.2}), pt({-0.4, 0.0, 0.3}),
                pt({0.05, 0.02, 0.5})}) {
    CHECK(g.origin_distance(p) ==
          doctest::Approx(heisenberg_rho(p)).epsilon(4e-3));
  }
  // Left invariance through the product polynomials.
  Vec a = pt({0.2, 0.1, -0.05});
  Vec x = pt({0.3, -0.1, 0.08});
  CHECK(g.distance(a, g.translate(a, x)) ==
        doctest::Approx(g.origin_distance(x)).epsilon(1e-9));
  CHECK(g.table_error_estimate() < 5e-3);
}

TEST_CASE("volume norms") {
  Manifold e = man("euclidean3");
  CHECK(volume_norm(VolumeForm::lebesgue(3), e.frame, pt({0.3, 0.1, -0.2})) ==
        doctest::Approx(1.0));
  Manifold h = man("heisenberg1");
  for (Vec q : {pt({0, 0, 0}), pt({0.4, -0.3, 0.2})})
    CHECK(volume_norm(VolumeForm::lebesgue(3), h.frame, q) == doctest::Approx(1.0));
  VolumeForm two{Polynomial::constant(3, 2.0)};
  CHECK(volume_norm(two, h.frame, pt({0.1, 0.2, 0.0})) == doctest::Approx(2.0));
}

TEST_CASE("horizontal normals and characteristic points") {
  Manifold h = man("heisenberg1");
  SUBCASE("z = 0 is characteristic at the origin only") {
    Vec lo = pt({-1.0, -1.0}), hi = pt({1.0, 1.0});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 2, Polynomial::constant(2, 0.0), lo, hi);
    HorizontalNormal at0 = horizontal_normal(patch, h.frame, Vec::Zero(3));
    CHECK(at0.characteristic);
    HorizontalNormal off = horizontal_normal(patch, h.frame, pt({0.3, 0.2, 0.0}));
    CHECK_FALSE(off.characteristic);
    // |nu_D| = |grad_D f| / |grad f|_g cross-check: here = |(x,y)|/2 over
    // the g-norm of e3's dual... compare against the formula directly.
    double expect = 0.5 * std::hypot(0.3, 0.2) /
                    std::sqrt(1.0 + 0.25 * (0.3 * 0.3 + 0.2 * 0.2));
    CHECK(off.nu_D_norm == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("x = 0 is noncharacteristic with horizontal normal X1") {
    Vec lo = pt({-1.0, -1.0}), hi = pt({1.0, 1.0});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
    HorizontalNormal hn = horizontal_normal(patch, h.frame, Vec::Zero(3));
    CHECK_FALSE(hn.characteristic);
    CHECK(hn.nu_D_norm == doctest::Approx(1.0));
    CHECK((hn.nu_D - pt({1, 0, 0})).norm() < 1e-12);
  }
  SUBCASE("euclidean hyperplane has nu_D = nu") {
    Manifold e = man("euclidean3");
    Vec lo = pt({-1.0, -1.0}), hi = pt({1.0, 1.0});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
    HorizontalNormal hn = horizontal_normal(patch, e.frame, pt({0.0, 0.2, 0.4}));
    CHECK((hn.nu - hn.nu_D).norm() < 1e-12);
    CHECK(hn.nu_D_norm == doctest::Approx(1.0));
  }
}

TEST_CASE("surface measure") {
  SUBCASE("euclidean unit square has area 1") {
    Manifold e = man("euclidean3");
    Vec lo = pt({0.0, 0.0}), hi = pt({1.0, 1.0});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
    MeasureRegion region = MeasureRegion::box_region(e.box);
    SurfaceMeasureResult r =
        sr_surface_measure(patch, VolumeForm::lebesgue(3), e.frame, region, 24);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(r.boundary_warning);
  }
  SUBCASE("doubling the volume form doubles the measure") {
    Manifold h = man("heisenberg1");
    Vec lo = pt({-0.5, -0.5}), hi = pt({0.5, 0.5});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
    MeasureRegion region = MeasureRegion::box_region(h.box);
    double a = sr_surface_measure(patch, VolumeForm::lebesgue(3), h.frame, region, 24).value;
    double b = sr_surface_measure(patch, VolumeForm{Polynomial::constant(3, 2.0)}, h.frame,
                                  region, 24)
                   .value;
    CHECK(b == doctest::Approx(2.0 * a).epsilon(1e-10));
  }
  SUBCASE("additivity over parameter sub-boxes") {
    Manifold h = man("heisenberg1");
    MeasureRegion region = MeasureRegion::box_region(h.box);
    auto measure_piece = [&](double u0, double u1) {
      HypersurfacePatch patch = HypersurfacePatch::graph(
          3, 0, Polynomial::constant(2, 0.0), pt({u0, -0.4}), pt({u1, 0.4}));
      return sr_surface_measure(patch, VolumeForm::lebesgue(3), h.frame, region, 20).value;
    };
    double whole = measure_piece(-0.4, 0.4);
    double parts = measure_piece(-0.4, 0.0) + measure_piece(0.0, 0.4);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-8));
  }
  SUBCASE("heisenberg ball sections scale like r^{Q-1}") {
    Manifold h = man("heisenberg1");
    const GroupTangentMetric& g = heisenberg_metric();
    Vec lo = pt({-1.5, -1.5}), hi = pt({1.5, 1.5});
    HypersurfacePatch patch =
        HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
    double big =
        sr_surface_measure(patch, VolumeForm::lebesgue(3), h.frame,
                           MeasureRegion::ball(Vec::Zero(3), 0.5, g), 48)
            .value;
    double small_ball =
        sr_surface_measure(patch, VolumeForm::lebesgue(3), h.frame,
                           MeasureRegion::ball(Vec::Zero(3), 0.25, g), 48)
            .value;
    CHECK(big / small_ball == doctest::Approx(8.0).epsilon(0.05));
  }
  SUBCASE("near-characteristic patches carry almost no measure") {
    Manifold h = man("heisenberg1");
    double eps = 0.02;
    HypersurfacePatch patch = HypersurfacePatch::graph(
        3, 2, Polynomial::constant(2, 0.0), pt({-eps, -eps}), pt({eps, eps}));
    MeasureRegion region = MeasureRegion::box_region(h.box);
    double sr = sr_surface_measure(patch, VolumeForm::lebesgue(3), h.frame, region, 16).value;
    double riemannian_area = 4.0 * eps * eps;
    CHECK(sr < eps * riemannian_area);
  }
}

TEST_CASE("spherical factor in the euclidean plane is omega_1 = 2") {
  Manifold e = man("euclidean2");
  NilpotentFrame nf = nilpotent_approximation_at(e.frame, Vec::Zero(2));
  GroupTangentMetric metric(nf);
  CHECK(metric.abelian());
  SphericalFactorParams p;
  p.mc_points = 40000;
  p.coarse_points = 1000;
  p.pattern_points = 4000;
  p.seed = 9;
  SphericalFactorResult r =
      spherical_factor(metric, spherical_factor_plane_normal(e.frame, Vec::Zero(2),
                                                             pt({1.0, 0.0})),
                       p);
  CHECK(r.beta == doctest::Approx(2.0).epsilon(0.02));
  CHECK(r.standard_error < 0.05);
}

TEST_CASE("beta(nu) = beta(-nu) within 2 standard errors") {
  const GroupTangentMetric& g = heisenberg_metric();
  SphericalFactorParams p;
  p.mc_points = 30000;
  p.coarse_points = 800;
  p.pattern_points = 4000;
  p.seed = 4;
  SphericalFactorResult plus = spherical_factor(g, pt({1.0, 0.0, 0.0}), p);
  SphericalFactorResult minus = spherical_factor(g, pt({-1.0, 0.0, 0.0}), p);
  double se = std::hypot(plus.standard_error, minus.standard_error);
  CHECK(std::abs(plus.beta - minus.beta) <= 2.0 * se + 1e-12);
}

TEST_CASE("divergence identity") {
  SUBCASE("support disjoint from the domain gives zero on both sides") {
    Manifold h = man("heisenberg1");
    BumpField X;
    X.center = pt({5.0, 5.0, 5.0});
    X.radius = 1.0;
    X.Y = parse_field_expression("d1", 3);
    DivergenceCheckResult r =
        divergence_identity_check(VolumeForm::lebesgue(3), h.frame, Vec::Zero(3), 0.8, X, 24);
    CHECK(std::abs(r.volume_integral) < 1e-12);
    CHECK(std::abs(r.boundary_integral) < 1e-12);
  }
  SUBCASE("classical euclidean divergence theorem") {
    Manifold e = man("euclidean3");
    BumpField X;
    X.center = Vec::Zero(3);
    X.radius = 50.0;  // effectively smooth over the hold-all
    PolyVectorField Y(3);
    Y.coeffs[0] = Polynomial::variable(3, 0);
    X.Y = Y;
    DivergenceCheckResult r =
        divergence_identity_check(VolumeForm::lebesgue(3), e.frame, Vec::Zero(3), 0.8, X, 32);
    CHECK(r.relative_mismatch < 1e-6);
  }
  SUBCASE("heisenberg with a non-constant volume form") {
    Manifold h = man("heisenberg1");
    VolumeForm omega{Polynomial::constant(3, 1.0) +
                     Polynomial::variable(3, 0) * Polynomial::variable(3, 0) * 0.1};
    BumpField X;
    X.center = pt({0.2, 0.0, 0.1});
    X.radius = 1.6;
    PolyVectorField Y(3);
    Y.coeffs[0] = Polynomial::variable(3, 1);
    Y.coeffs[2] = Polynomial::constant(3, 0.5);
    X.Y = Y;
    DivergenceCheckResult r =
        divergence_identity_check(omega, h.frame, Vec::Zero(3), 0.8, X, 32);
    CHECK(r.relative_mismatch < 1e-3);
  }
}

TEST_CASE("extension independence of the surface measure") {
  Manifold h = man("heisenberg1");
  Vec lo = pt({-0.8, -0.8}), hi = pt({0.8, 0.8});
  HypersurfacePatch patch =
      HypersurfacePatch::graph(3, 0, Polynomial::constant(2, 0.0), lo, hi);
  MeasureRegion region = MeasureRegion::box_region(h.box);
  MetricExtension A = MetricExtension::frame_orthonormal();
  SUBCASE("identical extensions coincide") {
    ExtensionIndependenceResult r = extension_independence_check(
        patch, VolumeForm::lebesgue(3), h.frame, region, A, A, 24);
    CHECK(r.relative_discrepancy < 1e-14);
  }
  SUBCASE("vertical rescale leaves the measure unchanged") {
    MetricExtension B = MetricExtension::user_matrix(scaled_extension_matrix(h.frame, 4.0));
    ExtensionIndependenceResult r = extension_independence_check(
        patch, VolumeForm::lebesgue(3), h.frame, region, A, B, 32);
    CHECK(r.relative_discrepancy < 1e-3);
  }
}

TEST_CASE("federer density of a euclidean line is 2") {
  Manifold e = man("euclidean2");
  NilpotentFrame nf = nilpotent_approximation_at(e.frame, Vec::Zero(2));
  GroupTangentMetric metric(nf);
  HypersurfacePatch patch = HypersurfacePatch::graph(
      2, 0, Polynomial::constant(1, 0.0), pt({-1.0}), pt({1.0}));
  std::vector<double> radii{0.3, 0.2, 0.12};
  FedererParams fp;
  fp.grid = 64;
  FedererDensityResult r = federer_density(patch, VolumeForm::lebesgue(2), e.frame,
                                           Vec::Zero(2), radii, metric, fp);
  CHECK(r.value == doctest::Approx(2.0).epsilon(0.05));
  CHECK(r.value >= 0.0);
  CHECK(std::isfinite(r.value));
}

TEST_CASE("double blow-up in the flat plane") {
  Manifold e = man("euclidean2");
  HypersurfacePatch patch = HypersurfacePatch::graph(
      2, 0, Polynomial::constant(1, 0.0), pt({-1.0}), pt({1.0}));
  DoubleBlowupParams dp;
  dp.radii = {0.3, 0.2, 0.12};
  dp.factor.mc_points = 40000;
  dp.factor.coarse_points = 800;
  dp.factor.pattern_points = 4000;
  dp.factor.seed = 3;
  dp.federer.grid = 64;
  DoubleBlowupReport rep =
      double_blowup_check(patch, VolumeForm::lebesgue(2), e.frame, Vec::Zero(2), dp);
  CHECK(rep.relative_discrepancy < 0.05);
  // Scaling the volume form scales both sides linearly.
  DoubleBlowupReport rep2 = double_blowup_check(
      patch, VolumeForm{Polynomial::constant(2, 2.0)}, e.frame, Vec::Zero(2), dp);
  CHECK(rep2.rhs == doctest::Approx(2.0 * rep.rhs).epsilon(1e-9));
  CHECK(rep2.federer == doctest::Approx(2.0 * rep.federer).epsilon(1e-9));
}
