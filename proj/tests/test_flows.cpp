#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srgeo/flow.hpp"
#include "srgeo/manifold.hpp"
#include "srgeo/rng.hpp"

using namespace srgeo;

namespace {

Vec pt(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

PrivilegedFrame frame_of(const std::string& name) {
  auto spec = builtin_manifold(name);
  return build_privileged_frame(spec.horizontal, MetricExtension::frame_orthonormal(),
                                Vec::Zero(spec.dim));
}

}  // namespace

TEST_CASE("flow of a constant field is a straight line") {
  auto X = parse_field_expression("d1", 3);
  Vec q = Vec::Zero(3);
  Vec p = flow(X, q, 1.0, {});
  CHECK((p - pt({1, 0, 0})).norm() < 1e-12);
}

TEST_CASE("flow reversibility") {
  auto spec = builtin_manifold("perturbed_heisenberg");
  PolyVectorField X = spec.horizontal[0] + spec.horizontal[1] * 0.7;
  Vec q = pt({0.2, -0.1, 0.3});
  Vec fwd = flow(X, q, 0.8, {});
  Vec back = flow(X, fwd, -0.8, {});
  CHECK((back - q).norm() < 1e-9);
}

TEST_CASE("flow group law") {
  auto spec = builtin_manifold("engel");
  PolyVectorField X = spec.horizontal[0] * 0.4 + spec.horizontal[1];
  Vec q = pt({0.1, 0.0, -0.2, 0.05});
  Vec oneshot = flow(X, q, 0.9, {});
  Vec twostep = flow(X, flow(X, q, 0.5, {}), 0.4, {});
  CHECK((oneshot - twostep).norm() < 1e-9);
}

TEST_CASE("heisenberg diagonal flow hits (1,1,0)") {
  auto spec = builtin_manifold("heisenberg1");
  PolyVectorField X = spec.horizontal[0] + spec.horizontal[1];
  Vec p = flow(X, Vec::Zero(3), 1.0, {});
  CHECK((p - pt({1, 1, 0})).norm() < 1e-10);
}

TEST_CASE("chart box escape raises") {
  auto X = parse_field_expression("d1", 2);
  ChartBox box = ChartBox::centered(2, 1.0);
  CHECK_THROWS_AS(flow(X, Vec::Zero(2), 5.0, {}, &box), Error);
}

TEST_CASE("exponential coordinates") {
  SUBCASE("x = 0 returns q exactly") {
    auto fr = frame_of("engel");
    Vec q = pt({0.3, 0.1, -0.2, 0.4});
    CHECK((exp_coords(fr, q, Vec::Zero(4), {}) - q).norm() == 0.0);
  }
  SUBCASE("euclidean frame translates") {
    auto fr = frame_of("euclidean3");
    Vec q = pt({1, 2, 3});
    Vec x = pt({0.5, -0.25, 0.125});
    CHECK((exp_coords(fr, q, x, {}) - (q + x)).norm() < 1e-12);
  }
  SUBCASE("heisenberg at 0 is the identity chart") {
    auto fr = frame_of("heisenberg1");
    Vec x = pt({0.4, -0.3, 0.2});
    CHECK((exp_coords(fr, Vec::Zero(3), x, {}) - x).norm() < 1e-10);
  }
}

TEST_CASE("exp_coords_inverse") {
  auto fr = frame_of("perturbed_heisenberg");
  SUBCASE("p = q gives 0") {
    Vec q = pt({0.1, 0.2, 0.0});
    CHECK(exp_coords_inverse(fr, q, q, {}).norm() < 1e-12);
  }
  SUBCASE("round trip") {
    CounterRng rng(4, 9);
    Vec q = pt({0.05, -0.1, 0.02});
    for (int k = 0; k < 5; ++k) {
      Vec x(3);
      for (int i = 0; i < 3; ++i)
        x[i] = 0.4 * rng.uniform(static_cast<std::uint64_t>(k) * 3 + i, -1.0, 1.0);
      Vec p = exp_coords(fr, q, x, {});
      Vec back = exp_coords_inverse(fr, q, p, {});
      CHECK((back - x).norm() < 1e-8);
    }
  }
  SUBCASE("heisenberg diagonal target") {
    auto h = frame_of("heisenberg1");
    Vec x = exp_coords_inverse(h, Vec::Zero(3), pt({1, 1, 0}), {});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(x[2]) < 1e-8);
  }
}

TEST_CASE("exp_coords injectivity spot check") {
  auto fr = frame_of("heisenberg1");
  Vec q = Vec::Zero(3);
  CounterRng rng(123, 6);
  for (int k = 0; k < 100; ++k) {
    Vec a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = 0.8 * rng.uniform(static_cast<std::uint64_t>(k) * 6 + i, -1.0, 1.0);
      b[i] = 0.8 * rng.uniform(static_cast<std::uint64_t>(k) * 6 + 3 + i, -1.0, 1.0);
    }
    if ((a - b).norm() < 1e-3) continue;
    CHECK((exp_coords(fr, q, a, {}) - exp_coords(fr, q, b, {})).norm() >= 1e-6);
  }
}

TEST_CASE("dilations") {
  std::vector<int> w{1, 1, 2};
  CHECK((dilate(pt({1, 1, 1}), w, 2.0) - pt({2, 2, 4})).norm() < 1e-15);
  CHECK((dilate(pt({0.3, -0.2, 0.7}), w, 1.0) - pt({0.3, -0.2, 0.7})).norm() == 0.0);
  Vec x = pt({0.5, 1.5, -2.0});
  CHECK((dilate(dilate(x, w, 0.25), w, 4.0) - x).norm() < 1e-14);
  // group law delta_r . delta_s = delta_{rs}
  CHECK((dilate(dilate(x, w, 2.0), w, 3.0) - dilate(x, w, 6.0)).norm() < 1e-12);
}

TEST_CASE("coordinate frame at the origin is the standard basis") {
  auto fr = frame_of("perturbed_heisenberg");
  Vec q = pt({0.1, -0.05, 0.2});
  Mat C = coordinate_frame(fr, q, Vec::Zero(3), {});
  CHECK((C - Mat::Identity(3, 3)).norm() < 1e-9);
}

TEST_CASE("euclidean coordinate frame is constant") {
  auto fr = frame_of("euclidean3");
  Mat C = coordinate_frame(fr, pt({1, 0, -1}), pt({0.3, 0.4, 0.1}), {});
  CHECK((C - Mat::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("heisenberg coordinate frame reproduces the group fields") {
  auto fr = frame_of("heisenberg1");
  Vec sample = pt({0.3, -0.2, 0.1});
  Mat C = coordinate_frame(fr, Vec::Zero(3), sample, {});
  Mat expected(3, 3);
  for (int i = 0; i < 3; ++i) expected.col(i) = fr.fields[static_cast<size_t>(i)].eval(sample);
  CHECK((C - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rescaled frame") {
  SUBCASE("r = 1 equals the coordinate frame") {
    auto fr = frame_of("perturbed_heisenberg");
    Vec q = Vec::Zero(3);
    Vec sample = pt({0.2, 0.1, -0.1});
    Mat a = rescaled_frame(fr, q, 1.0, sample, {});
    Mat b = coordinate_frame(fr, q, sample, {});
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("group frame is dilation invariant") {
    auto fr = frame_of("heisenberg1");
    Vec sample = pt({0.4, 0.2, 0.05});
    Mat a = rescaled_frame(fr, Vec::Zero(3), 0.3, sample, {});
    Mat b = coordinate_frame(fr, Vec::Zero(3), sample, {});
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("scaling identity X^{q,rs} = s-rescale of X^{q,r}") {
    auto fr = frame_of("perturbed_heisenberg");
    Vec q = pt({0.05, 0.05, 0.0});
    Vec sample = pt({0.3, -0.2, 0.25});
    for (double rr : {0.5, 0.25}) {
      for (double s : {0.5, 0.25}) {
        Mat lhs = rescaled_frame(fr, q, rr * s, sample, {});
        Mat inner = rescaled_frame(fr, q, rr, dilate(sample, fr.weights, s), {});
        Mat rhs(3, 3);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            rhs(j, i) = std::pow(s, fr.weights[static_cast<size_t>(i)] -
                                        fr.weights[static_cast<size_t>(j)]) *
                        inner(j, i);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }
}
