#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srgeo/frame.hpp"
#include "srgeo/manifold.hpp"
#include "srgeo/rng.hpp"

using namespace srgeo;

namespace {

PolyVectorField field(const std::string& expr, int dim) {
  return parse_field_expression(expr, dim);
}

Vec pt(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

PolyVectorField random_field(CounterRng& rng, std::uint64_t base, int dim, int deg) {
  PolyVectorField f(dim);
  std::uint64_t ctr = base;
  for (int j = 0; j < dim; ++j) {
    // a few random monomials of degree <= deg
    for (int t = 0; t < 3; ++t) {
      MultiIndex a(dim, 0);
      int d = static_cast<int>(rng.uniform(ctr++) * (deg + 1));
      for (int e = 0; e < d; ++e) a[static_cast<size_t>(rng.uniform(ctr++) * dim) % dim] += 1;
      f.coeffs[j].add_term(a, rng.uniform(ctr++, -2.0, 2.0));
    }
  }
  return f;
}

}  // namespace

TEST_CASE("polynomial arithmetic basics") {
  Polynomial x = Polynomial::variable(2, 0);
  Polynomial y = Polynomial::variable(2, 1);
  Polynomial p = x * x + 2.0 * y - Polynomial::constant(2, 3.0);
  CHECK(p.eval(pt({2.0, 1.0})) == doctest::Approx(4.0 + 2.0 - 3.0));
  CHECK(p.derivative(0).eval(pt({2.0, 1.0})) == doctest::Approx(4.0));
  CHECK(p.derivative(1).eval(pt({2.0, 5.0})) == doctest::Approx(2.0));
  Polynomial z = p - p;
  CHECK(z.is_zero());
  CHECK(z.terms().empty());
}

TEST_CASE("weighted degree bookkeeping") {
  std::vector<int> w{1, 1, 2};
  Polynomial p(3);
  p.add_term({1, 0, 0}, 2.0);  // degree 1
  p.add_term({0, 1, 1}, 1.0);  // degree 3
  p.add_term({0, 0, 2}, 4.0);  // degree 4
  CHECK(p.weighted_degree(w) == 4);
  CHECK(p.weighted_part(w, 3).coeff({0, 1, 1}) == doctest::Approx(1.0));
  CHECK(p.weighted_part(w, 3).terms().size() == 1);
  Polynomial d = p.dilate(w, 2.0);
  CHECK(d.coeff({1, 0, 0}) == doctest::Approx(4.0));
  CHECK(d.coeff({0, 1, 1}) == doctest::Approx(8.0));
}

TEST_CASE("lie bracket of the Heisenberg horizontal fields is d3") {
  auto X1 = field("d1 - 0.5*x2*d3", 3);
  auto X2 = field("d2 + 0.5*x1*d3", 3);
  PolyVectorField B = lie_bracket(X1, X2);
  CHECK(B.coeffs[0].is_zero());
  CHECK(B.coeffs[1].is_zero());
  CHECK(B.coeffs[2].coeff({0, 0, 0}) == doctest::Approx(1.0));
  CHECK(B.coeffs[2].terms().size() == 1);
}

TEST_CASE("bracket of a field with itself vanishes") {
  auto X = field("d1 + x1*x2*d2 - 3*x2^2*d3", 3);
  CHECK(lie_bracket(X, X).is_zero());
}

TEST_CASE("Engel iterated brackets") {
  auto X1 = field("d1", 4);
  auto X2 = field("d2 + x1*d3 + x3*d4", 4);
  PolyVectorField B12 = lie_bracket(X1, X2);
  CHECK(B12.coeffs[2].coeff({0, 0, 0, 0}) == doctest::Approx(1.0));
  CHECK(B12.coeffs[3].is_zero());
  PolyVectorField B122 = lie_bracket(B12, X2);
  CHECK(B122.coeffs[3].coeff({0, 0, 0, 0}) == doctest::Approx(1.0));
  CHECK(B122.coeffs[2].is_zero());
}

TEST_CASE("Jacobi identity holds exactly for random polynomial fields") {
  CounterRng rng(2024, 0);
  for (int trial = 0; trial < 10; ++trial) {
    int dim = 3;
    auto X = random_field(rng, 1000 * trial, dim, 2);
    auto Y = random_field(rng, 1000 * trial + 300, dim, 2);
    auto Z = random_field(rng, 1000 * trial + 600, dim, 2);
    PolyVectorField J = lie_bracket(X, lie_bracket(Y, Z)) +
                        lie_bracket(Y, lie_bracket(Z, X)) +
                        lie_bracket(Z, lie_bracket(X, Y));
    CHECK(J.max_abs_coeff() < 1e-10);
  }
}

TEST_CASE("bilinearity and antisymmetry of the bracket") {
  CounterRng rng(77, 1);
  auto X = random_field(rng, 0, 3, 2);
  auto Y = random_field(rng, 400, 3, 2);
  auto Z = random_field(rng, 800, 3, 2);
  PolyVectorField lhs = lie_bracket(X + Y * 2.0, Z);
  PolyVectorField rhs = lie_bracket(X, Z) + lie_bracket(Y, Z) * 2.0;
  CHECK((lhs - rhs).max_abs_coeff() < 1e-12);
  CHECK((lie_bracket(X, Y) + lie_bracket(Y, X)).max_abs_coeff() < 1e-12);
}

TEST_CASE("flag computation on the builtin manifolds") {
  auto probes = [](int n) {
    std::vector<Vec> p{Vec::Zero(n)};
    CounterRng rng(5150, 2);
    for (int k = 0; k < 20; ++k) {
      Vec q(n);
      for (int i = 0; i < n; ++i)
        q[i] = rng.uniform(static_cast<std::uint64_t>(k) * n + i, -1.0, 1.0);
      p.push_back(q);
    }
    return p;
  };

  SUBCASE("heisenberg growth (2,3)") {
    auto spec = builtin_manifold("heisenberg1");
    auto fr = compute_flag(spec.horizontal, probes(3), 6);
    CHECK(fr.growth == std::vector<int>{2, 3});
    CHECK(fr.step == 2);
    CHECK(fr.equiregular);
  }
  SUBCASE("heisenberg at the two named probes") {
    auto spec = builtin_manifold("heisenberg1");
    std::vector<Vec> two{pt({0, 0, 0}), pt({1, 1, 1})};
    auto fr = compute_flag(spec.horizontal, two, 6);
    CHECK(fr.growth == std::vector<int>{2, 3});
    CHECK(fr.equiregular);
  }
  SUBCASE("euclidean3 growth (3)") {
    auto spec = builtin_manifold("euclidean3");
    auto fr = compute_flag(spec.horizontal, probes(3), 6);
    CHECK(fr.growth == std::vector<int>{3});
    CHECK(fr.step == 1);
  }
  SUBCASE("engel growth (2,3,4)") {
    auto spec = builtin_manifold("engel");
    auto fr = compute_flag(spec.horizontal, probes(4), 6);
    CHECK(fr.growth == std::vector<int>{2, 3, 4});
    CHECK(fr.step == 3);
    CHECK(fr.equiregular);
  }
  SUBCASE("perturbed heisenberg equiregular") {
    auto spec = builtin_manifold("perturbed_heisenberg");
    auto fr = compute_flag(spec.horizontal, probes(3), 6);
    CHECK(fr.growth == std::vector<int>{2, 3});
    CHECK(fr.equiregular);
  }
  SUBCASE("Chow failure is an error naming the point") {
    // Two commuting fields in R^3 never span.
    std::vector<PolyVectorField> bad{field("d1", 3), field("d2", 3)};
    std::vector<Vec> two{pt({0, 0, 0})};
    CHECK_THROWS_WITH_AS(compute_flag(bad, two, 4),
                         doctest::Contains("Chow condition fails"), Error);
  }
}

TEST_CASE("privileged frame construction") {
  SUBCASE("heisenberg completes with the bracket, Q = 4") {
    auto spec = builtin_manifold("heisenberg1");
    auto fr = build_privileged_frame(spec.horizontal,
                                     MetricExtension::frame_orthonormal(), Vec::Zero(3));
    CHECK(fr.weights == std::vector<int>{1, 1, 2});
    CHECK(fr.Q == 4);
    CHECK(fr.fields.size() == 3);
    CHECK(fr.fields[2].coeffs[2].coeff({0, 0, 0}) == doctest::Approx(1.0));
    REQUIRE(fr.bracket_recipe.size() == 3);
    CHECK(fr.bracket_recipe[2] == std::vector<int>{0, 1});
  }
  SUBCASE("euclidean2 standard frame maps to itself, Q = 2") {
    auto spec = builtin_manifold("euclidean2");
    auto fr = build_privileged_frame(spec.horizontal,
                                     MetricExtension::frame_orthonormal(), Vec::Zero(2));
    CHECK(fr.weights == std::vector<int>{1, 1});
    CHECK(fr.Q == 2);
    CHECK(fr.fields[0] == spec.horizontal[0]);
  }
  SUBCASE("engel weights (1,1,2,3), Q = 7") {
    auto spec = builtin_manifold("engel");
    auto fr = build_privileged_frame(spec.horizontal,
                                     MetricExtension::frame_orthonormal(), Vec::Zero(4));
    CHECK(fr.weights == std::vector<int>{1, 1, 2, 3});
    CHECK(fr.Q == 7);
  }
  SUBCASE("flag spans at random probes within 1e-8") {
    auto spec = builtin_manifold("engel");
    auto fr = build_privileged_frame(spec.horizontal,
                                     MetricExtension::frame_orthonormal(), Vec::Zero(4));
    CounterRng rng(11, 3);
    for (int k = 0; k < 20; ++k) {
      Vec q(4);
      for (int i = 0; i < 4; ++i)
        q[i] = rng.uniform(static_cast<std::uint64_t>(k) * 4 + i, -1.0, 1.0);
      for (size_t nj = 0; nj < fr.growth.size(); ++nj) {
        Mat A(4, fr.growth[nj]);
        for (int c = 0; c < fr.growth[nj]; ++c) A.col(c) = fr.fields[static_cast<size_t>(c)].eval(q);
        Eigen::JacobiSVD<Mat> svd(A);
        CHECK(svd.singularValues()[fr.growth[nj] - 1] > 1e-8);
      }
    }
  }
}

TEST_CASE("metric evaluation in frame-orthonormal mode") {
  auto spec = builtin_manifold("heisenberg1");
  auto fr = build_privileged_frame(spec.horizontal, MetricExtension::frame_orthonormal(),
                                   Vec::Zero(3));
  Vec q = Vec::Zero(3);
  Vec v = fr.fields[0].eval(q);
  CHECK(evaluate_metric(fr.metric, fr, q, v, v) == doctest::Approx(1.0));
  Vec q2 = pt({0.3, -0.4, 0.2});
  Vec a = fr.fields[0].eval(q2), b = fr.fields[1].eval(q2);
  CHECK(evaluate_metric(fr.metric, fr, q2, a, b) == doctest::Approx(0.0).epsilon(1e-12));
  // d3 = X3(0), so g_0(d3, d3) = 1.
  Vec dz = pt({0, 0, 1});
  CHECK(evaluate_metric(fr.metric, fr, q, dz, dz) == doctest::Approx(1.0));
  // Orthonormality at the base point within 1e-12.
  Mat G = fr.metric_matrix(q);
  Mat A = fr.frame_matrix(q);
  CHECK((A.transpose() * G * A - Mat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("scaled extension matrix restricts to the SR metric") {
  auto spec = builtin_manifold("heisenberg1");
  auto fr = build_privileged_frame(spec.horizontal, MetricExtension::frame_orthonormal(),
                                   Vec::Zero(3));
  auto GB = scaled_extension_matrix(fr, 4.0);
  MetricExtension ext = MetricExtension::user_matrix(GB);
  CounterRng rng(99, 4);
  for (int k = 0; k < 10; ++k) {
    Vec q(3);
    for (int i = 0; i < 3; ++i)
      q[i] = rng.uniform(static_cast<std::uint64_t>(k) * 3 + i, -1.0, 1.0);
    Mat G = ext.eval(q);
    Mat H = field_matrix(fr.horizontal(), q);
    CHECK((H.transpose() * G * H - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    Vec v = fr.fields[2].eval(q);
    CHECK((v.transpose() * G * v)(0, 0) == doctest::Approx(1.0 / 16.0));
  }
}
