#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srgeo/manifold.hpp"
#include "srgeo/nilpotent.hpp"

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

double field_gap(const PolyVectorField& a, const PolyVectorField& b) {
  return (a - b).max_abs_coeff();
}

}  // namespace

TEST_CASE("euclidean coefficient jets are the identity") {
  auto fr = frame_of("euclidean3");
  auto jets = coefficient_jets(fr, pt({0.5, -1.0, 2.0}), 2, {});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Polynomial p = jets[static_cast<size_t>(i)][static_cast<size_t>(j)].to_polynomial();
      Polynomial expect =
          i == j ? Polynomial::constant(3, 1.0) : Polynomial(3);
      CHECK((p - expect).max_abs_coeff() < 1e-11);
    }
}

TEST_CASE("heisenberg jets equal the group coefficients at any base point") {
  auto fr = frame_of("heisenberg1");
  for (Vec q : {pt({0, 0, 0}), pt({0.4, -0.2, 0.3})}) {
    auto jets = coefficient_jets(fr, q, 3, {});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Polynomial p = jets[static_cast<size_t>(i)][static_cast<size_t>(j)].to_polynomial();
        CHECK((p - fr.fields[static_cast<size_t>(i)].coeffs[static_cast<size_t>(j)])
                  .max_abs_coeff() < 1e-10);
      }
  }
}

TEST_CASE("perturbed heisenberg a23 jet has linear coefficient 1/2") {
  auto fr = frame_of("perturbed_heisenberg");
  auto jets = coefficient_jets(fr, Vec::Zero(3), 3, {});
  const Jet& a23 = jets[1][2];
  const JetContext* ctx = a23.context();
  int idx = ctx->index_of({1, 0, 0});
  REQUIRE(idx >= 0);
  CHECK(a23.coeff(idx) == doctest::Approx(0.5).epsilon(1e-8));
  // Cross-check the jet against the independent integrator route.
  Vec sample = pt({0.08, -0.05, 0.03});
  Mat C = coordinate_frame(fr, Vec::Zero(3), sample, {});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double from_jet =
          jets[static_cast<size_t>(i)][static_cast<size_t>(j)].to_polynomial().eval(sample);
      // truncation K=3 leaves O(|x|^4) remainder
      CHECK(std::abs(from_jet - C(j, i)) < 5e-5);
    }
}

TEST_CASE("nilpotent approximation of the heisenberg frame is itself") {
  auto fr = frame_of("heisenberg1");
  NilpotentFrame nf = nilpotent_approximation_at(fr, Vec::Zero(3));
  for (int i = 0; i < 3; ++i)
    CHECK(field_gap(nf.fields[static_cast<size_t>(i)], fr.fields[static_cast<size_t>(i)]) <
          1e-10);
  CHECK(nf.Q == 4);
  CHECK(nf.structure_constants[2](0, 1) == doctest::Approx(1.0));
}

TEST_CASE("perturbed heisenberg tangent group is the standard heisenberg") {
  auto fr = frame_of("perturbed_heisenberg");
  auto std_fr = frame_of("heisenberg1");
  NilpotentFrame nf = nilpotent_approximation_at(fr, Vec::Zero(3));
  for (int i = 0; i < 3; ++i)
    CHECK(field_gap(nf.fields[static_cast<size_t>(i)],
                    std_fr.fields[static_cast<size_t>(i)]) < 1e-8);
}

TEST_CASE("engel tangent group matches the hand expansion") {
  auto fr = frame_of("engel");
  NilpotentFrame nf = nilpotent_approximation_at(fr, Vec::Zero(4));
  // Frozen from the closed-form flow of x1 X1 + ... + x4 X4 from 0:
  //   F(x) = (x1, x2, x3 + x1 x2/2, x4 + x1 x2^2/6 + x2 x3 / 2)
  // pushed through dF^{-1}.
  PolyVectorField e1(4), e2(4), e3(4), e4(4);
  e1.coeffs[0] = Polynomial::constant(4, 1.0);
  e1.coeffs[2] = Polynomial::variable(4, 1) * -0.5;
  e1.coeffs[3] = Polynomial::variable(4, 1) * Polynomial::variable(4, 1) * (1.0 / 12.0);
  e2.coeffs[1] = Polynomial::constant(4, 1.0);
  e2.coeffs[2] = Polynomial::variable(4, 0) * 0.5;
  e2.coeffs[3] = Polynomial::variable(4, 2) * 0.5 +
                 Polynomial::variable(4, 0) * Polynomial::variable(4, 1) * (-1.0 / 12.0);
  e3.coeffs[2] = Polynomial::constant(4, 1.0);
  e3.coeffs[3] = Polynomial::variable(4, 1) * -0.5;
  e4.coeffs[3] = Polynomial::constant(4, 1.0);
  CHECK(field_gap(nf.fields[0], e1) < 1e-9);
  CHECK(field_gap(nf.fields[1], e2) < 1e-9);
  CHECK(field_gap(nf.fields[2], e3) < 1e-9);
  CHECK(field_gap(nf.fields[3], e4) < 1e-9);
  CHECK(nf.growth == std::vector<int>{2, 3, 4});
}

TEST_CASE("verify_stratified on the builtin tangent groups") {
  SUBCASE("heisenberg") {
    NilpotentFrame nf = nilpotent_approximation_at(frame_of("heisenberg1"), Vec::Zero(3));
    StratifiedReport rep = verify_stratified(nf, 1e-10);
    CHECK(rep.pass());
    CHECK(rep.max_residual() < 1e-10);
    CHECK(nf.structure_constants[2](0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("euclidean is abelian") {
    NilpotentFrame nf = nilpotent_approximation_at(frame_of("euclidean3"), Vec::Zero(3));
    StratifiedReport rep = verify_stratified(nf, 1e-10);
    CHECK(rep.pass());
    CHECK(nf.abelian());
  }
  SUBCASE("engel passes with step 3") {
    NilpotentFrame nf = nilpotent_approximation_at(frame_of("engel"), Vec::Zero(4));
    StratifiedReport rep = verify_stratified(nf, 1e-10);
    CHECK(rep.pass());
    CHECK(nf.step == 3);
  }
}

TEST_CASE("idempotence of the nilpotent approximation") {
  for (const char* name : {"perturbed_heisenberg", "engel"}) {
    NilpotentFrame nf = nilpotent_approximation_at(frame_of(name), Vec::Zero(
        builtin_manifold(name).dim));
    PrivilegedFrame pf = nf.as_privileged_frame();
    NilpotentFrame again = nilpotent_approximation_at(pf, pf.base_point);
    for (int i = 0; i < nf.dim(); ++i)
      CHECK(field_gap(nf.fields[static_cast<size_t>(i)],
                      again.fields[static_cast<size_t>(i)]) < 1e-10);
  }
}

TEST_CASE("remainder split has no low-order mass") {
  auto fr = frame_of("perturbed_heisenberg");
  NilpotentFrame nf = nilpotent_approximation_at(fr, pt({0.1, -0.2, 0.05}));
  CHECK(nf.split_residual < 1e-8);
}

TEST_CASE("exp of the nilpotent frame is the identity map") {
  NilpotentFrame nf =
      nilpotent_approximation_at(frame_of("perturbed_heisenberg"), Vec::Zero(3));
  PrivilegedFrame pf = nf.as_privileged_frame();
  Vec x = pt({0.4, -0.3, 0.2});
  CHECK((exp_coords(pf, Vec::Zero(3), x, {}) - x).norm() < 1e-10);
}

TEST_CASE("non-privileged jets are rejected") {
  // Externally supplied jets whose equal-weight block deviates from the
  // identity must be refused.
  std::vector<int> w{1, 1, 2};
  JetContext ctx(3, w, 3);
  std::vector<std::vector<Jet>> jets(3, std::vector<Jet>(3, Jet(&ctx)));
  for (int i = 0; i < 3; ++i) jets[static_cast<size_t>(i)][static_cast<size_t>(i)] = Jet(&ctx, 1.0);
  jets[0][1] = Jet(&ctx, 0.01);  // b_12 = 0.01 != delta_12
  CHECK_THROWS_AS(nilpotent_approximation(jets, w, Vec::Zero(3), 2), Error);
}
