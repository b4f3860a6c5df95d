#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "srgeo/scenario.hpp"

using namespace srgeo;

TEST_CASE("field expression grammar") {
  PolyVectorField f = parse_field_expression("d1 - 0.5*x2*d3", 3);
  CHECK(f.coeffs[0].coeff({0, 0, 0}) == doctest::Approx(1.0));
  CHECK(f.coeffs[2].coeff({0, 1, 0}) == doctest::Approx(-0.5));
  PolyVectorField g = parse_field_expression("d2 + (0.5*x1 + x1^2)*d3", 3);
  CHECK(g.coeffs[2].coeff({1, 0, 0}) == doctest::Approx(0.5));
  CHECK(g.coeffs[2].coeff({2, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("parser errors carry position") {
  CHECK_THROWS_AS(parse_field_expression("d1 + x9*d2", 3), ParseError);
  CHECK_THROWS_AS(parse_field_expression("d1*d2", 3), ParseError);
  CHECK_THROWS_AS(parse_field_expression("x1 + 2", 3), ParseError);  // no direction
  CHECK_THROWS_AS(parse_field_expression("d1 + ", 3), ParseError);
  try {
    parse_field_expression("d1 + $", 3, 7);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line == 7);
    CHECK(e.column > 0);
  }
}

TEST_CASE("empty horizontal list is rejected") {
  CHECK_THROWS_WITH_AS(parse_manifold_spec("name = t\ndim = 3\n"),
                       doctest::Contains("at least one horizontal field"), Error);
}

TEST_CASE("builtin library") {
  ManifoldSpec h = builtin_manifold("heisenberg1");
  CHECK(h.dim == 3);
  CHECK(h.horizontal.size() == 2);
  ManifoldSpec e = builtin_manifold("euclidean(3)");
  CHECK(e.dim == 3);
  CHECK(e.horizontal.size() == 3);
  CHECK_THROWS_AS(builtin_manifold("torus"), Error);
}

TEST_CASE("spec emission round-trips for every builtin") {
  for (const auto& name : builtin_names()) {
    ManifoldSpec spec = builtin_manifold(name);
    ManifoldSpec back = parse_manifold_spec(emit_manifold_spec(spec));
    CHECK(back == spec);
    CHECK(spec_hash(back) == spec_hash(spec));
  }
}

TEST_CASE("json mirror input") {
  std::string json = R"({
    "name": "h1",
    "dim": 3,
    "chart_box": [[-2,2],[-2,2],[-2,2]],
    "horizontal": ["d1 - 0.5*x2*d3", "d2 + 0.5*x1*d3"],
    "r_max": 0.5
  })";
  ManifoldSpec spec = parse_manifold_spec(json);
  CHECK(spec.dim == 3);
  CHECK(spec.horizontal[0] == builtin_manifold("heisenberg1").horizontal[0]);
}

TEST_CASE("spec hash tracks the chart box") {
  ManifoldSpec a = builtin_manifold("heisenberg1");
  ManifoldSpec b = a;
  b.chart_box.hi[0] = 3.0;
  CHECK(spec_hash(a) != spec_hash(b));
}

TEST_CASE("flag scenario on heisenberg") {
  ScenarioConfig cfg;
  cfg.manifold = "heisenberg1";
  cfg.task = "flag";
  cfg.out_dir = "dsl_test_out";
  ScenarioOutcome out = run_scenario(cfg);
  CHECK(out.exit_code == 0);
  CHECK(out.report["results"]["growth"] == Json::array({2, 3}));
  CHECK(out.report["results"]["step"] == 2);
  CHECK(out.report["results"]["Q"] == 4);
  CHECK(out.report["verdict"] == "pass");
  CHECK(out.report["runtime_ms"] == 0);
}

TEST_CASE("unknown task exits 1") {
  ScenarioConfig cfg;
  cfg.manifold = "heisenberg1";
  cfg.task = "explode";
  cfg.write_json = false;
  ScenarioOutcome out = run_scenario(cfg);
  CHECK(out.exit_code == 1);
}

TEST_CASE("seed is mandatory for sampling tasks") {
  ScenarioConfig cfg;
  cfg.manifold = "euclidean2";
  cfg.task = "factor";
  cfg.write_json = false;
  ScenarioOutcome out = run_scenario(cfg);
  CHECK(out.exit_code == 1);
  CHECK(out.report.contains("error"));
}

TEST_CASE("reports are byte-identical across reruns and thread counts") {
  ScenarioConfig cfg;
  cfg.manifold = "euclidean2";
  cfg.task = "factor";
  cfg.seed = 42;
  cfg.params = Json::object();
  cfg.params["mc"] = 20000;
  cfg.write_json = false;

  setenv("SRGEO_THREADS", "1", 1);
  std::string a = report_to_string(run_scenario(cfg).report);
  std::string b = report_to_string(run_scenario(cfg).report);
  setenv("SRGEO_THREADS", "3", 1);
  std::string c = report_to_string(run_scenario(cfg).report);
  unsetenv("SRGEO_THREADS");
  CHECK(a == b);
  CHECK(a == c);
}
