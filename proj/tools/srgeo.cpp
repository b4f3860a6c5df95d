#include <CLI11.hpp>
#include <iostream>

#include "srgeo/scenario.hpp"

namespace {

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srgeo: sub-Riemannian geometry workbench"};
  app.require_subcommand(1);

  std::string manifold, out_dir = ".", point, point2, nu, radii, epsilons, engine = "both";
  std::uint64_t seed = 0;
  bool have_seed = false, to_stdout = false, write_csv = false;
  int count = 0, pairs = 0, segments = 0, mc = 0, grid = 0, quad = 0, axis = 0;
  double r = 0.0, theta = 0.0, ball_radius = 0.0, box_scale = 0.0, grid_halfwidth = 0.0;

  const std::vector<std::string> tasks = {"flag",     "nilpotent", "distance", "ball",
                                          "blowup",   "isometry",  "factor",   "density",
                                          "area-check", "diameter"};
  std::vector<CLI::App*> subs;
  for (const auto& t : tasks) {
    CLI::App* sub = app.add_subcommand(t);
    sub->add_option("--manifold", manifold, "builtin name or spec file")->required();
    sub->add_option("--seed", seed)->each([&](const std::string&) { have_seed = true; });
    sub->add_option("--out", out_dir);
    sub->add_flag("--json", to_stdout, "print the report to stdout");
    sub->add_flag("--csv", write_csv, "write the CSV series");
    sub->add_option("--point", point, "comma-separated coordinates");
    sub->add_option("--point2", point2);
    sub->add_option("--nu", nu);
    sub->add_option("--radii", radii, "comma-separated radii");
    sub->add_option("--epsilons", epsilons);
    sub->add_option("--engine", engine);
    sub->add_option("--count", count);
    sub->add_option("--pairs", pairs);
    sub->add_option("--segments", segments);
    sub->add_option("--mc", mc);
    sub->add_option("--grid", grid);
    sub->add_option("--quad", quad);
    sub->add_option("--axis", axis);
    sub->add_option("--r", r);
    sub->add_option("--theta", theta, "frame rotation, degrees");
    sub->add_option("--ball-radius", ball_radius);
    sub->add_option("--box-scale", box_scale);
    sub->add_option("--grid-halfwidth", grid_halfwidth);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  srgeo::ScenarioConfig cfg;
  cfg.task = app.get_subcommands().front()->get_name();
  cfg.manifold = manifold;
  cfg.out_dir = out_dir;
  cfg.write_csv = write_csv;
  if (have_seed) cfg.seed = seed;

  srgeo::Json p = srgeo::Json::object();
  auto point_json = [](const std::string& s) {
    srgeo::Json a = srgeo::Json::array();
    for (double v : parse_list(s)) a.push_back(v);
    return a;
  };
  if (!point.empty()) p["point"] = point_json(point);
  if (!point2.empty()) p["point2"] = point_json(point2);
  if (!nu.empty()) p["nu"] = point_json(nu);
  if (!radii.empty()) p["radii"] = point_json(radii);
  if (!epsilons.empty()) p["epsilons"] = point_json(epsilons);
  if (engine != "both") p["engine"] = engine;
  if (count > 0) p["count"] = count;
  if (pairs > 0) p["pairs"] = pairs;
  if (segments > 0) p["segments"] = segments;
  if (mc > 0) p["mc"] = mc;
  if (grid > 0) p["grid"] = grid;
  if (quad > 0) p["quad"] = quad;
  if (axis > 0) p["axis"] = axis;
  if (r > 0) p["r"] = r;
  if (theta != 0.0) p["theta_degrees"] = theta;
  if (ball_radius > 0) p["ball_radius"] = ball_radius;
  if (box_scale > 0) p["box_scale"] = box_scale;
  if (grid_halfwidth > 0) p["grid_halfwidth"] = grid_halfwidth;
  cfg.params = p;

  srgeo::ScenarioOutcome outcome = srgeo::run_scenario(cfg);
  if (to_stdout) std::cout << srgeo::report_to_string(outcome.report);
  if (outcome.exit_code == 1 && outcome.report.contains("error"))
    std::cerr << "error: " << outcome.report["error"].get<std::string>() << "\n"
              << "usage: srgeo <task> --manifold <name|path> [--seed N] [--radii a,b,c]"
                 " [--point x,y,...] [--out dir] [--json] [--csv]\n";
  return outcome.exit_code;
}
