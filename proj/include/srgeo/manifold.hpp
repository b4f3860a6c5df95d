#pragma once

#include <string>

#include "srgeo/frame.hpp"
#include "srgeo/flow.hpp"
#include "srgeo/measure.hpp"

namespace srgeo {

// Parsed manifold definition.
struct ManifoldSpec {
  std::string name;
  int dim = 0;
  std::vector<PolyVectorField> horizontal;
  ChartBox chart_box;
  Polynomial volume_density;  // default 1
  MetricMode metric_mode = MetricMode::kFrameOrthonormal;
  std::vector<std::vector<Polynomial>> metric_matrix;  // user-matrix mode
  double r_max = 0.25;

  bool operator==(const ManifoldSpec& o) const;
};

struct ParseError : Error {
  int line, column;
  ParseError(const std::string& what, int line_, int col_)
      : Error(what + " at line " + std::to_string(line_) + ", column " +
              std::to_string(col_)),
        line(line_),
        column(col_) {}
};

// Polynomial expression in the grammar
//   expr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
//   factor := number | x<k> | d<k> | '(' expr ')' | factor '^' int.
// Field expressions carry exactly one d<k> per additive term.
PolyVectorField parse_field_expression(const std::string& text, int dim, int line_no = 1);
Polynomial parse_scalar_expression(const std::string& text, int dim, int line_no = 1);

ManifoldSpec parse_manifold_spec(const std::string& text);
std::string emit_manifold_spec(const ManifoldSpec& spec);

// FNV-1a over the canonical emission.
std::string spec_hash(const ManifoldSpec& spec);

// Builtin library: euclidean(n) / euclideanN, heisenberg1, engel,
// perturbed_heisenberg.
ManifoldSpec builtin_manifold(const std::string& name);
std::vector<std::string> builtin_names();

// Loads a builtin by name or a spec file (text or JSON mirror) by path.
ManifoldSpec load_manifold(const std::string& name_or_path);

// Runtime bundle: privileged frame built at the origin plus chart data.
struct Manifold {
  ManifoldSpec spec;
  PrivilegedFrame frame;
  ChartBox box;
  VolumeForm omega;
};

Manifold instantiate(const ManifoldSpec& spec);

std::string field_to_string(const PolyVectorField& f);

}  // namespace srgeo
