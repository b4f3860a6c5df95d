#include "srgeo/manifold.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace srgeo {

namespace {

struct Lexer {
  const std::string& s;
  size_t pos = 0;
  int line;
  explicit Lexer(const std::string& text, int line_no) : s(text), line(line_no) {}

  int col() const { return static_cast<int>(pos) + 1; }
  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  char get() {
    skip_ws();
    return pos < s.size() ? s[pos++] : '\0';
  }
  bool eat(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
};

// Value of a factor/term: polynomial coefficient and at most one basis axis.
struct TermValue {
  Polynomial poly;
  int basis = -1;
};

class ExprParser {
 public:
  ExprParser(Lexer& lx, int dim) : lx_(lx), dim_(dim) {}

  std::vector<TermValue> parse_expr() {
    std::vector<TermValue> terms;
    int sign = 1;
    if (lx_.eat('+')) sign = 1;
    else if (lx_.eat('-')) sign = -1;
    terms.push_back(signed_term(sign));
    while (true) {
      char c = lx_.peek();
      if (c == '+' || c == '-') {
        lx_.get();
        terms.push_back(signed_term(c == '-' ? -1 : 1));
      } else {
        break;
      }
    }
    return terms;
  }

  void expect_end() {
    if (lx_.peek() != '\0')
      throw ParseError(std::string("unexpected character '") + lx_.peek() + "'", lx_.line,
                       lx_.col());
  }

 private:
  Lexer& lx_;
  int dim_;

  TermValue signed_term(int sign) {
    TermValue t = parse_term();
    if (sign < 0) t.poly *= -1.0;
    return t;
  }

  TermValue parse_term() {
    TermValue acc = parse_factor();
    while (lx_.peek() == '*') {
      lx_.get();
      TermValue f = parse_factor();
      if (acc.basis >= 0 && f.basis >= 0)
        throw ParseError("non-polynomial construct: product of two d<k> factors", lx_.line,
                         lx_.col());
      if (f.basis >= 0) acc.basis = f.basis;
      acc.poly = acc.poly * f.poly;
    }
    return acc;
  }

  TermValue parse_factor() {
    TermValue v = parse_atom();
    while (lx_.peek() == '^') {
      lx_.get();
      if (v.basis >= 0)
        throw ParseError("non-polynomial construct: power of d<k>", lx_.line, lx_.col());
      int col = lx_.col();
      int e = parse_int();
      if (e < 0) throw ParseError("negative exponent", lx_.line, col);
      Polynomial r = Polynomial::constant(dim_, 1.0);
      for (int i = 0; i < e; ++i) r = r * v.poly;
      v.poly = r;
    }
    return v;
  }

  int parse_int() {
    lx_.skip_ws();
    size_t start = lx_.pos;
    while (lx_.pos < lx_.s.size() && std::isdigit(static_cast<unsigned char>(lx_.s[lx_.pos])))
      ++lx_.pos;
    if (lx_.pos == start) throw ParseError("expected integer", lx_.line, lx_.col());
    return std::stoi(lx_.s.substr(start, lx_.pos - start));
  }

  TermValue parse_atom() {
    char c = lx_.peek();
    int col = lx_.col();
    if (c == '(') {
      lx_.get();
      auto terms = parse_expr();
      if (!lx_.eat(')')) throw ParseError("expected ')'", lx_.line, lx_.col());
      TermValue v{Polynomial(dim_), -1};
      for (const auto& t : terms) {
        if (t.basis >= 0)
          throw ParseError("non-polynomial construct: d<k> inside parentheses", lx_.line,
                           col);
        v.poly += t.poly;
      }
      return v;
    }
    if (c == 'x' || c == 'd') {
      lx_.get();
      int k = parse_int();
      if (k < 1 || k > dim_)
        throw ParseError(std::string("unknown ") + (c == 'x' ? "variable x" : "basis d") +
                             std::to_string(k) + " for dimension " + std::to_string(dim_),
                         lx_.line, col);
      if (c == 'x') return {Polynomial::variable(dim_, k - 1), -1};
      return {Polynomial::constant(dim_, 1.0), k - 1};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lx_.skip_ws();
      size_t start = lx_.pos;
      while (lx_.pos < lx_.s.size()) {
        char ch = lx_.s[lx_.pos];
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
          ++lx_.pos;
        } else if ((ch == 'e' || ch == 'E') && lx_.pos + 1 < lx_.s.size() &&
                   (std::isdigit(static_cast<unsigned char>(lx_.s[lx_.pos + 1])) ||
                    ((lx_.s[lx_.pos + 1] == '+' || lx_.s[lx_.pos + 1] == '-') &&
                     lx_.pos + 2 < lx_.s.size() &&
                     std::isdigit(static_cast<unsigned char>(lx_.s[lx_.pos + 2]))))) {
          lx_.pos += 2;
        } else {
          break;
        }
      }
      double val = std::stod(lx_.s.substr(start, lx_.pos - start));
      return {Polynomial::constant(dim_, val), -1};
    }
    throw ParseError(c == '\0' ? "unexpected end of expression"
                               : std::string("unexpected character '") + c + "'",
                     lx_.line, col);
  }
};

}  // namespace

PolyVectorField parse_field_expression(const std::string& text, int dim, int line_no) {
  Lexer lx(text, line_no);
  ExprParser parser(lx, dim);
  auto terms = parser.parse_expr();
  parser.expect_end();
  PolyVectorField f(dim);
  for (const auto& t : terms) {
    if (t.basis < 0)
      throw ParseError("field term has no d<k> direction", line_no, 1);
    f.coeffs[t.basis] += t.poly;
  }
  return f;
}

Polynomial parse_scalar_expression(const std::string& text, int dim, int line_no) {
  Lexer lx(text, line_no);
  ExprParser parser(lx, dim);
  auto terms = parser.parse_expr();
  parser.expect_end();
  Polynomial p(dim);
  for (const auto& t : terms) {
    if (t.basis >= 0)
      throw ParseError("d<k> not allowed in a scalar expression", line_no, 1);
    p += t.poly;
  }
  return p;
}

bool ManifoldSpec::operator==(const ManifoldSpec& o) const {
  return name == o.name && dim == o.dim && horizontal == o.horizontal &&
         chart_box.lo == o.chart_box.lo && chart_box.hi == o.chart_box.hi &&
         volume_density == o.volume_density && metric_mode == o.metric_mode &&
         metric_matrix == o.metric_matrix && r_max == o.r_max;
}

namespace {

ManifoldSpec parse_text_spec(const std::string& text) {
  ManifoldSpec spec;
  spec.dim = 0;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  struct FieldLine {
    int index;
    std::string expr;
    int line;
  };
  std::vector<FieldLine> field_lines;
  struct MetricLine {
    int i, j;
    std::string expr;
    int line;
  };
  std::vector<MetricLine> metric_lines;
  std::string volume_expr = "1";
  int volume_line = 1;
  bool have_box = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string s = raw;
    if (auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    auto trim = [](std::string& t) {
      t.erase(0, t.find_first_not_of(" \t\r"));
      auto e = t.find_last_not_of(" \t\r");
      t.erase(e == std::string::npos ? 0 : e + 1);
    };
    trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no, 1);
    std::string key = s.substr(0, eq), val = s.substr(eq + 1);
    trim(key);
    trim(val);
    if (key == "name") {
      spec.name = val;
    } else if (key == "dim") {
      spec.dim = std::stoi(val);
    } else if (key == "chart_box") {
      std::istringstream bs(val);
      std::vector<std::pair<double, double>> iv;
      std::string tok;
      while (bs >> tok) {
        double a, b;
        if (std::sscanf(tok.c_str(), "[%lf,%lf]", &a, &b) != 2)
          throw ParseError("chart_box wants intervals like [-2,2]", line_no, 1);
        iv.emplace_back(a, b);
      }
      spec.chart_box.lo = Vec(static_cast<Eigen::Index>(iv.size()));
      spec.chart_box.hi = Vec(static_cast<Eigen::Index>(iv.size()));
      for (size_t i = 0; i < iv.size(); ++i) {
        spec.chart_box.lo[static_cast<Eigen::Index>(i)] = iv[i].first;
        spec.chart_box.hi[static_cast<Eigen::Index>(i)] = iv[i].second;
      }
      have_box = true;
    } else if (key == "volume_density") {
      volume_expr = val;
      volume_line = line_no;
    } else if (key == "metric") {
      if (val == "frame-orthonormal")
        spec.metric_mode = MetricMode::kFrameOrthonormal;
      else if (val == "user-matrix")
        spec.metric_mode = MetricMode::kUserMatrix;
      else
        throw ParseError("unknown metric mode '" + val + "'", line_no, 1);
    } else if (key == "r_max") {
      spec.r_max = std::stod(val);
    } else if (key.size() > 1 && key[0] == 'X') {
      field_lines.push_back({std::stoi(key.substr(1)), val, line_no});
    } else if (key.size() > 2 && key[0] == 'G') {
      int i = key[1] - '0', j = key[2] - '0';
      metric_lines.push_back({i, j, val, line_no});
    } else {
      throw ParseError("unknown key '" + key + "'", line_no, 1);
    }
  }
  if (spec.dim <= 0) throw ParseError("missing dim", 1, 1);
  if (field_lines.empty())
    throw ParseError("at least one horizontal field required", line_no ? line_no : 1, 1);
  std::stable_sort(field_lines.begin(), field_lines.end(),
                   [](const auto& a, const auto& b) { return a.index < b.index; });
  for (size_t i = 0; i < field_lines.size(); ++i) {
    if (field_lines[i].index != static_cast<int>(i) + 1)
      throw ParseError("field indices must be consecutive X1..Xm", field_lines[i].line, 1);
  }
  for (const auto& fl : field_lines)
    spec.horizontal.push_back(parse_field_expression(fl.expr, spec.dim, fl.line));
  if (spec.metric_mode == MetricMode::kUserMatrix) {
    spec.metric_matrix.assign(static_cast<size_t>(spec.dim),
                              std::vector<Polynomial>(static_cast<size_t>(spec.dim),
                                                      Polynomial(spec.dim)));
    for (const auto& ml : metric_lines) {
      if (ml.i <= 0 || ml.i > spec.dim || ml.j <= 0 || ml.j > spec.dim)
        throw ParseError("metric entry out of range", ml.line, 1);
      Polynomial p = parse_scalar_expression(ml.expr, spec.dim, ml.line);
      spec.metric_matrix[static_cast<size_t>(ml.i - 1)][static_cast<size_t>(ml.j - 1)] = p;
      spec.metric_matrix[static_cast<size_t>(ml.j - 1)][static_cast<size_t>(ml.i - 1)] = p;
    }
  }
  spec.volume_density = parse_scalar_expression(volume_expr, spec.dim, volume_line);
  if (!have_box) spec.chart_box = ChartBox::centered(spec.dim, 2.0);
  if (static_cast<int>(spec.chart_box.lo.size()) != spec.dim)
    throw ParseError("chart_box dimension differs from dim", 1, 1);
  return spec;
}

ManifoldSpec parse_json_spec(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::ostringstream out;
  out << "name = " << j.value("name", "unnamed") << "\n";
  out << "dim = " << j.at("dim").get<int>() << "\n";
  if (j.contains("chart_box")) {
    out << "chart_box =";
    for (const auto& iv : j["chart_box"])
      out << " [" << iv[0].get<double>() << "," << iv[1].get<double>() << "]";
    out << "\n";
  }
  if (j.contains("volume_density"))
    out << "volume_density = " << j["volume_density"].get<std::string>() << "\n";
  if (j.contains("metric")) out << "metric = " << j["metric"].get<std::string>() << "\n";
  if (j.contains("r_max")) out << "r_max = " << j["r_max"].get<double>() << "\n";
  int i = 1;
  for (const auto& f : j.at("horizontal"))
    out << "X" << i++ << " = " << f.get<std::string>() << "\n";
  return parse_text_spec(out.str());
}

}  // namespace

ManifoldSpec parse_manifold_spec(const std::string& text) {
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_json_spec(text);
  return parse_text_spec(text);
}

std::string field_to_string(const PolyVectorField& f) {
  std::string out;
  for (int j = 0; j < f.dim; ++j) {
    if (f.coeffs[j].is_zero()) continue;
    for (const auto& [a, c] : f.coeffs[j].terms()) {
      double mag = std::abs(c);
      if (out.empty())
        out += c < 0 ? "-" : "";
      else
        out += c < 0 ? " - " : " + ";
      std::string mono;
      for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) continue;
        if (!mono.empty()) mono += "*";
        mono += "x" + std::to_string(i + 1);
        if (a[i] > 1) mono += "^" + std::to_string(a[i]);
      }
      if (mag != 1.0) {
        out += format_number(mag);
        out += "*";
      }
      if (!mono.empty()) {
        out += mono;
        out += "*";
      }
      out += "d" + std::to_string(j + 1);
    }
  }
  if (out.empty()) out = "0*d1";
  return out;
}

std::string emit_manifold_spec(const ManifoldSpec& spec) {
  std::ostringstream out;
  out << "name = " << spec.name << "\n";
  out << "dim = " << spec.dim << "\n";
  out << "chart_box =";
  for (int i = 0; i < spec.dim; ++i)
    out << " [" << format_number(spec.chart_box.lo[i]) << ","
        << format_number(spec.chart_box.hi[i]) << "]";
  out << "\n";
  out << "volume_density = " << spec.volume_density.to_string() << "\n";
  out << "metric = "
      << (spec.metric_mode == MetricMode::kFrameOrthonormal ? "frame-orthonormal"
                                                            : "user-matrix")
      << "\n";
  out << "r_max = " << format_number(spec.r_max) << "\n";
  for (size_t i = 0; i < spec.horizontal.size(); ++i)
    out << "X" << i + 1 << " = " << field_to_string(spec.horizontal[i]) << "\n";
  if (spec.metric_mode == MetricMode::kUserMatrix)
    for (int i = 0; i < spec.dim; ++i)
      for (int j = i; j < spec.dim; ++j)
        if (!spec.metric_matrix[static_cast<size_t>(i)][static_cast<size_t>(j)].is_zero())
          out << "G" << i + 1 << j + 1 << " = "
              << spec.metric_matrix[static_cast<size_t>(i)][static_cast<size_t>(j)].to_string()
              << "\n";
  return out.str();
}

std::string spec_hash(const ManifoldSpec& spec) {
  std::string s = emit_manifold_spec(spec);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> builtin_names() {
  return {"euclidean2", "euclidean3", "heisenberg1", "engel", "perturbed_heisenberg"};
}

ManifoldSpec builtin_manifold(const std::string& name) {
  auto make = [](const std::string& nm, int dim, std::vector<std::string> fields,
                 double half_width, double r_max) {
    std::ostringstream out;
    out << "name = " << nm << "\ndim = " << dim << "\nchart_box =";
    for (int i = 0; i < dim; ++i) out << " [" << -half_width << "," << half_width << "]";
    out << "\nr_max = " << r_max << "\n";
    for (size_t i = 0; i < fields.size(); ++i)
      out << "X" << i + 1 << " = " << fields[i] << "\n";
    return parse_manifold_spec(out.str());
  };
  std::string base = name;
  int euclid_n = 0;
  if (base.rfind("euclidean", 0) == 0) {
    std::string rest = base.substr(9);
    if (!rest.empty() && rest.front() == '(') rest = rest.substr(1, rest.size() - 2);
    euclid_n = rest.empty() ? 2 : std::stoi(rest);
    if (euclid_n < 1 || euclid_n > 6) throw Error("euclidean(n) supports 1 <= n <= 6");
    std::vector<std::string> fields;
    for (int i = 1; i <= euclid_n; ++i) fields.push_back("d" + std::to_string(i));
    return make("euclidean" + std::to_string(euclid_n), euclid_n, fields, 4.0, 1.0);
  }
  if (base == "heisenberg1")
    return make("heisenberg1", 3, {"d1 - 0.5*x2*d3", "d2 + 0.5*x1*d3"}, 2.0, 0.5);
  if (base == "engel")
    return make("engel", 4, {"d1", "d2 + x1*d3 + x3*d4"}, 2.0, 0.4);
  if (base == "perturbed_heisenberg")
    return make("perturbed_heisenberg", 3,
                {"d1 - 0.5*x2*d3", "d2 + 0.5*x1*d3 + x1^2*d3"}, 2.0, 0.4);
  throw Error("unknown builtin manifold '" + name + "'");
}

ManifoldSpec load_manifold(const std::string& name_or_path) {
  for (const auto& nm : builtin_names())
    if (name_or_path == nm) return builtin_manifold(name_or_path);
  if (name_or_path.rfind("euclidean", 0) == 0) return builtin_manifold(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw Error("manifold '" + name_or_path + "' is neither builtin nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifold_spec(ss.str());
}

Manifold instantiate(const ManifoldSpec& spec) {
  Manifold m;
  m.spec = spec;
  MetricExtension ext = spec.metric_mode == MetricMode::kUserMatrix
                            ? MetricExtension::user_matrix(spec.metric_matrix)
                            : MetricExtension::frame_orthonormal();
  m.frame = build_privileged_frame(spec.horizontal, ext, Vec::Zero(spec.dim));
  m.box = spec.chart_box;
  m.omega = VolumeForm{spec.volume_density};
  return m;
}

}  // namespace srgeo
