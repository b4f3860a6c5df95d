#include "srgeo/vector_field.hpp"

namespace srgeo {

PolyVectorField::PolyVectorField(int n, std::vector<Polynomial> c) : dim(n), coeffs(std::move(c)) {
  if (static_cast<int>(coeffs.size()) != n) throw Error("field needs exactly dim coefficient polynomials");
  for (auto& p : coeffs)
    if (p.dim() != n) throw Error("field coefficient dimension mismatch");
}

PolyVectorField PolyVectorField::basis(int n, int axis) {
  PolyVectorField f(n);
  f.coeffs[axis] = Polynomial::constant(n, 1.0);
  return f;
}

bool PolyVectorField::is_zero() const {
  for (const auto& p : coeffs)
    if (!p.is_zero()) return false;
  return true;
}

double PolyVectorField::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& p : coeffs) m = std::max(m, p.max_abs_coeff());
  return m;
}

Vec PolyVectorField::eval(const Vec& x) const {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = coeffs[i].eval(x);
  return v;
}

Mat PolyVectorField::jacobian(const Vec& x) const {
  Mat J(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) J(i, j) = coeffs[i].derivative(j).eval(x);
  return J;
}

Polynomial PolyVectorField::apply_to(const Polynomial& f) const {
  Polynomial r(dim);
  for (int i = 0; i < dim; ++i) r += coeffs[i] * f.derivative(i);
  return r;
}

Polynomial PolyVectorField::divergence() const {
  Polynomial r(dim);
  for (int i = 0; i < dim; ++i) r += coeffs[i].derivative(i);
  return r;
}

PolyVectorField PolyVectorField::rescale(std::span<const int> weights, double r,
                                         int own_weight) const {
  PolyVectorField out(dim);
  for (int j = 0; j < dim; ++j)
    out.coeffs[j] = coeffs[j].dilate(weights, r) * std::pow(r, own_weight - weights[j]);
  return out;
}

PolyVectorField PolyVectorField::weighted_part(std::span<const int> weights,
                                               int rel_degree) const {
  PolyVectorField out(dim);
  for (int j = 0; j < dim; ++j) {
    int deg = rel_degree + weights[j];
    // weights enter as w_j - own_weight offsets handled by caller
    out.coeffs[j] = coeffs[j].weighted_part(weights, deg);
  }
  return out;
}

PolyVectorField PolyVectorField::operator+(const PolyVectorField& o) const {
  PolyVectorField r(dim);
  for (int i = 0; i < dim; ++i) r.coeffs[i] = coeffs[i] + o.coeffs[i];
  return r;
}

PolyVectorField PolyVectorField::operator-(const PolyVectorField& o) const {
  PolyVectorField r(dim);
  for (int i = 0; i < dim; ++i) r.coeffs[i] = coeffs[i] - o.coeffs[i];
  return r;
}

PolyVectorField PolyVectorField::operator*(double s) const {
  PolyVectorField r(dim);
  for (int i = 0; i < dim; ++i) r.coeffs[i] = coeffs[i] * s;
  return r;
}

PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y) {
  if (X.dim != Y.dim) throw Error("lie_bracket: dimension mismatch");
  const int n = X.dim;
  PolyVectorField r(n);
  for (int j = 0; j < n; ++j) {
    Polynomial c(n);
    for (int i = 0; i < n; ++i) {
      c += X.coeffs[i] * Y.coeffs[j].derivative(i);
      c -= Y.coeffs[i] * X.coeffs[j].derivative(i);
    }
    r.coeffs[j] = std::move(c);
  }
  return r;
}

PolyVectorField linear_combination(std::span<const PolyVectorField> fields, const Vec& c) {
  if (fields.empty()) throw Error("linear_combination of no fields");
  PolyVectorField r(fields[0].dim);
  for (size_t k = 0; k < fields.size(); ++k) {
    if (c[static_cast<Eigen::Index>(k)] == 0.0) continue;
    r = r + fields[k] * c[static_cast<Eigen::Index>(k)];
  }
  return r;
}

PolyVectorField iterated_bracket(std::span<const PolyVectorField> fields,
                                 std::span<const int> index) {
  if (index.empty()) throw Error("empty bracket multi-index");
  PolyVectorField acc = fields[index[0]];
  for (size_t k = 1; k < index.size(); ++k) acc = lie_bracket(acc, fields[index[k]]);
  return acc;
}

Mat field_matrix(std::span<const PolyVectorField> fields, const Vec& x) {
  const int n = static_cast<int>(x.size());
  Mat A(n, static_cast<Eigen::Index>(fields.size()));
  for (size_t k = 0; k < fields.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = fields[k].eval(x);
  return A;
}

}  // namespace srgeo
