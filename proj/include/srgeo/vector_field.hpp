#pragma once

#include <span>
#include <vector>

#include "srgeo/polynomial.hpp"

namespace srgeo {

// Vector field on R^n with multivariate-polynomial coefficients.
struct PolyVectorField {
  int dim = 0;
  std::vector<Polynomial> coeffs;  // exactly dim entries

  PolyVectorField() = default;
  explicit PolyVectorField(int n) : dim(n), coeffs(n, Polynomial(n)) {}
  PolyVectorField(int n, std::vector<Polynomial> c);

  // Coordinate field d_axis.
  static PolyVectorField basis(int n, int axis);

  bool is_zero() const;
  double max_abs_coeff() const;

  Vec eval(const Vec& x) const;
  // J(i,j) = d coeffs[i] / d x_j.
  Mat jacobian(const Vec& x) const;

  template <typename T>
  void eval_into(std::span<const T> x, std::vector<T>& out) const {
    out.resize(dim, T(0.0));
    for (int i = 0; i < dim; ++i) out[i] = coeffs[i].eval(x);
  }

  // Directional derivative X(f) = sum_i X_i d_i f.
  Polynomial apply_to(const Polynomial& f) const;

  // Euclidean divergence sum_i d_i X_i.
  Polynomial divergence() const;

  // r^{own_weight} (delta_{1/r})_* X, exact on polynomials:
  // component j maps to r^{own_weight - w_j} X_j(delta_r x).
  PolyVectorField rescale(std::span<const int> weights, double r, int own_weight) const;

  PolyVectorField weighted_part(std::span<const int> weights, int rel_degree) const;

  PolyVectorField operator+(const PolyVectorField& o) const;
  PolyVectorField operator-(const PolyVectorField& o) const;
  PolyVectorField operator*(double s) const;

  bool operator==(const PolyVectorField& o) const {
    return dim == o.dim && coeffs == o.coeffs;
  }
};

PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y);

// Constant-coefficient combination sum_k c_k F_k.
PolyVectorField linear_combination(std::span<const PolyVectorField> fields, const Vec& c);

// Left-nested iterated bracket X_I = [...[[X_{i1},X_{i2}],X_{i3}],...] for a
// multi-index I over the given fields (0-based entries).
PolyVectorField iterated_bracket(std::span<const PolyVectorField> fields,
                                 std::span<const int> index);

// Matrix with columns F_k(x).
Mat field_matrix(std::span<const PolyVectorField> fields, const Vec& x);

}  // namespace srgeo
