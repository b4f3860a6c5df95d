#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "srgeo/common.hpp"

namespace srgeo {

// Exponent multi-index of a monomial; size equals the ambient dimension.
using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& a) {
  int d = 0;
  for (int e : a) d += e;
  return d;
}

inline int weighted_degree(const MultiIndex& a, std::span<const int> w) {
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += a[i] * w[i];
  return d;
}

// Sparse multivariate polynomial over R with float64 coefficients.
// Zero polynomials have an empty coefficient map; exact-zero coefficients
// are never stored.
class Polynomial {
 public:
  Polynomial() : dim_(0) {}
  explicit Polynomial(int dim) : dim_(dim) {}

  static Polynomial constant(int dim, double c);
  static Polynomial variable(int dim, int axis);

  int dim() const { return dim_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<MultiIndex, double>& terms() const { return terms_; }

  double coeff(const MultiIndex& a) const;
  void add_term(const MultiIndex& a, double c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator-() const { return *this * -1.0; }

  // d/dx_axis, exact.
  Polynomial derivative(int axis) const;

  int degree() const;
  // Largest weighted monomial degree, -1 for the zero polynomial.
  int weighted_degree(std::span<const int> w) const;
  // Sum of the monomials of exact weighted degree deg.
  Polynomial weighted_part(std::span<const int> w, int deg) const;
  Polynomial weighted_truncate(std::span<const int> w, int max_deg) const;
  // Exact substitution x_i -> r^{w_i} x_i.
  Polynomial dilate(std::span<const int> w, double r) const;

  double max_abs_coeff() const;

  // Evaluation; T needs construction from double, +=, *, *=.
  template <typename T>
  T eval(std::span<const T> x) const {
    T acc(0.0);
    for (const auto& [a, c] : terms_) {
      T term(c);
      for (int i = 0; i < dim_; ++i)
        for (int e = 0; e < a[i]; ++e) term = term * x[i];
      acc += term;
    }
    return acc;
  }

  double eval(const Vec& x) const;

  // Renders in the manifold-spec grammar, e.g. "1 - 0.5*x2^2".
  std::string to_string() const;

  bool operator==(const Polynomial& o) const {
    return dim_ == o.dim_ && terms_ == o.terms_;
  }

 private:
  int dim_;
  std::map<MultiIndex, double> terms_;
};

std::string format_number(double v);

}  // namespace srgeo
