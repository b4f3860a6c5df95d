#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "srgeo/polynomial.hpp"

namespace srgeo {

// Monomial basis of the weighted-truncated Taylor algebra: all multi-indices
// alpha with sum alpha_i w_i <= order, graded-lexicographic. The product
// table caps every operation at the truncation order.
class JetContext {
 public:
  JetContext(int dim, std::vector<int> weights, int order);

  int dim() const { return dim_; }
  int order() const { return order_; }
  std::span<const int> weights() const { return weights_; }
  int size() const { return static_cast<int>(monomials_.size()); }
  const MultiIndex& monomial(int i) const { return monomials_[i]; }
  int index_of(const MultiIndex& a) const;  // -1 when beyond the order
  // Index of monomial i * monomial j, -1 when truncated away.
  int product_index(int i, int j) const { return prod_[static_cast<size_t>(i) * monomials_.size() + j]; }
  int weighted_degree_of(int i) const { return wdeg_[i]; }

 private:
  int dim_, order_;
  std::vector<int> weights_;
  std::vector<MultiIndex> monomials_;
  std::vector<int> wdeg_;
  std::unordered_map<std::uint64_t, int> lookup_;
  std::vector<int> prod_;

  static std::uint64_t pack(const MultiIndex& a);
};

// Truncated multivariate Taylor series at 0 (monomial coefficients).
class Jet {
 public:
  Jet() : ctx_(nullptr) {}
  explicit Jet(const JetContext* ctx) : ctx_(ctx), c_(Vec::Zero(ctx->size())) {}
  Jet(const JetContext* ctx, double value) : Jet(ctx) { c_[0] = value; }
  static Jet variable(const JetContext* ctx, int axis, double base_value = 0.0);

  const JetContext* context() const { return ctx_; }
  double value() const { return c_[0]; }
  double coeff(int i) const { return c_[i]; }
  double& coeff(int i) { return c_[i]; }
  const Vec& coeffs() const { return c_; }
  Vec& coeffs() { return c_; }

  Jet& operator+=(const Jet& o) { c_ += o.c_; return *this; }
  Jet& operator-=(const Jet& o) { c_ -= o.c_; return *this; }
  Jet& operator*=(double s) { c_ *= s; return *this; }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator*(const Jet& a, const Jet& b);

  double max_abs_coeff() const { return c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0; }

  // Monomials of exact weighted degree deg, as a polynomial.
  Polynomial weighted_part(int deg) const;
  Polynomial to_polynomial() const;

 private:
  const JetContext* ctx_;
  Vec c_;
};

// p evaluated on jet arguments (x must hold dim() jets).
Jet eval_on_jets(const Polynomial& p, std::span<const Jet> x);

// Taylor expansion of a polynomial around a base point, truncated by the
// context: expand p(base + x) in x.
Jet jet_of_polynomial(const Polynomial& p, const JetContext* ctx, const Vec& base);

// Inverse of a jet-valued matrix whose constant part is invertible
// (Neumann series; the non-constant part is nilpotent in the algebra).
std::vector<std::vector<Jet>> jet_matrix_inverse(const std::vector<std::vector<Jet>>& M);

}  // namespace srgeo
