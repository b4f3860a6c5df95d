#include "srgeo/polynomial.hpp"

#include <cmath>
#include <cstdio>

namespace srgeo {

Polynomial Polynomial::constant(int dim, double c) {
  Polynomial p(dim);
  p.add_term(MultiIndex(dim, 0), c);
  return p;
}

Polynomial Polynomial::variable(int dim, int axis) {
  if (axis < 0 || axis >= dim) throw Error("variable axis out of range");
  Polynomial p(dim);
  MultiIndex a(dim, 0);
  a[axis] = 1;
  p.add_term(a, 1.0);
  return p;
}

double Polynomial::coeff(const MultiIndex& a) const {
  auto it = terms_.find(a);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const MultiIndex& a, double c) {
  if (static_cast<int>(a.size()) != dim_) throw Error("multi-index dimension mismatch");
  auto it = terms_.find(a);
  if (it == terms_.end()) {
    if (c != 0.0) terms_.emplace(a, c);
  } else {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (dim_ == 0 && terms_.empty()) dim_ = o.dim_;
  if (o.dim_ != dim_) throw Error("polynomial dimension mismatch");
  for (const auto& [a, c] : o.terms_) add_term(a, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (dim_ == 0 && terms_.empty()) dim_ = o.dim_;
  if (o.dim_ != dim_) throw Error("polynomial dimension mismatch");
  for (const auto& [a, c] : o.terms_) add_term(a, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [a, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw Error("polynomial dimension mismatch");
  Polynomial r(a.dim_);
  MultiIndex m(a.dim_);
  for (const auto& [ia, ca] : a.terms_)
    for (const auto& [ib, cb] : b.terms_) {
      for (int k = 0; k < a.dim_; ++k) m[k] = ia[k] + ib[k];
      r.add_term(m, ca * cb);
    }
  return r;
}

Polynomial Polynomial::derivative(int axis) const {
  Polynomial r(dim_);
  for (const auto& [a, c] : terms_) {
    if (a[axis] == 0) continue;
    MultiIndex b = a;
    b[axis] -= 1;
    r.add_term(b, c * a[axis]);
  }
  return r;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [a, c] : terms_) d = std::max(d, total_degree(a));
  return d;
}

int Polynomial::weighted_degree(std::span<const int> w) const {
  int d = -1;
  for (const auto& [a, c] : terms_) d = std::max(d, srgeo::weighted_degree(a, w));
  return d;
}

Polynomial Polynomial::weighted_part(std::span<const int> w, int deg) const {
  Polynomial r(dim_);
  for (const auto& [a, c] : terms_)
    if (srgeo::weighted_degree(a, w) == deg) r.add_term(a, c);
  return r;
}

Polynomial Polynomial::weighted_truncate(std::span<const int> w, int max_deg) const {
  Polynomial r(dim_);
  for (const auto& [a, c] : terms_)
    if (srgeo::weighted_degree(a, w) <= max_deg) r.add_term(a, c);
  return r;
}

Polynomial Polynomial::dilate(std::span<const int> w, double r) const {
  Polynomial out(dim_);
  for (const auto& [a, c] : terms_)
    out.add_term(a, c * std::pow(r, srgeo::weighted_degree(a, w)));
  return out;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::eval(const Vec& x) const {
  double acc = 0.0;
  for (const auto& [a, c] : terms_) {
    double t = c;
    for (int i = 0; i < dim_; ++i)
      for (int e = 0; e < a[i]; ++e) t *= x[i];
    acc += t;
  }
  return acc;
}

std::string format_number(double v) {
  char buf[40];
  // Shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (const auto& [a, c] : terms_) {
    double mag = std::abs(c);
    bool neg = c < 0;
    if (s.empty())
      s += neg ? "-" : "";
    else
      s += neg ? " - " : " + ";
    std::string mono;
    for (int i = 0; i < dim_; ++i) {
      if (a[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += "x" + std::to_string(i + 1);
      if (a[i] > 1) mono += "^" + std::to_string(a[i]);
    }
    if (mono.empty())
      s += format_number(mag);
    else if (mag == 1.0)
      s += mono;
    else
      s += format_number(mag) + "*" + mono;
  }
  return s;
}

}  // namespace srgeo
