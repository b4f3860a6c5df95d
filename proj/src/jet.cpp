#include "srgeo/jet.hpp"

#include <algorithm>

namespace srgeo {

std::uint64_t JetContext::pack(const MultiIndex& a) {
  std::uint64_t key = 0;
  for (int e : a) key = key * 64 + static_cast<std::uint64_t>(e + 1);
  return key;
}

JetContext::JetContext(int dim, std::vector<int> weights, int order)
    : dim_(dim), order_(order), weights_(std::move(weights)) {
  if (static_cast<int>(weights_.size()) != dim) throw Error("jet context weights mismatch");
  // Enumerate by recursion, then sort graded-lex.
  MultiIndex cur(dim, 0);
  std::vector<MultiIndex> all;
  auto rec = [&](auto&& self, int axis, int used) -> void {
    if (axis == dim) {
      all.push_back(cur);
      return;
    }
    for (int e = 0; used + e * weights_[axis] <= order_; ++e) {
      cur[axis] = e;
      self(self, axis + 1, used + e * weights_[axis]);
    }
    cur[axis] = 0;
  };
  rec(rec, 0, 0);
  std::sort(all.begin(), all.end(), [&](const MultiIndex& a, const MultiIndex& b) {
    int da = weighted_degree(a, weights_), db = weighted_degree(b, weights_);
    if (da != db) return da < db;
    return a < b;
  });
  monomials_ = std::move(all);
  for (size_t i = 0; i < monomials_.size(); ++i) {
    lookup_[pack(monomials_[i])] = static_cast<int>(i);
    wdeg_.push_back(weighted_degree(monomials_[i], weights_));
  }
  const size_t M = monomials_.size();
  prod_.assign(M * M, -1);
  MultiIndex sum(dim);
  for (size_t i = 0; i < M; ++i)
    for (size_t j = 0; j < M; ++j) {
      if (wdeg_[i] + wdeg_[j] > order_) continue;
      for (int k = 0; k < dim; ++k) sum[k] = monomials_[i][k] + monomials_[j][k];
      auto it = lookup_.find(pack(sum));
      prod_[i * M + j] = it == lookup_.end() ? -1 : it->second;
    }
}

int JetContext::index_of(const MultiIndex& a) const {
  auto it = lookup_.find(pack(a));
  return it == lookup_.end() ? -1 : it->second;
}

Jet Jet::variable(const JetContext* ctx, int axis, double base_value) {
  Jet j(ctx, base_value);
  MultiIndex a(ctx->dim(), 0);
  a[axis] = 1;
  int idx = ctx->index_of(a);
  if (idx < 0) throw Error("jet order too small for a variable");
  j.c_[idx] = 1.0;
  return j;
}

Jet operator*(const Jet& a, const Jet& b) {
  const JetContext* ctx = a.ctx_;
  Jet r(ctx);
  const int M = ctx->size();
  for (int i = 0; i < M; ++i) {
    double ca = a.c_[i];
    if (ca == 0.0) continue;
    for (int j = 0; j < M; ++j) {
      double cb = b.c_[j];
      if (cb == 0.0) continue;
      int k = ctx->product_index(i, j);
      if (k >= 0) r.c_[k] += ca * cb;
    }
  }
  return r;
}

Polynomial Jet::weighted_part(int deg) const {
  Polynomial p(ctx_->dim());
  for (int i = 0; i < ctx_->size(); ++i)
    if (ctx_->weighted_degree_of(i) == deg && c_[i] != 0.0)
      p.add_term(ctx_->monomial(i), c_[i]);
  return p;
}

Polynomial Jet::to_polynomial() const {
  Polynomial p(ctx_->dim());
  for (int i = 0; i < ctx_->size(); ++i)
    if (c_[i] != 0.0) p.add_term(ctx_->monomial(i), c_[i]);
  return p;
}

Jet eval_on_jets(const Polynomial& p, std::span<const Jet> x) {
  if (x.empty()) throw Error("eval_on_jets: no arguments");
  const JetContext* ctx = x[0].context();
  Jet acc(ctx);
  for (const auto& [a, c] : p.terms()) {
    Jet term(ctx, c);
    for (size_t i = 0; i < a.size(); ++i)
      for (int e = 0; e < a[i]; ++e) term = term * x[i];
    acc += term;
  }
  return acc;
}

Jet jet_of_polynomial(const Polynomial& p, const JetContext* ctx, const Vec& base) {
  std::vector<Jet> args;
  for (int i = 0; i < ctx->dim(); ++i) args.push_back(Jet::variable(ctx, i, base[i]));
  return eval_on_jets(p, args);
}

std::vector<std::vector<Jet>> jet_matrix_inverse(const std::vector<std::vector<Jet>>& M) {
  const int n = static_cast<int>(M.size());
  const JetContext* ctx = M[0][0].context();
  Mat M0(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M0(i, j) = M[i][j].value();
  Eigen::FullPivLU<Mat> lu(M0);
  if (!lu.isInvertible()) throw Error("jet matrix inverse: singular constant part");
  Mat M0inv = lu.inverse();

  auto mat_mul = [&](const std::vector<std::vector<Jet>>& A,
                     const std::vector<std::vector<Jet>>& B) {
    std::vector<std::vector<Jet>> C(n, std::vector<Jet>(n, Jet(ctx)));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) C[i][j] += A[i][k] * B[k][j];
    return C;
  };

  // N = M0^{-1} M - I has no constant part, so the series ends at the order.
  std::vector<std::vector<Jet>> N(n, std::vector<Jet>(n, Jet(ctx)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) N[i][j] += M0inv(i, k) * M[k][j];
      if (i == j) N[i][j] -= Jet(ctx, 1.0);
    }

  std::vector<std::vector<Jet>> acc(n, std::vector<Jet>(n, Jet(ctx)));
  std::vector<std::vector<Jet>> pw(n, std::vector<Jet>(n, Jet(ctx)));
  for (int i = 0; i < n; ++i) {
    acc[i][i] = Jet(ctx, 1.0);
    pw[i][i] = Jet(ctx, 1.0);
  }
  for (int k = 1; k <= ctx->order(); ++k) {
    pw = mat_mul(pw, N);
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc[i][j] += sign * pw[i][j];
  }
  // (I + N)^{-1} M0^{-1}
  std::vector<std::vector<Jet>> out(n, std::vector<Jet>(n, Jet(ctx)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out[i][j] += acc[i][k] * M0inv(k, j);
  return out;
}

}  // namespace srgeo
