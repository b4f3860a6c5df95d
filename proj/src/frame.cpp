#include "srgeo/frame.hpp"

#include <Eigen/SVD>

namespace srgeo {

namespace {

constexpr double kRankRelTol = 1e-9;

int svd_rank(const Mat& A) {
  if (A.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > kRankRelTol * s[0]) ++r;
  return r;
}

// All left-nested bracket multi-indices of length k over {0..m-1}, lex order.
std::vector<std::vector<int>> bracket_indices(int m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(k, 0);
  while (true) {
    out.push_back(idx);
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == m - 1) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }
  return out;
}

}  // namespace

MetricExtension MetricExtension::user_matrix(std::vector<std::vector<Polynomial>> G) {
  MetricExtension e;
  e.mode = MetricMode::kUserMatrix;
  e.matrix_field = std::move(G);
  const size_t n = e.matrix_field.size();
  for (const auto& row : e.matrix_field)
    if (row.size() != n) throw Error("metric matrix must be square");
  return e;
}

Mat MetricExtension::eval(const Vec& q) const {
  if (mode != MetricMode::kUserMatrix) throw Error("metric matrix only available in user-matrix mode");
  const int n = static_cast<int>(matrix_field.size());
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = matrix_field[i][j].eval(q);
  return G;
}

FlagReport compute_flag(std::span<const PolyVectorField> horizontal,
                        std::span<const Vec> probe_points, int max_step) {
  if (horizontal.empty()) throw Error("compute_flag: empty horizontal frame");
  if (probe_points.empty()) throw Error("compute_flag: no probe points");
  const int n = horizontal[0].dim;
  const int m = static_cast<int>(horizontal.size());
  const size_t np = probe_points.size();

  // Brackets of length <= k, built level by level and shared across probes.
  std::vector<PolyVectorField> all(horizontal.begin(), horizontal.end());
  std::vector<PolyVectorField> level(horizontal.begin(), horizontal.end());
  std::vector<std::vector<Vec>> vals(np);
  for (size_t p = 0; p < np; ++p)
    for (const auto& f : all) vals[p].push_back(f.eval(probe_points[p]));

  std::vector<std::vector<int>> growth(np);
  std::vector<bool> done(np, false);
  for (int k = 1; k <= max_step; ++k) {
    if (k > 1) {
      std::vector<PolyVectorField> next;
      for (const auto& f : level)
        for (const auto& h : horizontal) next.push_back(lie_bracket(f, h));
      for (size_t p = 0; p < np; ++p)
        for (const auto& f : next) vals[p].push_back(f.eval(probe_points[p]));
      for (auto& f : next) all.push_back(std::move(f));
      level.assign(all.end() - static_cast<long>(level.size()) * m, all.end());
    }
    bool all_done = true;
    for (size_t p = 0; p < np; ++p) {
      if (done[p]) continue;
      Mat A(n, static_cast<Eigen::Index>(vals[p].size()));
      for (size_t c = 0; c < vals[p].size(); ++c)
        A.col(static_cast<Eigen::Index>(c)) = vals[p][c];
      int r = svd_rank(A);
      growth[p].push_back(r);
      if (k == 1 && r < m)
        throw Error("compute_flag: horizontal fields dependent at probe " +
                    point_str(probe_points[p]));
      if (r == n)
        done[p] = true;
      else
        all_done = false;
    }
    if (all_done) break;
  }
  for (size_t p = 0; p < np; ++p)
    if (growth[p].empty() || growth[p].back() != n)
      throw Error("compute_flag: Chow condition fails within max_step at probe " +
                  point_str(probe_points[p]));

  FlagReport rep;
  rep.growth = growth[0];
  rep.step = static_cast<int>(growth[0].size());
  rep.equiregular = true;
  for (size_t p = 1; p < np; ++p) {
    if (growth[p] != rep.growth) {
      rep.equiregular = false;
      rep.mismatch_point = probe_points[p];
      rep.mismatch_growth = growth[p];
      break;
    }
  }
  return rep;
}

Mat PrivilegedFrame::metric_matrix(const Vec& q) const {
  if (metric.mode == MetricMode::kUserMatrix) return metric.eval(q);
  Mat A = frame_matrix(q);
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) throw Error("frame singular at " + point_str(q));
  Mat Ainv = lu.inverse();
  return Ainv.transpose() * Ainv;
}

Mat PrivilegedFrame::orthonormal_frame_at(const Vec& q) const {
  Mat A = frame_matrix(q);
  if (metric.mode == MetricMode::kFrameOrthonormal) return A;
  Mat G = metric.eval(q);
  const int n = dim();
  Mat E = A;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j)
      E.col(i) -= (E.col(j).transpose() * G * E.col(i))(0, 0) * E.col(j);
    double nrm = std::sqrt((E.col(i).transpose() * G * E.col(i))(0, 0));
    if (!(nrm > 0)) throw Error("frame singular at " + point_str(q));
    E.col(i) /= nrm;
  }
  return E;
}

PrivilegedFrame build_privileged_frame(std::span<const PolyVectorField> horizontal,
                                       const MetricExtension& metric, const Vec& base_point,
                                       const FrameBuildOptions& opts) {
  const int n = horizontal.empty() ? 0 : horizontal[0].dim;
  const int m = static_cast<int>(horizontal.size());
  if (n == 0) throw Error("build_privileged_frame: empty horizontal frame");

  std::vector<Vec> probes{base_point};
  for (int i = 0; i < n; ++i) {
    Vec d = Vec::Zero(n);
    d[i] = opts.probe_radius;
    probes.push_back(base_point + d);
    probes.push_back(base_point - d);
  }
  FlagReport flag = compute_flag(horizontal, probes, opts.max_step);
  if (!flag.equiregular)
    throw Error("build_privileged_frame: non-equiregular near " +
                point_str(*flag.mismatch_point));

  PrivilegedFrame fr;
  fr.m = m;
  fr.growth = flag.growth;
  fr.step = flag.step;
  fr.base_point = base_point;
  fr.metric = metric;
  fr.fields.assign(horizontal.begin(), horizontal.end());
  for (int i = 0; i < m; ++i) fr.weights.push_back(1);
  for (int i = 0; i < m; ++i) fr.bracket_recipe.push_back({i});

  for (int layer = 2; layer <= flag.step; ++layer) {
    const int want = flag.growth[layer - 1] - flag.growth[layer - 2];
    auto candidates = bracket_indices(m, layer);
    std::vector<PolyVectorField> cand_fields;
    std::vector<Vec> cand_vals;
    for (const auto& I : candidates) {
      cand_fields.push_back(iterated_bracket(horizontal, I));
      cand_vals.push_back(cand_fields.back().eval(base_point));
    }
    for (int pick = 0; pick < want; ++pick) {
      Mat S = field_matrix(fr.fields, base_point);
      Eigen::ColPivHouseholderQR<Mat> qr(S);
      int best = -1;
      double best_res = 0.0;
      for (size_t c = 0; c < candidates.size(); ++c) {
        const Vec& v = cand_vals[c];
        Vec res = v - S * qr.solve(v);
        double r = res.norm();
        if (r > best_res * (1.0 + 1e-12) && r > 1e-9 * std::max(1.0, v.norm())) {
          best_res = r;
          best = static_cast<int>(c);
        }
      }
      if (best < 0)
        throw Error("build_privileged_frame: rank deficiency at base point " +
                    point_str(base_point));
      fr.fields.push_back(cand_fields[best]);
      fr.bracket_recipe.push_back(candidates[best]);
      fr.weights.push_back(layer);
    }
  }

  fr.Q = 0;
  for (int w : fr.weights) fr.Q += w;

  if (metric.mode == MetricMode::kUserMatrix) {
    Mat G = metric.eval(base_point);
    // Horizontal fields must already reproduce the SR metric.
    Mat H = field_matrix(fr.horizontal(), base_point);
    Mat gram = H.transpose() * G * H;
    if ((gram - Mat::Identity(m, m)).norm() > opts.orthonormal_tol)
      throw Error("metric extension does not restrict to the SR metric at base point");
    // Constant-coefficient Gram-Schmidt of the completion at base_point.
    for (int i = m; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        Vec vi = fr.fields[i].eval(base_point);
        Vec vj = fr.fields[j].eval(base_point);
        double proj = (vj.transpose() * G * vi)(0, 0) / (vj.transpose() * G * vj)(0, 0);
        fr.fields[i] = fr.fields[i] - fr.fields[j] * proj;
      }
      Vec vi = fr.fields[i].eval(base_point);
      double nrm = std::sqrt((vi.transpose() * G * vi)(0, 0));
      if (!(nrm > 0))
        throw Error("build_privileged_frame: rank deficiency at base point " +
                    point_str(base_point));
      fr.fields[i] = fr.fields[i] * (1.0 / nrm);
    }
  }
  return fr;
}

namespace {

Polynomial poly_det(const std::vector<std::vector<Polynomial>>& M, std::vector<int> rows,
                    std::vector<int> cols) {
  const size_t k = rows.size();
  if (k == 1) return M[static_cast<size_t>(rows[0])][static_cast<size_t>(cols[0])];
  Polynomial acc(M[0][0].dim());
  for (size_t c = 0; c < k; ++c) {
    std::vector<int> sub_cols;
    for (size_t j = 0; j < k; ++j)
      if (j != c) sub_cols.push_back(cols[j]);
    std::vector<int> sub_rows(rows.begin() + 1, rows.end());
    Polynomial minor = poly_det(M, sub_rows, sub_cols);
    Polynomial term = M[static_cast<size_t>(rows[0])][static_cast<size_t>(cols[c])] * minor;
    acc += (c % 2 == 0) ? term : -term;
  }
  return acc;
}

}  // namespace

std::vector<std::vector<Polynomial>> scaled_extension_matrix(const PrivilegedFrame& frame,
                                                             double vertical_scale) {
  const int n = frame.dim();
  // A(i,j) = component i of field j.
  std::vector<std::vector<Polynomial>> A(static_cast<size_t>(n),
                                         std::vector<Polynomial>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A[static_cast<size_t>(i)][static_cast<size_t>(j)] = frame.fields[j].coeffs[i];

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
  Polynomial det = poly_det(A, all, all);
  if (det.degree() > 0)
    throw Error("scaled_extension_matrix: frame determinant is not constant");
  double d0 = det.eval(Vec::Zero(n));
  if (d0 == 0.0) throw Error("scaled_extension_matrix: singular frame");

  // Ainv = adj(A)^T-free convention: Ainv(i,j) = cofactor(j,i)/det.
  std::vector<std::vector<Polynomial>> Ainv(static_cast<size_t>(n),
                                            std::vector<Polynomial>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::vector<int> rows, cols;
      for (int r = 0; r < n; ++r)
        if (r != j) rows.push_back(r);
      for (int c = 0; c < n; ++c)
        if (c != i) cols.push_back(c);
      Polynomial cof = n == 1 ? Polynomial::constant(1, 1.0) : poly_det(A, rows, cols);
      double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      Ainv[static_cast<size_t>(i)][static_cast<size_t>(j)] = cof * (sign / d0);
    }

  // G = Ainv^T D^{-2} Ainv.
  std::vector<std::vector<Polynomial>> G(static_cast<size_t>(n),
                                         std::vector<Polynomial>(static_cast<size_t>(n),
                                                                 Polynomial(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double dkk = k < frame.m ? 1.0 : 1.0 / (vertical_scale * vertical_scale);
        G[static_cast<size_t>(i)][static_cast<size_t>(j)] +=
            Ainv[static_cast<size_t>(k)][static_cast<size_t>(i)] *
            Ainv[static_cast<size_t>(k)][static_cast<size_t>(j)] * dkk;
      }
  return G;
}

double evaluate_metric(const MetricExtension& metric, const PrivilegedFrame& frame,
                       const Vec& q, const Vec& v, const Vec& w) {
  if (metric.mode == MetricMode::kFrameOrthonormal) {
    Mat A = frame.frame_matrix(q);
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw Error("frame singular at " + point_str(q));
    Vec cv = lu.solve(v), cw = lu.solve(w);
    return cv.dot(cw);
  }
  Mat G = metric.eval(q);
  return (v.transpose() * G * w)(0, 0);
}

}  // namespace srgeo
