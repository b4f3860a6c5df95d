#include "srgeo/flow.hpp"

namespace srgeo {

Vec dilate(const Vec& x, std::span<const int> weights, double r) {
  Vec y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    y[i] = std::pow(r, weights[static_cast<size_t>(i)]) * x[i];
  return y;
}

Vec dilate(const Vec& x, const Dilation& d) { return dilate(x, d.weights, d.r); }

ChartBox ChartBox::centered(int n, double half_width) {
  ChartBox b;
  b.lo = Vec::Constant(n, -half_width);
  b.hi = Vec::Constant(n, half_width);
  return b;
}

bool ChartBox::contains(const Vec& x, double margin) const {
  if (lo.size() == 0) return true;  // unconstrained chart
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - margin || x[i] > hi[i] + margin) return false;
  return true;
}

namespace {

void check_box(const ChartBox* box, const Vec& x) {
  if (box && !box->contains(x))
    throw Error("trajectory left chart box at " + point_str(x));
}

}  // namespace

Vec flow(const PolyVectorField& X, const Vec& q, double t, const FlowConfig& cfg,
         const ChartBox* box) {
  Vec y = q;
  check_box(box, q);
  integrate([&X](double, const Vec& s, Vec& ds) { ds = X.eval(s); }, y, 0.0, t, cfg,
            [box](double, const Vec& s) { check_box(box, s); });
  return y;
}

Vec exp_coords(const PrivilegedFrame& frame, const Vec& q, const Vec& x,
               const FlowConfig& cfg, const ChartBox* box) {
  if (x.isZero(0.0)) return q;
  PolyVectorField V = linear_combination(frame.fields, x);
  return flow(V, q, 1.0, cfg, box);
}

ExpCoordsResult exp_coords_with_jacobian(const PrivilegedFrame& frame, const Vec& q,
                                         const Vec& x, const FlowConfig& cfg,
                                         const ChartBox* box) {
  const int n = frame.dim();
  ExpCoordsResult out;
  if (x.isZero(0.0)) {
    out.point = q;
    out.jacobian = frame.frame_matrix(q);
    return out;
  }
  PolyVectorField V = linear_combination(frame.fields, x);
  // State is (gamma, J) with J' = DV(gamma) J + [X_1(gamma)|...|X_n(gamma)],
  // so J(1) = dF_{q,X}(x).
  Vec y(n + n * n);
  y.head(n) = q;
  y.tail(n * n).setZero();
  auto rhs = [&](double, const Vec& s, Vec& ds) {
    Vec g = s.head(n);
    Mat J = Eigen::Map<const Mat>(s.data() + n, n, n);
    ds.head(n) = V.eval(g);
    Mat dJ = V.jacobian(g) * J + field_matrix(frame.fields, g);
    Eigen::Map<Mat>(ds.data() + n, n, n) = dJ;
  };
  integrate(rhs, y, 0.0, 1.0, cfg, [box, n](double, const Vec& s) {
    if (box) check_box(box, s.head(n));
  });
  out.point = y.head(n);
  out.jacobian = Eigen::Map<const Mat>(y.data() + n, n, n);
  return out;
}

Vec exp_coords_inverse(const PrivilegedFrame& frame, const Vec& q, const Vec& p,
                       const FlowConfig& cfg, double tol, int max_iter) {
  const int n = frame.dim();
  Vec x = Vec::Zero(n);
  {
    // Linear seed from dF(0) = frame matrix.
    Eigen::FullPivLU<Mat> lu(frame.frame_matrix(q));
    if (lu.isInvertible()) x = lu.solve(p - q);
  }
  double best_res = std::numeric_limits<double>::infinity();
  Vec best_x = x;
  for (int it = 0; it < max_iter; ++it) {
    ExpCoordsResult fc = exp_coords_with_jacobian(frame, q, x, cfg);
    Vec r = fc.point - p;
    double res = r.norm();
    if (res < best_res) {
      best_res = res;
      best_x = x;
    }
    if (res <= tol) return x;
    Eigen::FullPivLU<Mat> lu(fc.jacobian);
    if (!lu.isInvertible()) break;
    Vec step = lu.solve(r);
    // Backtracking keeps Newton inside the basin.
    double lambda = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 12; ++bt) {
      Vec cand = x - lambda * step;
      Vec rc = exp_coords(frame, q, cand, cfg) - p;
      if (rc.norm() < res) {
        x = cand;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  if (best_res <= tol) return best_x;
  throw Error("exp_coords_inverse: Newton did not converge (point outside coordinate patch), residual " +
              std::to_string(best_res));
}

Mat coordinate_frame(const PrivilegedFrame& frame, const Vec& q, const Vec& sample,
                     const FlowConfig& cfg) {
  ExpCoordsResult fc = exp_coords_with_jacobian(frame, q, sample, cfg);
  Eigen::FullPivLU<Mat> lu(fc.jacobian);
  if (!lu.isInvertible())
    throw Error("coordinate_frame: dF singular at " + point_str(sample));
  return lu.solve(frame.frame_matrix(fc.point));
}

Mat rescaled_frame(const PrivilegedFrame& frame, const Vec& q, double r, const Vec& sample,
                   const FlowConfig& cfg) {
  const int n = frame.dim();
  Vec scaled = dilate(sample, frame.weights, r);
  Mat C = coordinate_frame(frame, q, scaled, cfg);
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(j, i) = std::pow(r, frame.weights[i] - frame.weights[j]) * C(j, i);
  return out;
}

}  // namespace srgeo
