#include "srgeo/group_metric.hpp"

#include "srgeo/ode.hpp"
#include "srgeo/rng.hpp"

namespace srgeo {

namespace {

// Spherical angles -> unit vector; n-2 polar angles in [0,pi], azimuth in [0,2pi).
Vec unit_from_angles(const std::vector<double>& ang, int n) {
  Vec u(n);
  double s = 1.0;
  for (int i = 0; i < n - 2; ++i) {
    u[i] = s * std::cos(ang[i]);
    s *= std::sin(ang[i]);
  }
  u[n - 2] = s * std::cos(ang[n - 2]);
  u[n - 1] = s * std::sin(ang[n - 2]);
  return u;
}

std::vector<double> angles_from_unit(const Vec& u) {
  const int n = static_cast<int>(u.size());
  std::vector<double> ang(n - 1);
  double s = 1.0;
  for (int i = 0; i < n - 2; ++i) {
    double c = std::clamp(u[i] / std::max(s, 1e-300), -1.0, 1.0);
    ang[i] = std::acos(c);
    s *= std::sin(ang[i]);
  }
  double phi = std::atan2(u[n - 1], u[n - 2]);
  if (phi < 0) phi += 2.0 * M_PI;
  ang[n - 2] = phi;
  return ang;
}

}  // namespace

bool frame_is_group(const PrivilegedFrame& frame, const NilpotentFrame& nf, double tol) {
  if (frame.dim() != nf.dim()) return false;
  for (int i = 0; i < frame.dim(); ++i) {
    PolyVectorField diff = frame.fields[i] - nf.fields[i];
    if (diff.max_abs_coeff() > tol * (1.0 + frame.fields[i].max_abs_coeff())) return false;
  }
  return true;
}

GroupTangentMetric::GroupTangentMetric(const NilpotentFrame& nf, const Options& opts)
    : nf_(nf), pframe_(nf.as_privileged_frame()), opts_(opts) {
  abelian_ = nf_.abelian();
  build_product();
  const int n = nf_.dim();
  auto cloud = ball_boundary_sample(pframe_, Vec::Zero(n), 1.0, opts_.cloud_count,
                                    opts_.flow, nullptr);
  Mat C(n, static_cast<Eigen::Index>(cloud.size()));
  for (size_t i = 0; i < cloud.size(); ++i) C.col(static_cast<Eigen::Index>(i)) = cloud[i].point;
  cloud_.push_back(C);
  extents_ = C.cwiseAbs().rowwise().maxCoeff() * 1.15;
  if (!abelian_) build_table();
}

void GroupTangentMetric::build_product() {
  const int n = nf_.dim();
  std::vector<int> w2(nf_.weights.begin(), nf_.weights.end());
  w2.insert(w2.end(), nf_.weights.begin(), nf_.weights.end());
  JetContext ctx(2 * n, w2, nf_.step);
  const int M = ctx.size();

  std::vector<Jet> xjet;
  for (int i = 0; i < n; ++i) xjet.push_back(Jet::variable(&ctx, n + i));

  Vec state = Vec::Zero(n * M);
  for (int i = 0; i < n; ++i) {
    Jet zi = Jet::variable(&ctx, i);
    state.segment(i * M, M) = zi.coeffs();
  }
  std::vector<Jet> gamma(n, Jet(&ctx));
  auto rhs = [&](double, const Vec& s, Vec& ds) {
    for (int i = 0; i < n; ++i) gamma[i].coeffs() = s.segment(i * M, M);
    for (int i = 0; i < n; ++i) {
      Jet v(&ctx);
      for (int k = 0; k < n; ++k) {
        Jet comp = eval_on_jets(nf_.fields[k].coeffs[i], gamma);
        v += xjet[k] * comp;
      }
      ds.segment(i * M, M) = v.coeffs();
    }
  };
  FlowConfig cfg = opts_.flow;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-14;
  integrate(rhs, state, 0.0, 1.0, cfg);

  product_.clear();
  for (int i = 0; i < n; ++i) {
    Jet gi(&ctx);
    gi.coeffs() = state.segment(i * M, M);
    Polynomial p = gi.to_polynomial();
    // Drop integrator dust: the product coordinates are exact polynomials
    // whose true coefficients are O(1) rationals.
    Polynomial clean(2 * n);
    for (const auto& [a, c] : p.terms())
      if (std::abs(c) > 1e-9) clean.add_term(a, c);
    product_.push_back(clean);
  }
}

Vec GroupTangentMetric::translate(const Vec& a, const Vec& x) const {
  const int n = nf_.dim();
  Vec arg(2 * n);
  arg.head(n) = a;
  arg.tail(n) = x;
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = product_[i].eval(arg);
  return out;
}

double GroupTangentMetric::homogeneous_norm(const Vec& x) const {
  double s = 0.0;
  for (int i = 0; i < nf_.dim(); ++i)
    s += std::pow(std::abs(x[i]), 1.0 / nf_.weights[i]);
  return s;
}

void GroupTangentMetric::build_table() {
  const int n = nf_.dim();
  if (n < 3) return;
  int P = opts_.polar_nodes, A = opts_.azimuth_nodes;
  if (n >= 4) {
    P = std::max(16, P / 4);
    A = std::max(24, A / 4);
  }
  grid_shape_.assign(static_cast<size_t>(n - 2), P);
  grid_shape_.push_back(A);
  size_t total = 1;
  for (int s : grid_shape_) total *= static_cast<size_t>(s);
  rho_.assign(total, 0.0);

  ChartBox none;  // group distance is global: arcs are unconstrained
  ShootingParams sp;
  sp.attempts = 22;
  sp.enforce_domain = false;

  std::vector<double> ang(static_cast<size_t>(n - 1), 0.0);
  Vec prev_cov;
  double prev_T = 0.0;
  std::vector<Vec> row_cov(static_cast<size_t>(A));
  std::vector<double> row_T(static_cast<size_t>(A), 0.0);

  std::vector<size_t> idx(static_cast<size_t>(n - 1), 0);
  for (size_t flat = 0; flat < total; ++flat) {
    size_t rem = flat;
    for (int d = n - 2; d >= 0; --d) {
      idx[d] = rem % static_cast<size_t>(grid_shape_[d]);
      rem /= static_cast<size_t>(grid_shape_[d]);
    }
    for (int d = 0; d < n - 2; ++d)
      ang[d] = M_PI * static_cast<double>(idx[d]) / (grid_shape_[d] - 1);
    ang[n - 2] = 2.0 * M_PI * static_cast<double>(idx[n - 2]) / grid_shape_[n - 2];

    Vec u = unit_from_angles(ang, n);
    double Nu = homogeneous_norm(u);
    Vec Pt = dilate(u, nf_.weights, 1.0 / Nu);

    ShootingParams local = sp;
    size_t az = idx[n - 2];
    if (prev_cov.size()) local.warm_starts.emplace_back(prev_cov, prev_T);
    if (row_cov[az].size()) local.warm_starts.emplace_back(row_cov[az], row_T[az]);

    DistanceQuery dq{&pframe_, Vec::Zero(n), Pt, none, DistanceEngine::kShooting};
    DistanceResult dr = distance_shooting(dq, local, opts_.flow);
    if (!dr.converged) {
      ShootingParams harder = sp;
      harder.attempts = 60;
      harder.lambda_hat_max = 10.0;
      dr = distance_shooting(dq, harder, opts_.flow);
    }
    if (!dr.converged)
      throw Error("GroupTangentMetric: no geodesic to sphere node " + point_str(Pt));
    rho_[flat] = dr.value;
    prev_cov = dr.covector;
    prev_T = dr.duration;
    row_cov[az] = dr.covector;
    row_T[az] = dr.duration;
  }

  // Second sweep: re-solve spikes against the neighbor median (a missed
  // global minimizer shows up as an isolated overestimate).
  auto at = [&](const std::vector<size_t>& ix) {
    size_t f = 0;
    for (int d = 0; d < n - 1; ++d) f = f * static_cast<size_t>(grid_shape_[d]) + ix[d];
    return f;
  };
  for (size_t flat = 0; flat < total; ++flat) {
    size_t rem = flat;
    for (int d = n - 2; d >= 0; --d) {
      idx[d] = rem % static_cast<size_t>(grid_shape_[d]);
      rem /= static_cast<size_t>(grid_shape_[d]);
    }
    double best_nb = std::numeric_limits<double>::infinity();
    for (int d = 0; d < n - 1; ++d)
      for (int off : {-1, 1}) {
        auto jx = idx;
        long v = static_cast<long>(jx[d]) + off;
        if (d == n - 2)
          jx[d] = static_cast<size_t>((v + grid_shape_[d]) % grid_shape_[d]);
        else if (v < 0 || v >= grid_shape_[d])
          continue;
        else
          jx[d] = static_cast<size_t>(v);
        best_nb = std::min(best_nb, rho_[at(jx)]);
      }
    if (rho_[flat] > 1.3 * best_nb) {
      for (int d = 0; d < n - 2; ++d)
        ang[d] = M_PI * static_cast<double>(idx[d]) / (grid_shape_[d] - 1);
      ang[n - 2] = 2.0 * M_PI * static_cast<double>(idx[n - 2]) / grid_shape_[n - 2];
      Vec u = unit_from_angles(ang, n);
      Vec Pt = dilate(u, nf_.weights, 1.0 / homogeneous_norm(u));
      ShootingParams harder = sp;
      harder.attempts = 60;
      harder.lambda_hat_max = 12.0;
      DistanceQuery dq{&pframe_, Vec::Zero(n), Pt, none, DistanceEngine::kShooting};
      DistanceResult dr = distance_shooting(dq, harder, opts_.flow);
      if (dr.converged) rho_[flat] = std::min(rho_[flat], dr.value);
    }
  }

  // Spot-check the table against fresh solves.
  CounterRng rng(31337, 3);
  double worst = 0.0;
  for (int t = 0; t < 12; ++t) {
    Vec u(n);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform(static_cast<std::uint64_t>(t) * n + i, -1.0, 1.0);
    if (u.norm() < 1e-6) continue;
    u /= u.norm();
    Vec Pt = dilate(u, nf_.weights, 1.0 / homogeneous_norm(u));
    DistanceQuery dq{&pframe_, Vec::Zero(n), Pt, ChartBox{}, DistanceEngine::kShooting};
    ShootingParams sp2;
    sp2.attempts = 40;
    sp2.enforce_domain = false;
    DistanceResult dr = distance_shooting(dq, sp2, opts_.flow);
    if (!dr.converged) continue;
    double interp = origin_distance(Pt);
    worst = std::max(worst, std::abs(interp - dr.value) / std::max(dr.value, 1e-9));
  }
  table_error_ = worst;
}

double GroupTangentMetric::rho_lookup(const Vec& u) const {
  const int n = nf_.dim();
  auto ang = angles_from_unit(u);
  // Multilinear interpolation; the azimuth axis wraps.
  std::vector<double> pos(static_cast<size_t>(n - 1));
  for (int d = 0; d < n - 2; ++d)
    pos[d] = ang[d] / M_PI * (grid_shape_[d] - 1);
  pos[n - 2] = ang[n - 2] / (2.0 * M_PI) * grid_shape_[n - 2];

  double acc = 0.0;
  const int corners = 1 << (n - 1);
  for (int c = 0; c < corners; ++c) {
    double wgt = 1.0;
    size_t flat = 0;
    for (int d = 0; d < n - 1; ++d) {
      double fl = std::floor(pos[d]);
      double frac = pos[d] - fl;
      long i0 = static_cast<long>(fl);
      long id;
      if (c & (1 << d)) {
        wgt *= frac;
        id = i0 + 1;
      } else {
        wgt *= 1.0 - frac;
        id = i0;
      }
      if (d == n - 2)
        id = (id % grid_shape_[d] + grid_shape_[d]) % grid_shape_[d];
      else
        id = std::clamp<long>(id, 0, grid_shape_[d] - 1);
      flat = flat * static_cast<size_t>(grid_shape_[d]) + static_cast<size_t>(id);
    }
    acc += wgt * rho_[flat];
  }
  return acc;
}

double GroupTangentMetric::origin_distance(const Vec& x) const {
  if (abelian_) return x.norm();
  const int n = nf_.dim();
  double s = homogeneous_norm(x);
  if (s < 1e-300) return 0.0;
  Vec y = dilate(x, nf_.weights, 1.0 / s);  // N(y) = 1
  // Euclidean-unit representative of the dilation ray through y.
  auto h = [&](double t) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += y[i] * y[i] * std::pow(t, 2.0 * nf_.weights[i]);
    return v;
  };
  double lo = 1.0, hi = 1.0;
  while (h(lo) > 1.0) lo *= 0.5;
  while (h(hi) < 1.0) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (h(mid) < 1.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  Vec u = dilate(y, nf_.weights, t);
  double nn = u.norm();
  if (nn > 0) u /= nn;
  return s * rho_lookup(u);
}

double GroupTangentMetric::distance(const Vec& a, const Vec& b) const {
  if (abelian_) return (a - b).norm();
  return origin_distance(translate(-a, b));
}

ChartBox GroupTangentMetric::ball_box(const Vec& center, double r) const {
  const int n = nf_.dim();
  ChartBox box;
  box.lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  box.hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  const Mat& C = cloud_[0];
  for (Eigen::Index c = 0; c < C.cols(); ++c) {
    Vec pt = translate(center, dilate(C.col(c), nf_.weights, r));
    box.lo = box.lo.cwiseMin(pt);
    box.hi = box.hi.cwiseMax(pt);
  }
  Vec pad = 0.12 * (box.hi - box.lo).cwiseMax(1e-6);
  box.lo -= pad;
  box.hi += pad;
  return box;
}

ShootingDistanceField::ShootingDistanceField(const PrivilegedFrame& frame, ChartBox domain,
                                             FlowConfig cfg, ShootingParams params)
    : frame_(frame), domain_(std::move(domain)), cfg_(cfg), params_(std::move(params)) {
  oracle_params_.segments = 12;
  oracle_params_.defect_coeff = 3.0;
}

double ShootingDistanceField::distance(const Vec& a, const Vec& b) const {
  DistanceQuery dq{&frame_, a, b, domain_, DistanceEngine::kShooting};
  DistanceResult dr = distance_shooting(dq, params_, cfg_);
  if (dr.converged) return dr.value;
  dr = distance_oracle(dq, oracle_params_, cfg_);
  if (!dr.converged) throw Error("distance field: no curve found between " + point_str(a) +
                                 " and " + point_str(b));
  return dr.value;
}

ChartBox ShootingDistanceField::ball_box(const Vec& center, double r) const {
  auto samples = ball_boundary_sample(frame_, center, r, 64, cfg_, nullptr);
  ChartBox box;
  const int n = frame_.dim();
  box.lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  box.hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  for (const auto& s : samples) {
    box.lo = box.lo.cwiseMin(s.point);
    box.hi = box.hi.cwiseMax(s.point);
  }
  Vec pad = 0.15 * (box.hi - box.lo).cwiseMax(1e-6);
  box.lo -= pad;
  box.hi += pad;
  return box;
}

}  // namespace srgeo
