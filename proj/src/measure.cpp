#include "srgeo/measure.hpp"

#include "srgeo/parallel.hpp"
#include "srgeo/rng.hpp"

namespace srgeo {

namespace {

Mat metric_at(const PrivilegedFrame& frame, const Vec& q,
              const MetricExtension* metric_override) {
  if (metric_override) {
    if (metric_override->mode == MetricMode::kUserMatrix) return metric_override->eval(q);
    return frame.metric_matrix(q);
  }
  return frame.metric_matrix(q);
}

// Polynomial in the n-1 patch parameters lifted to n variables (skip `axis`).
Polynomial embed_params(const Polynomial& p, int n, int axis) {
  Polynomial out(n);
  for (const auto& [a, c] : p.terms()) {
    MultiIndex b(n, 0);
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (i == axis) continue;
      b[i] = a[k++];
    }
    out.add_term(b, c);
  }
  return out;
}

// Deterministic orthonormal completion with first row c^T.
Mat rotation_with_first_row(const Vec& c) {
  const int m = static_cast<int>(c.size());
  Mat R = Mat::Zero(m, m);
  R.row(0) = c.transpose() / c.norm();
  int filled = 1;
  for (int j = 0; j < m && filled < m; ++j) {
    Vec v = Vec::Unit(m, j);
    for (int i = 0; i < filled; ++i) v -= R.row(i).dot(v) * R.row(i).transpose();
    if (v.norm() > 1e-6) {
      R.row(filled++) = v.transpose() / v.norm();
    }
  }
  if (filled < m) throw Error("rotation completion failed");
  return R;
}

}  // namespace

HypersurfacePatch HypersurfacePatch::graph(int n, int axis, const Polynomial& phi,
                                           const Vec& lo, const Vec& hi,
                                           double orientation) {
  HypersurfacePatch p;
  p.lo = lo;
  p.hi = hi;
  p.orientation = orientation;
  p.graph_axis = axis;
  for (int i = 0; i < n; ++i)
    if (i != axis) p.graph_axes.push_back(i);
  Polynomial phi_n = embed_params(phi, n, axis);
  p.implicit_f = Polynomial::variable(n, axis) - phi_n;
  auto axes = p.graph_axes;
  p.param = [n, axis, axes, phi](const Vec& u) {
    Vec x = Vec::Zero(n);
    for (size_t k = 0; k < axes.size(); ++k) x[axes[k]] = u[static_cast<Eigen::Index>(k)];
    x[axis] = phi.eval(u);
    return x;
  };
  p.dparam = [n, axis, axes, phi](const Vec& u) {
    Mat J = Mat::Zero(n, n - 1);
    for (size_t k = 0; k < axes.size(); ++k) {
      J(axes[k], static_cast<Eigen::Index>(k)) = 1.0;
      J(axis, static_cast<Eigen::Index>(k)) =
          phi.derivative(static_cast<int>(k)).eval(u);
    }
    return J;
  };
  return p;
}

double volume_norm(const VolumeForm& omega, const PrivilegedFrame& frame, const Vec& q,
                   const MetricExtension* metric_override) {
  Mat G = metric_at(frame, q, metric_override);
  double det = G.determinant();
  if (!(det > 0)) throw Error("volume_norm: frame singular at " + point_str(q));
  return std::abs(omega.eval(q)) / std::sqrt(det);
}

HorizontalNormal horizontal_normal(const HypersurfacePatch& patch,
                                   const PrivilegedFrame& frame, const Vec& q,
                                   const MetricExtension* metric_override) {
  if (!patch.implicit_f)
    throw Error("horizontal_normal: patch carries no implicit description");
  const int n = frame.dim();
  Vec grad(n);
  for (int i = 0; i < n; ++i) grad[i] = patch.implicit_f->derivative(i).eval(q);
  if (grad.norm() < 1e-12) throw Error("horizontal_normal: degenerate patch point");
  grad *= patch.orientation;

  Mat G = metric_at(frame, q, metric_override);
  Eigen::LDLT<Mat> ldlt(G);
  Vec Ginv_grad = ldlt.solve(grad);
  double nrm = std::sqrt(grad.dot(Ginv_grad));
  HorizontalNormal out;
  out.nu = Ginv_grad / nrm;

  Mat H = field_matrix(frame.horizontal(), q);
  Vec coords = H.transpose() * G * out.nu;
  out.nu_D = H * coords;
  out.nu_D_norm = std::sqrt(std::max(0.0, out.nu_D.dot(G * out.nu_D)));
  out.characteristic = out.nu_D_norm < 1e-8;
  return out;
}

MeasureRegion MeasureRegion::box_region(ChartBox b) {
  MeasureRegion r;
  r.kind = Kind::kBox;
  r.box = std::move(b);
  return r;
}

MeasureRegion MeasureRegion::ball(const Vec& center, double radius,
                                  const DistanceField& dist) {
  MeasureRegion r;
  r.kind = Kind::kBall;
  r.center = center;
  r.radius = radius;
  r.dist = &dist;
  return r;
}

namespace {

struct QuadPass {
  double integral = 0.0;
  long total_cells = 0;
  long boundary_cells = 0;
  long touched_cells = 0;
};

QuadPass surface_pass(const HypersurfacePatch& patch, const VolumeForm& omega,
                      const PrivilegedFrame& frame, const MeasureRegion& region,
                      const Vec& lo, const Vec& hi, int grid,
                      const MetricExtension* metric_override) {
  const int d = static_cast<int>(lo.size());
  auto member = [&](const Vec& x) {
    if (region.kind == MeasureRegion::Kind::kBox) return region.box.contains(x);
    return region.dist->distance(region.center, x) <= region.radius;
  };
  auto integrand = [&](const Vec& u) {
    Vec x = patch.param(u);
    Mat J = patch.dparam(u);
    Mat G = metric_at(frame, x, metric_override);
    double area = std::sqrt((J.transpose() * G * J).determinant());
    HorizontalNormal hn = horizontal_normal(patch, frame, x, metric_override);
    return volume_norm(omega, frame, x, metric_override) * hn.nu_D_norm * area;
  };

  QuadPass pass;
  std::vector<long> shape(d, grid);
  long total = 1;
  for (int i = 0; i < d; ++i) total *= shape[i];
  pass.total_cells = total;
  Vec h = (hi - lo) / grid;
  double cell_vol = 1.0;
  for (int i = 0; i < d; ++i) cell_vol *= h[i];

  std::vector<double> partial(static_cast<size_t>(total), 0.0);
  std::vector<unsigned char> flags(static_cast<size_t>(total), 0);  // 1 touched, 2 boundary
  parallel_for(static_cast<size_t>(total), [&](size_t flat) {
    Vec u(d);
    size_t rem = flat;
    for (int i = d - 1; i >= 0; --i) {
      long ix = static_cast<long>(rem % static_cast<size_t>(grid));
      rem /= static_cast<size_t>(grid);
      u[i] = lo[i] + (ix + 0.5) * h[i];
    }
    bool mid_in = member(patch.param(u));
    // Corner disagreement marks a boundary cell.
    bool any = mid_in, all = mid_in;
    for (int c = 0; c < (1 << d); ++c) {
      Vec uc = u;
      for (int i = 0; i < d; ++i) uc[i] += ((c >> i) & 1 ? 0.5 : -0.5) * h[i];
      bool in = member(patch.param(uc));
      any = any || in;
      all = all && in;
    }
    if (any) flags[flat] |= 1;
    if (any && !all) flags[flat] |= 2;
    if (mid_in) partial[flat] = integrand(u) * cell_vol;
  });
  for (size_t i = 0; i < partial.size(); ++i) {
    pass.integral += partial[i];
    if (flags[i] & 1) ++pass.touched_cells;
    if (flags[i] & 2) ++pass.boundary_cells;
  }
  return pass;
}

}  // namespace

SurfaceMeasureResult sr_surface_measure(const HypersurfacePatch& patch,
                                        const VolumeForm& omega,
                                        const PrivilegedFrame& frame,
                                        const MeasureRegion& region, int grid,
                                        const MetricExtension* metric_override) {
  Vec lo = patch.lo, hi = patch.hi;
  if (region.kind == MeasureRegion::Kind::kBall && !patch.graph_axes.empty()) {
    ChartBox bb = region.dist->ball_box(region.center, region.radius);
    for (size_t k = 0; k < patch.graph_axes.size(); ++k) {
      lo[static_cast<Eigen::Index>(k)] =
          std::max(lo[static_cast<Eigen::Index>(k)], bb.lo[patch.graph_axes[k]]);
      hi[static_cast<Eigen::Index>(k)] =
          std::min(hi[static_cast<Eigen::Index>(k)], bb.hi[patch.graph_axes[k]]);
    }
    for (Eigen::Index k = 0; k < lo.size(); ++k)
      if (lo[k] >= hi[k]) return {};  // ball misses the patch box
  }

  QuadPass c1 = surface_pass(patch, omega, frame, region, lo, hi, grid, metric_override);
  QuadPass c2 =
      surface_pass(patch, omega, frame, region, lo, hi, 2 * grid, metric_override);

  SurfaceMeasureResult out;
  out.error_indicator = std::abs(c2.integral - c1.integral);
  if (region.kind == MeasureRegion::Kind::kBox) {
    out.value = c2.integral + (c2.integral - c1.integral) / 3.0;
  } else {
    out.value = 2.0 * c2.integral - c1.integral;
  }
  out.boundary_cell_fraction =
      c2.touched_cells ? static_cast<double>(c2.boundary_cells) / c2.touched_cells : 0.0;
  out.boundary_warning = out.boundary_cell_fraction > 0.2;
  return out;
}

Vec spherical_factor_plane_normal(const PrivilegedFrame& frame, const Vec& p,
                                  const Vec& nu) {
  Mat G = frame.metric_matrix(p);
  Vec eta = frame.frame_matrix(p).transpose() * G * nu;
  double nn = eta.norm();
  if (nn < 1e-14) throw Error("spherical factor: zero plane normal");
  return eta / nn;
}

namespace {

struct SliceEstimator {
  const GroupTangentMetric* metric;
  Mat basis;  // n x (n-1), Euclidean-orthonormal columns spanning the plane
  Vec wlo, whi;

  double area(const Vec& z, int points, std::uint64_t seed, double* se) const {
    const int d = static_cast<int>(wlo.size());
    long cells_per_axis = std::max<long>(
        1, static_cast<long>(std::floor(std::pow(points / 4.0, 1.0 / d))));
    long total_cells = 1;
    for (int i = 0; i < d; ++i) total_cells *= cells_per_axis;
    Vec h = (whi - wlo) / static_cast<double>(cells_per_axis);
    double cell_vol = 1.0;
    for (int i = 0; i < d; ++i) cell_vol *= h[i];

    CounterRng rng(seed, 101);
    std::vector<double> hits(static_cast<size_t>(total_cells), 0.0);
    parallel_for(static_cast<size_t>(total_cells), [&](size_t flat) {
      size_t rem = flat;
      Vec base(d);
      for (int i = d - 1; i >= 0; --i) {
        long ix = static_cast<long>(rem % static_cast<size_t>(cells_per_axis));
        rem /= static_cast<size_t>(cells_per_axis);
        base[i] = wlo[i] + ix * h[i];
      }
      int hit = 0;
      for (int t = 0; t < 4; ++t) {
        Vec w(d);
        for (int i = 0; i < d; ++i)
          w[i] = base[i] + h[i] * rng.uniform(flat * 4ull * d + t * d + i);
        Vec x = basis * w;
        if (metric->distance(z, x) <= 1.0) ++hit;
      }
      hits[flat] = hit / 4.0;
    });
    double acc = 0.0, var = 0.0;
    for (double p : hits) {
      acc += p * cell_vol;
      var += cell_vol * cell_vol * p * (1.0 - p) / 4.0;
    }
    if (se) *se = std::sqrt(var);
    return acc;
  }
};

}  // namespace

SphericalFactorResult spherical_factor(const GroupTangentMetric& metric,
                                       const Vec& plane_normal,
                                       const SphericalFactorParams& params) {
  const int n = metric.frame().dim();
  Vec eta = plane_normal / plane_normal.norm();

  // Euclidean-orthonormal basis of the hyperplane.
  Mat basis(n, n - 1);
  {
    Mat full(n, n);
    full.col(0) = eta;
    int filled = 1;
    for (int j = 0; j < n && filled < n; ++j) {
      Vec v = Vec::Unit(n, j);
      for (int i = 0; i < filled; ++i) v -= full.col(i).dot(v) * full.col(i);
      if (v.norm() > 1e-6) full.col(filled++) = v / v.norm();
    }
    basis = full.rightCols(n - 1);
  }

  Vec ext = metric.unit_ball_extents();
  SliceEstimator est;
  est.metric = &metric;
  est.basis = basis;
  est.wlo = Vec(n - 1);
  est.whi = Vec(n - 1);
  for (int k = 0; k < n - 1; ++k) {
    double b = 0.0;
    for (int j = 0; j < n; ++j)
      b += std::abs(basis(j, k)) * ext[j] * std::pow(2.0, metric.frame().weights[j]);
    est.wlo[k] = -b;
    est.whi[k] = b;
  }

  SphericalFactorResult out;
  // Coarse weighted grid over the closed unit ball.
  std::vector<Vec> zs;
  {
    std::vector<int> idx(n, 0);
    const int g = params.coarse_grid;
    while (true) {
      Vec z(n);
      for (int i = 0; i < n; ++i)
        z[i] = ext[i] * (2.0 * idx[i] / (g - 1) - 1.0);
      if (metric.origin_distance(z) <= 1.0) zs.push_back(z);
      int pos = n - 1;
      while (pos >= 0 && idx[pos] == g - 1) idx[pos--] = 0;
      if (pos < 0) break;
      ++idx[pos];
    }
  }
  double best = -1.0;
  Vec zbest = Vec::Zero(n);
  for (const auto& z : zs) {
    double a = est.area(z, params.coarse_points, params.seed, nullptr);
    if (a > best) {
      best = a;
      zbest = z;
    }
  }
  out.search_trace.emplace_back(zbest, best);

  // Compass pattern search at medium resolution.
  Vec step = ext / 4.0;
  double cur = est.area(zbest, params.pattern_points, params.seed, nullptr);
  while (step.maxCoeff() > params.z_tol) {
    bool improved = false;
    for (int i = 0; i < n; ++i)
      for (double s : {-1.0, 1.0}) {
        Vec cand = zbest;
        cand[i] += s * step[i];
        if (metric.origin_distance(cand) > 1.0) continue;
        double a = est.area(cand, params.pattern_points, params.seed, nullptr);
        if (a > cur + 1e-12) {
          cur = a;
          zbest = cand;
          improved = true;
        }
      }
    if (!improved) step *= 0.5;
  }
  out.search_trace.emplace_back(zbest, cur);

  double se = 0.0;
  out.beta = est.area(zbest, params.mc_points, params.seed, &se);
  out.standard_error = se;
  out.maximizer = zbest;
  out.maximizer_on_boundary = metric.origin_distance(zbest) > 1.0 - 2.0 * params.z_tol;
  return out;
}

FedererDensityResult federer_density(const HypersurfacePatch& patch, const VolumeForm& omega,
                                     const PrivilegedFrame& frame, const Vec& p,
                                     std::span<const double> radii,
                                     const DistanceField& dist,
                                     const FedererParams& params) {
  const int n = frame.dim();
  FedererDensityResult out;
  out.radii.assign(radii.begin(), radii.end());

  // Candidate center directions in tangent coordinates (p itself first).
  std::vector<Vec> dirs{Vec::Zero(n)};
  for (const auto& d : params.extra_center_dirs) dirs.push_back(d);
  {
    int k = 0;
    while (static_cast<int>(dirs.size()) < params.centers) {
      Vec z(n);
      for (int i = 0; i < n; ++i)
        z[i] = 2.0 * halton(static_cast<std::uint64_t>(k), static_cast<unsigned>(2 + i)) - 1.0;
      z *= 0.85;
      dirs.push_back(z);
      ++k;
    }
  }

  FlowConfig cfg;
  for (double r : radii) {
    double sup = 0.0;
    for (const auto& zdir : dirs) {
      Vec y = zdir.isZero(0.0)
                  ? p
                  : exp_coords(frame, p, dilate(zdir, frame.weights, r), cfg);
      // p must lie in the closed ball B(y, r); shrink the center toward p
      // until it does.
      bool usable = true;
      for (int shrink = 0; dist.distance(y, p) > r; ++shrink) {
        if (shrink == 4) {
          usable = false;
          break;
        }
        y = exp_coords(frame, p,
                       dilate(zdir * std::pow(0.8, shrink + 1), frame.weights, r), cfg);
      }
      if (!usable) continue;
      MeasureRegion region = MeasureRegion::ball(y, r, dist);
      SurfaceMeasureResult sm = sr_surface_measure(patch, omega, frame, region, params.grid);
      out.boundary_warning = out.boundary_warning || sm.boundary_warning;
      if (sm.value > 0)
        out.quadrature_error = std::max(
            out.quadrature_error, sm.error_indicator / std::max(sm.value, 1e-300));
      sup = std::max(sup, sm.value / std::pow(r, frame.Q - 1));
    }
    out.sup_per_radius.push_back(sup);
  }
  out.value = out.sup_per_radius.empty() ? 0.0 : out.sup_per_radius.back();
  return out;
}

DoubleBlowupReport double_blowup_check(const HypersurfacePatch& patch,
                                       const VolumeForm& omega,
                                       const PrivilegedFrame& frame, const Vec& p,
                                       const DoubleBlowupParams& params) {
  const int n = frame.dim();
  HorizontalNormal hn = horizontal_normal(patch, frame, p);
  if (hn.characteristic)
    throw Error("double_blowup_check: characteristic point " + point_str(p));

  // Adapted frame: first horizontal field along the horizontal normal.
  Mat G = frame.metric_matrix(p);
  Mat H = field_matrix(frame.horizontal(), p);
  Vec c = H.transpose() * G * (hn.nu_D / hn.nu_D_norm);
  Mat R = rotation_with_first_row(c);
  std::vector<PolyVectorField> rotated;
  for (int i = 0; i < frame.m; ++i) {
    PolyVectorField f(n);
    for (int j = 0; j < frame.m; ++j) f = f + frame.fields[j] * R(i, j);
    rotated.push_back(f);
  }
  PrivilegedFrame frame_rot =
      build_privileged_frame(rotated, MetricExtension::frame_orthonormal(), p);

  NilpotentFrame nf_rot = nilpotent_approximation_at(frame_rot, p, params.cfg);
  GroupTangentMetric tangent(nf_rot);

  DoubleBlowupReport rep;
  rep.beta_detail = spherical_factor(tangent, Vec::Unit(n, 0), params.factor);
  rep.beta = rep.beta_detail.beta;
  rep.beta_se = rep.beta_detail.standard_error;
  rep.volume_norm_at_p = volume_norm(omega, frame_rot, p);
  rep.rhs = rep.volume_norm_at_p * rep.beta;

  // Distance field for ball membership: tangent metric when the manifold is
  // its own group, shooting fallback otherwise.
  NilpotentFrame nf0 = nilpotent_approximation_at(frame, frame.base_point, params.cfg);
  std::unique_ptr<DistanceField> fallback;
  std::unique_ptr<GroupTangentMetric> group;
  const DistanceField* dist = nullptr;
  if (frame_is_group(frame, nf0)) {
    group = std::make_unique<GroupTangentMetric>(nf0);
    dist = group.get();
  } else {
    fallback = std::make_unique<ShootingDistanceField>(frame, ChartBox::centered(n, 1e6),
                                                       params.cfg);
    dist = fallback.get();
  }

  FedererParams fp = params.federer;
  fp.extra_center_dirs.push_back(rep.beta_detail.maximizer);
  fp.extra_center_dirs.push_back(Vec(-rep.beta_detail.maximizer));
  std::vector<double> radii = params.radii;
  if (radii.empty()) radii = {0.3, 0.2, 0.12, 0.08};
  rep.federer_detail =
      federer_density(patch, omega, frame_rot, p, radii, *dist, fp);
  rep.federer = rep.federer_detail.value;
  rep.relative_discrepancy =
      std::abs(rep.federer - rep.rhs) / std::max(std::abs(rep.rhs), 1e-300);
  return rep;
}

Vec BumpField::eval(const Vec& x) const { return bump(x) * Y.eval(x); }

double BumpField::bump(const Vec& x) const {
  double t = 1.0 - (x - center).squaredNorm() / (radius * radius);
  return t > 0 ? t * t * t * t : 0.0;
}

Vec BumpField::bump_grad(const Vec& x) const {
  double t = 1.0 - (x - center).squaredNorm() / (radius * radius);
  if (t <= 0) return Vec::Zero(x.size());
  return (-8.0 * t * t * t / (radius * radius)) * (x - center);
}

double BumpField::div_omega(const VolumeForm& omega, const Vec& x) const {
  double psi = bump(x);
  Vec grad_psi = bump_grad(x);
  Vec Yx = Y.eval(x);
  double divY = Y.divergence().eval(x);
  double a = omega.eval(x);
  Vec grad_a(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    grad_a[i] = omega.density.derivative(static_cast<int>(i)).eval(x);
  // div_omega X = div X + X(log a)
  double divX = psi * divY + grad_psi.dot(Yx);
  return divX + psi * Yx.dot(grad_a) / a;
}

namespace {

// Tensor polar grid over the unit sphere: n-2 polar angles (GL on [0,pi])
// and one azimuth (uniform, periodic). Returns nodes and weights including
// the spherical Jacobian.
void sphere_quadrature(int n, int k, std::vector<Vec>& dirs, std::vector<double>& wgts) {
  // Gauss-Legendre nodes on [-1,1] by Newton on P_k.
  std::vector<double> gx(k), gw(k);
  for (int i = 0; i < k; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (k + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= k; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = k * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= k; ++j) {
      double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    double dp = k * (x * p1 - p0) / (x * x - 1.0);
    gx[i] = x;
    gw[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }

  dirs.clear();
  wgts.clear();
  if (n == 2) {
    int A = 4 * k;
    for (int j = 0; j < A; ++j) {
      double phi = 2.0 * M_PI * j / A;
      Vec u(2);
      u << std::cos(phi), std::sin(phi);
      dirs.push_back(u);
      wgts.push_back(2.0 * M_PI / A);
    }
    return;
  }
  // theta_i = acos(gx) for the first polar angle; remaining polar angles by
  // GL on [0,pi] with explicit sin^power Jacobians; azimuth uniform.
  std::vector<std::vector<double>> ang_nodes, ang_wgts;
  for (int d = 0; d < n - 2; ++d) {
    std::vector<double> nodes(k), ws(k);
    for (int i = 0; i < k; ++i) {
      nodes[i] = M_PI * 0.5 * (gx[i] + 1.0);
      ws[i] = gw[i] * M_PI * 0.5;
    }
    ang_nodes.push_back(nodes);
    ang_wgts.push_back(ws);
  }
  int A = 2 * k;
  std::vector<int> idx(static_cast<size_t>(n - 2), 0);
  while (true) {
    for (int j = 0; j < A; ++j) {
      std::vector<double> ang;
      double w = 2.0 * M_PI / A;
      for (int d = 0; d < n - 2; ++d) {
        ang.push_back(ang_nodes[d][idx[d]]);
        w *= ang_wgts[d][idx[d]] *
             std::pow(std::sin(ang_nodes[d][idx[d]]), n - 2 - d);
      }
      ang.push_back(2.0 * M_PI * j / A);
      Vec u(n);
      double s = 1.0;
      for (int d = 0; d < n - 2; ++d) {
        u[d] = s * std::cos(ang[d]);
        s *= std::sin(ang[d]);
      }
      u[n - 2] = s * std::cos(ang[n - 1 - 1]);
      u[n - 1] = s * std::sin(ang[n - 2]);
      dirs.push_back(u);
      wgts.push_back(w);
    }
    int pos = n - 3;
    while (pos >= 0 && idx[pos] == k - 1) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }
}

}  // namespace

DivergenceCheckResult divergence_identity_check(const VolumeForm& omega,
                                                const PrivilegedFrame& frame,
                                                const Vec& ball_center, double ball_radius,
                                                const BumpField& X, int quad,
                                                const MetricExtension* metric_override) {
  const int n = frame.dim();
  std::vector<Vec> dirs;
  std::vector<double> wgts;
  sphere_quadrature(n, quad, dirs, wgts);

  // Radial Gauss-Legendre on [0, R].
  std::vector<double> rx(static_cast<size_t>(quad)), rw(static_cast<size_t>(quad));
  {
    for (int i = 0; i < quad; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (quad + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= quad; ++j) {
          double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        double dp = quad * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= quad; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = quad * (x * p1 - p0) / (x * x - 1.0);
      rx[static_cast<size_t>(i)] = ball_radius * 0.5 * (x + 1.0);
      rw[static_cast<size_t>(i)] =
          ball_radius * 0.5 * 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  DivergenceCheckResult out;
  // Volume side: integral of a * div_omega X over the ball.
  double vol = 0.0;
  for (size_t di = 0; di < dirs.size(); ++di)
    for (int ri = 0; ri < quad; ++ri) {
      double r = rx[static_cast<size_t>(ri)];
      Vec x = ball_center + r * dirs[di];
      vol += wgts[di] * rw[static_cast<size_t>(ri)] * std::pow(r, n - 1) *
             X.div_omega(omega, x) * omega.eval(x);
    }
  out.volume_integral = vol;

  // Boundary side: integral of a * g(X, nu_g) dsigma_g over the sphere.
  double bd = 0.0;
  for (size_t di = 0; di < dirs.size(); ++di) {
    Vec u = dirs[di];
    Vec s = ball_center + ball_radius * u;
    Mat G = metric_at(frame, s, metric_override);
    Eigen::LDLT<Mat> ldlt(G);
    Vec Ginv_u = ldlt.solve(u);
    Vec nu_g = Ginv_u / std::sqrt(u.dot(Ginv_u));
    // Metric area element relative to the Euclidean one: the Euclidean
    // element is already in wgts (R^{n-1} factor below); correct by
    // sqrt(det(J^T G J)) / sqrt(det(J^T J)) via the tangent projector.
    // Tangent basis: complete u to an orthonormal frame.
    Mat T(n, n - 1);
    {
      Mat full(n, n);
      full.col(0) = u;
      int filled = 1;
      for (int j = 0; j < n && filled < n; ++j) {
        Vec v = Vec::Unit(n, j);
        for (int i = 0; i < filled; ++i) v -= full.col(i).dot(v) * full.col(i);
        if (v.norm() > 1e-8) full.col(filled++) = v / v.norm();
      }
      T = full.rightCols(n - 1);
    }
    double metric_ratio = std::sqrt((T.transpose() * G * T).determinant());
    bd += wgts[di] * std::pow(ball_radius, n - 1) * omega.eval(s) *
          (X.eval(s).transpose() * G * nu_g)(0, 0) * metric_ratio;
  }
  out.boundary_integral = bd;
  double scale = std::max({std::abs(vol), std::abs(bd), 1e-12});
  out.relative_mismatch = std::abs(vol - bd) / scale;
  return out;
}

ExtensionIndependenceResult extension_independence_check(
    const HypersurfacePatch& patch, const VolumeForm& omega, const PrivilegedFrame& frame,
    const MeasureRegion& region, const MetricExtension& metric_A,
    const MetricExtension& metric_B, int grid) {
  ExtensionIndependenceResult out;
  // Both extensions must restrict to the SR metric on the horizontal bundle.
  CounterRng rng(515, 2);
  const int n = frame.dim();
  for (int t = 0; t < 8; ++t) {
    Vec u(patch.lo.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u[i] = patch.lo[i] +
             (patch.hi[i] - patch.lo[i]) *
                 rng.uniform(static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(u.size()) + static_cast<std::uint64_t>(i));
    Vec q = patch.param(u);
    Mat H = field_matrix(frame.horizontal(), q);
    for (const MetricExtension* me : {&metric_A, &metric_B}) {
      Mat G = me->mode == MetricMode::kUserMatrix ? me->eval(q) : frame.metric_matrix(q);
      double dev = (H.transpose() * G * H - Mat::Identity(frame.m, frame.m))
                       .cwiseAbs()
                       .maxCoeff();
      out.restriction_residual = std::max(out.restriction_residual, dev);
    }
  }
  if (out.restriction_residual > 1e-6)
    throw Error("extension_independence_check: extension fails horizontal-restriction "
                "validation, residual " +
                std::to_string(out.restriction_residual));
  (void)n;

  SurfaceMeasureResult a =
      sr_surface_measure(patch, omega, frame, region, grid, &metric_A);
  SurfaceMeasureResult b =
      sr_surface_measure(patch, omega, frame, region, grid, &metric_B);
  out.value_A = a.value;
  out.value_B = b.value;
  out.relative_discrepancy =
      std::abs(a.value - b.value) / std::max({std::abs(a.value), std::abs(b.value), 1e-300});
  return out;
}

}  // namespace srgeo
