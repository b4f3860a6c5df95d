#include "srgeo/blowup.hpp"

#include "srgeo/parallel.hpp"
#include "srgeo/rng.hpp"

namespace srgeo {

namespace {

ChartBox tangent_domain(int n) {
  return ChartBox::centered(n, 64.0);  // tangent group lives on all of R^n
}

ShootingParams tangent_shoot_params() {
  ShootingParams sp;
  sp.attempts = 24;
  sp.enforce_domain = false;
  return sp;
}

double tangent_distance(const PrivilegedFrame& pf, const Vec& x, const Vec& y,
                        const FlowConfig& cfg, const ShootingParams& sp) {
  DistanceQuery dq{&pf, x, y, ChartBox{}, DistanceEngine::kShooting};
  DistanceResult dr = distance_shooting(dq, sp, cfg);
  if (dr.converged) return dr.value;
  OracleParams op;
  op.segments = 16;
  op.defect_coeff = 3.0;
  dr = distance_oracle(dq, op, cfg);
  if (!dr.converged)
    throw Error("tangent distance failed between " + point_str(x) + " and " + point_str(y));
  return dr.value;
}

}  // namespace

double rescaled_distance(const BlowupContext& ctx, const Vec& q, double r, const Vec& x,
                         const Vec& y) {
  const PrivilegedFrame& frame = *ctx.frame;
  Vec a = exp_coords(frame, q, dilate(x, frame.weights, r), ctx.cfg, &ctx.domain);
  Vec b = exp_coords(frame, q, dilate(y, frame.weights, r), ctx.cfg, &ctx.domain);
  DistanceQuery dq{&frame, a, b, ctx.domain, DistanceEngine::kShooting};
  ShootingParams sp;
  DistanceResult dr = distance_shooting(dq, sp, ctx.cfg);
  if (!dr.converged) {
    OracleParams op;
    op.defect_coeff = ctx.oracle_defect_coeff;
    dr = distance_oracle(dq, op, ctx.cfg);
    if (!dr.converged)
      throw Error("rescaled_distance: both engines failed at r=" + std::to_string(r));
  }
  return dr.value / r;
}

ConvergenceReport distance_convergence(const BlowupContext& ctx,
                                       std::span<const Vec> q_list,
                                       std::span<const double> radii, int pair_count,
                                       double box_scale, std::uint64_t seed) {
  const PrivilegedFrame& frame = *ctx.frame;
  const int n = frame.dim();
  ConvergenceReport rep;
  rep.radii.assign(radii.begin(), radii.end());
  rep.per_q = Mat::Zero(static_cast<Eigen::Index>(radii.size()),
                        static_cast<Eigen::Index>(q_list.size()));
  rep.sample_desc = std::to_string(pair_count) + " pairs in the weighted box of scale " +
                    format_number(box_scale) + ", " + std::to_string(q_list.size()) +
                    " blow-up points";

  CounterRng rng(seed, 17);
  std::vector<std::pair<Vec, Vec>> pairs;
  for (int k = 0; k < pair_count; ++k) {
    Vec x(n), y(n);
    for (int i = 0; i < n; ++i) {
      double wscale = box_scale;  // weighted box: |x_i| <= box_scale^{w_i}
      x[i] = std::pow(wscale, frame.weights[i]) *
             rng.uniform(static_cast<std::uint64_t>(k) * 2 * n + i, -1.0, 1.0);
      y[i] = std::pow(wscale, frame.weights[i]) *
             rng.uniform(static_cast<std::uint64_t>(k) * 2 * n + n + i, -1.0, 1.0);
    }
    pairs.emplace_back(x, y);
  }

  struct Cell {
    double sup = 0.0;
    int fallbacks = 0;
  };
  std::vector<Cell> cells(q_list.size());
  std::vector<int> fallback_counts(q_list.size(), 0);

  for (size_t qi = 0; qi < q_list.size(); ++qi) cells[qi] = Cell{};

  // Tangent distances per (q, pair), then manifold distances per radius with
  // warm starts carried across the radius ladder.
  std::vector<std::vector<double>> dhat(q_list.size(),
                                        std::vector<double>(pairs.size(), 0.0));
  parallel_for(q_list.size(), [&](size_t qi) {
    NilpotentFrame nf = nilpotent_approximation_at(frame, q_list[qi], ctx.cfg);
    PrivilegedFrame pf = nf.as_privileged_frame();
    ShootingParams sp = tangent_shoot_params();
    for (size_t k = 0; k < pairs.size(); ++k)
      dhat[qi][k] = tangent_distance(pf, pairs[k].first, pairs[k].second, ctx.cfg, sp);
  });

  struct Warm {
    Vec cov;
    double T = 0.0;
    double r = 0.0;
  };
  std::vector<std::vector<Warm>> warm(q_list.size(), std::vector<Warm>(pairs.size()));

  for (size_t ri = 0; ri < radii.size(); ++ri) {
    const double r = radii[ri];
    parallel_for(q_list.size(), [&](size_t qi) {
      const Vec& q = q_list[qi];
      double sup = 0.0;
      for (size_t k = 0; k < pairs.size(); ++k) {
        Vec a = exp_coords(frame, q, dilate(pairs[k].first, frame.weights, r), ctx.cfg,
                           &ctx.domain);
        Vec b = exp_coords(frame, q, dilate(pairs[k].second, frame.weights, r), ctx.cfg,
                           &ctx.domain);
        DistanceQuery dq{&frame, a, b, ctx.domain, DistanceEngine::kShooting};
        ShootingParams sp;
        sp.attempts = 20;
        Warm& w = warm[qi][k];
        if (w.cov.size()) {
          // Rescale the previous covector: dual coefficients scale with
          // r^{w_i - 1}, durations with r.
          double ratio = r / w.r;
          Eigen::FullPivLU<Mat> lu(frame.frame_matrix(a));
          if (lu.isInvertible()) {
            Vec coef = frame.frame_matrix(a).transpose() * w.cov;
            for (int i = 0; i < n; ++i)
              coef[i] *= std::pow(ratio, frame.weights[i] - 1);
            Vec p0 = lu.inverse().transpose() * coef;
            sp.warm_starts.emplace_back(p0, w.T * ratio);
          }
        }
        DistanceResult dr = distance_shooting(dq, sp, ctx.cfg);
        double value;
        if (dr.converged) {
          value = dr.value;
          w.cov = dr.covector;
          w.T = dr.duration;
          w.r = r;
        } else {
          OracleParams op;
          op.defect_coeff = ctx.oracle_defect_coeff;
          DistanceResult orc = distance_oracle(dq, op, ctx.cfg);
          if (!orc.converged)
            throw Error("distance_convergence: engines failed at radius " +
                        std::to_string(r));
          value = orc.value;
          ++cells[qi].fallbacks;
        }
        sup = std::max(sup, std::abs(value / r - dhat[qi][k]));
      }
      cells[qi].sup = sup;
    });
    double overall = 0.0;
    for (size_t qi = 0; qi < q_list.size(); ++qi) {
      rep.per_q(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(qi)) =
          cells[qi].sup;
      overall = std::max(overall, cells[qi].sup);
      rep.fallback_count += cells[qi].fallbacks;
      cells[qi].fallbacks = 0;
    }
    rep.sup_deviation.push_back(overall);
  }

  rep.monotone = true;
  for (size_t i = 1; i < rep.sup_deviation.size(); ++i)
    if (rep.sup_deviation[i] >= rep.sup_deviation[i - 1]) rep.monotone = false;
  rep.final_deviation = rep.sup_deviation.empty() ? 0.0 : rep.sup_deviation.back();
  return rep;
}

FrameConvergenceReport frame_convergence(const BlowupContext& ctx, const Vec& q,
                                         std::span<const double> radii, double box_scale,
                                         int derivative_order) {
  const PrivilegedFrame& frame = *ctx.frame;
  const int n = frame.dim();
  FrameConvergenceReport rep;
  rep.radii.assign(radii.begin(), radii.end());

  NilpotentFrame nf = nilpotent_approximation_at(frame, q, ctx.cfg);
  const int K = frame.step + std::max(1, derivative_order);
  auto jets = coefficient_jets(frame, q, K, ctx.cfg);
  std::vector<PolyVectorField> chart_fields(n, PolyVectorField(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) chart_fields[i].coeffs[j] = jets[i][j].to_polynomial();

  // Sample grid in the weighted box.
  std::vector<Vec> grid;
  const int per_axis = 3;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    for (int i = 0; i < n; ++i)
      x[i] = std::pow(box_scale, frame.weights[i]) * (idx[i] - 1) / 1.0;
    grid.push_back(x);
    int pos = n - 1;
    while (pos >= 0 && idx[pos] == per_axis - 1) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }

  for (double r : radii) {
    double dev = 0.0;
    // Order 0 through the integrator route (independent of the jet split).
    for (const Vec& x : grid) {
      Mat R = rescaled_frame(frame, q, r, x, ctx.cfg);
      Mat Nh(n, n);
      for (int i = 0; i < n; ++i) Nh.col(i) = nf.fields[i].eval(x);
      dev = std::max(dev, (R - Nh).cwiseAbs().maxCoeff());
    }
    // Derivatives through the jet-truncated polynomials (exact dilation).
    for (int i = 0; i < n && derivative_order > 0; ++i) {
      PolyVectorField resc = chart_fields[i].rescale(frame.weights, r, frame.weights[i]);
      PolyVectorField diff = resc - nf.fields[i];
      for (int j = 0; j < n; ++j) {
        std::vector<Polynomial> level{diff.coeffs[j]};
        for (int ord = 1; ord <= derivative_order; ++ord) {
          std::vector<Polynomial> next;
          for (const auto& p : level)
            for (int ax = 0; ax < n; ++ax) next.push_back(p.derivative(ax));
          level = std::move(next);
          for (const auto& p : level)
            for (const Vec& x : grid) dev = std::max(dev, std::abs(p.eval(x)));
        }
      }
    }
    rep.deviation.push_back(dev);
  }

  rep.monotone = true;
  for (size_t i = 1; i < rep.deviation.size(); ++i) {
    if (rep.deviation[i] >= rep.deviation[i - 1] + 1e-12) rep.monotone = false;
    double num = rep.deviation[i - 1], den = rep.deviation[i];
    rep.halving_ratios.push_back(den > 0 ? num / den : 0.0);
  }
  rep.ratios_in_band = !rep.halving_ratios.empty();
  for (double rt : rep.halving_ratios)
    if (rt < 1.5 || rt > 2.5) rep.ratios_in_band = false;
  return rep;
}

IsometryReport coordinate_change_isometry(const BlowupContext& ctx_X,
                                          const PrivilegedFrame& frame_Y, const Vec& p,
                                          std::span<const double> epsilons,
                                          double box_scale, int metric_pairs,
                                          std::uint64_t seed) {
  const PrivilegedFrame& frame_X = *ctx_X.frame;
  const int n = frame_X.dim();
  IsometryReport rep;

  {
    Eigen::FullPivLU<Mat> lu(frame_Y.frame_matrix(p));
    rep.predicted = lu.solve(frame_X.frame_matrix(p));
  }

  // Weighted-box sample grid.
  std::vector<Vec> grid;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    bool all_zero = true;
    for (int i = 0; i < n; ++i) {
      x[i] = std::pow(box_scale, frame_X.weights[i]) * (idx[i] - 1);
      if (idx[i] != 1) all_zero = false;
    }
    if (!all_zero) grid.push_back(x);
    int pos = n - 1;
    while (pos >= 0 && idx[pos] == 2) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }

  NilpotentFrame nfX = nilpotent_approximation_at(frame_X, p, ctx_X.cfg);
  NilpotentFrame nfY = nilpotent_approximation_at(frame_Y, p, ctx_X.cfg);
  PrivilegedFrame pfX = nfX.as_privileged_frame();
  PrivilegedFrame pfY = nfY.as_privileged_frame();
  ShootingParams tsp = tangent_shoot_params();

  CounterRng rng(seed, 23);
  std::vector<std::pair<Vec, Vec>> mpairs;
  for (int k = 0; k < metric_pairs; ++k) {
    Vec x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = std::pow(box_scale, frame_X.weights[i]) *
             rng.uniform(static_cast<std::uint64_t>(k) * 2 * n + i, -1.0, 1.0);
      y[i] = std::pow(box_scale, frame_X.weights[i]) *
             rng.uniform(static_cast<std::uint64_t>(k) * 2 * n + n + i, -1.0, 1.0);
    }
    mpairs.emplace_back(x, y);
  }
  std::vector<double> dX_pairs(mpairs.size());
  for (size_t k = 0; k < mpairs.size(); ++k)
    dX_pairs[k] = tangent_distance(pfX, mpairs[k].first, mpairs[k].second, ctx_X.cfg, tsp);

  for (double eps : epsilons) {
    IsometryFit fit;
    fit.epsilon = eps;
    std::vector<Vec> hx(grid.size());
    for (size_t g = 0; g < grid.size(); ++g) {
      Vec xe = dilate(grid[g], frame_X.weights, eps);
      Vec point = exp_coords(frame_X, p, xe, ctx_X.cfg, &ctx_X.domain);
      Vec yc = exp_coords_inverse(frame_Y, p, point, ctx_X.cfg);
      hx[g] = dilate(yc, frame_X.weights, 1.0 / eps);
    }
    // Least squares L: minimize sum |H(x) - L x|^2.
    Mat XtX = Mat::Zero(n, n), HX = Mat::Zero(n, n);
    for (size_t g = 0; g < grid.size(); ++g) {
      XtX += grid[g] * grid[g].transpose();
      HX += hx[g] * grid[g].transpose();
    }
    fit.fitted = HX * XtX.inverse();
    for (size_t g = 0; g < grid.size(); ++g)
      fit.linearity_residual =
          std::max(fit.linearity_residual, (hx[g] - fit.fitted * grid[g]).norm());
    fit.orthogonality_residual =
        (fit.fitted.transpose() * fit.fitted - Mat::Identity(n, n)).norm();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (frame_X.weights[i] != frame_X.weights[j])
          fit.off_block_mass += fit.fitted(i, j) * fit.fitted(i, j);
    fit.off_block_mass = std::sqrt(fit.off_block_mass);
    fit.dF_prediction_gap = (fit.fitted - rep.predicted).norm();
    for (size_t k = 0; k < mpairs.size(); ++k) {
      double dY = tangent_distance(pfY, Vec(fit.fitted * mpairs[k].first),
                                   Vec(fit.fitted * mpairs[k].second), ctx_X.cfg, tsp);
      fit.metric_isometry_residual =
          std::max(fit.metric_isometry_residual, std::abs(dY - dX_pairs[k]));
    }
    rep.fits.push_back(fit);
  }
  if (rep.fits.size() >= 2)
    rep.residuals_decreasing = rep.fits.back().orthogonality_residual <
                               rep.fits.front().orthogonality_residual + 1e-12;
  return rep;
}

UniformRadiusReport uniform_radius_estimate(const BlowupContext& ctx,
                                            std::span<const Vec> q_list,
                                            const ChartBox& V_box, int sample_count) {
  const PrivilegedFrame& frame = *ctx.frame;
  UniformRadiusReport rep;
  rep.inf_radius = std::numeric_limits<double>::infinity();
  for (const Vec& q : q_list) {
    auto inside = [&](double t) {
      auto samples = ball_boundary_sample(frame, q, t, sample_count, ctx.cfg, &ctx.domain);
      for (const auto& s : samples) {
        try {
          Vec x = exp_coords_inverse(frame, q, s.point, ctx.cfg);
          if (!V_box.contains(x)) return false;
        } catch (const Error&) {
          return false;
        }
      }
      return true;
    };
    double lo = 0.0, hi = 1e-3;
    try {
      while (inside(hi) && hi < 1e3) {
        lo = hi;
        hi *= 2.0;
      }
    } catch (const Error&) {
      // chart escape while growing: treat current hi as outside
    }
    for (int it = 0; it < 20; ++it) {
      double mid = 0.5 * (lo + hi);
      bool ok = false;
      try {
        ok = inside(mid);
      } catch (const Error&) {
        ok = false;
      }
      (ok ? lo : hi) = mid;
    }
    rep.radius_per_q.push_back(lo);
    rep.inf_radius = std::min(rep.inf_radius, lo);
  }
  return rep;
}

DiameterReport diameter_asymptotics(const BlowupContext& ctx, std::span<const Vec> q_list,
                                    std::span<const double> radii, int count,
                                    double epsilon) {
  const PrivilegedFrame& frame = *ctx.frame;
  DiameterReport rep;
  rep.epsilon = epsilon;
  rep.radii.assign(radii.begin(), radii.end());
  rep.ratios = Mat::Zero(static_cast<Eigen::Index>(radii.size()),
                         static_cast<Eigen::Index>(q_list.size()));
  std::vector<std::pair<size_t, size_t>> cells;
  for (size_t ri = 0; ri < radii.size(); ++ri)
    for (size_t qi = 0; qi < q_list.size(); ++qi) cells.emplace_back(ri, qi);
  parallel_for(cells.size(), [&](size_t ci) {
    auto [ri, qi] = cells[ci];
    DiameterEstimate est =
        diameter_estimate(frame, q_list[qi], radii[ri], count, ctx.domain, ctx.cfg);
    rep.ratios(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(qi)) =
        est.value / (2.0 * radii[ri]);
  });
  for (size_t ri = 0; ri < radii.size(); ++ri)
    rep.min_ratio_per_radius.push_back(
        rep.ratios.row(static_cast<Eigen::Index>(ri)).minCoeff());

  rep.in_band = true;
  double last = rep.min_ratio_per_radius.back();
  double max_all = rep.ratios.maxCoeff();
  if (last < 1.0 - epsilon || max_all > 1.0 + 1e-3) rep.in_band = false;
  rep.nondecreasing = true;
  for (size_t ri = 1; ri < radii.size(); ++ri)
    if (rep.min_ratio_per_radius[ri] < rep.min_ratio_per_radius[ri - 1] - 1e-3)
      rep.nondecreasing = false;
  return rep;
}

}  // namespace srgeo
