#pragma once

#include <functional>
#include <optional>

#include "srgeo/group_metric.hpp"

namespace srgeo {

// Positive volume form a(x) dx^1 ^ ... ^ dx^n.
struct VolumeForm {
  Polynomial density;
  static VolumeForm lebesgue(int n) { return {Polynomial::constant(n, 1.0)}; }
  double eval(const Vec& q) const { return density.eval(q); }
};

// Oriented hypersurface patch: parametrization over a box I in R^{n-1},
// with an implicit polynomial description when available.
struct HypersurfacePatch {
  std::function<Vec(const Vec&)> param;     // I -> R^n
  std::function<Mat(const Vec&)> dparam;    // n x (n-1)
  Vec lo, hi;                               // parameter box I
  double orientation = 1.0;
  std::optional<Polynomial> implicit_f;     // f = 0 on the patch
  std::vector<int> graph_axes;              // param axes when graph-form, else empty
  int graph_axis = -1;                      // solved coordinate when graph-form

  // x_axis = phi(other coordinates); parameters are the remaining coordinates.
  static HypersurfacePatch graph(int n, int axis, const Polynomial& phi_of_params,
                                 const Vec& lo, const Vec& hi, double orientation = 1.0);
};

double volume_norm(const VolumeForm& omega, const PrivilegedFrame& frame, const Vec& q,
                   const MetricExtension* metric_override = nullptr);

struct HorizontalNormal {
  Vec nu;        // g-unit normal
  Vec nu_D;      // projection onto the distribution
  double nu_D_norm = 0.0;
  bool characteristic = false;
};

HorizontalNormal horizontal_normal(const HypersurfacePatch& patch,
                                   const PrivilegedFrame& frame, const Vec& q,
                                   const MetricExtension* metric_override = nullptr);

struct MeasureRegion {
  enum class Kind { kBox, kBall } kind = Kind::kBox;
  ChartBox box;
  Vec center;
  double radius = 0.0;
  const DistanceField* dist = nullptr;

  static MeasureRegion box_region(ChartBox b);
  static MeasureRegion ball(const Vec& center, double radius, const DistanceField& dist);
};

struct SurfaceMeasureResult {
  double value = 0.0;
  double error_indicator = 0.0;
  double boundary_cell_fraction = 0.0;
  bool boundary_warning = false;  // > 20% of cells cut by the region boundary
};

// Integral of |omega|_g |nu_D|_g over the patch restricted to the region,
// by tensor midpoint quadrature at grid and 2x grid with Richardson
// extrapolation.
SurfaceMeasureResult sr_surface_measure(const HypersurfacePatch& patch,
                                        const VolumeForm& omega,
                                        const PrivilegedFrame& frame,
                                        const MeasureRegion& region, int grid,
                                        const MetricExtension* metric_override = nullptr);

struct SphericalFactorResult {
  double beta = 0.0;
  Vec maximizer;
  double standard_error = 0.0;
  std::vector<std::pair<Vec, double>> search_trace;
  bool maximizer_on_boundary = false;
};

struct SphericalFactorParams {
  int mc_points = 200000;
  int coarse_grid = 11;   // per-axis z-candidates
  int coarse_points = 2000;
  int pattern_points = 20000;
  double z_tol = 1e-2;
  std::uint64_t seed = 1;
};

// Spherical factor: max over ball centers z of the (n-1)-dimensional measure
// of hyperplane slices of the tangent-group unit ball. The hyperplane is
// dF0^{-1}(Pi(nu)) passed via its Euclidean normal.
SphericalFactorResult spherical_factor(const GroupTangentMetric& metric,
                                       const Vec& plane_normal,
                                       const SphericalFactorParams& params);

// Convenience: hyperplane normal A(p)^T G(p) nu from frame data.
Vec spherical_factor_plane_normal(const PrivilegedFrame& frame, const Vec& p,
                                  const Vec& nu);

struct FedererDensityResult {
  double value = 0.0;                  // sup over centers at the smallest radius
  std::vector<double> radii;
  std::vector<double> sup_per_radius;  // stabilization trend
  double quadrature_error = 0.0;
  bool boundary_warning = false;
};

struct FedererParams {
  int centers = 9;
  int grid = 48;
  std::vector<Vec> extra_center_dirs;  // unit-ball points; mapped to candidate centers
};

// Spherical Federer (Q-1)-density of the SR surface measure at p, with
// diam(B) taken as 2r (Thm-5.3 asymptotics; callers cross-check separately).
FedererDensityResult federer_density(const HypersurfacePatch& patch, const VolumeForm& omega,
                                     const PrivilegedFrame& frame, const Vec& p,
                                     std::span<const double> radii,
                                     const DistanceField& dist, const FedererParams& params);

struct DoubleBlowupReport {
  double federer = 0.0;
  double volume_norm_at_p = 0.0;
  double beta = 0.0;
  double beta_se = 0.0;
  double rhs = 0.0;  // |omega(p)| * beta
  double relative_discrepancy = 0.0;
  FedererDensityResult federer_detail;
  SphericalFactorResult beta_detail;
};

struct DoubleBlowupParams {
  std::vector<double> radii;  // empty: defaults scaled from the geometry
  FedererParams federer;
  SphericalFactorParams factor;
  FlowConfig cfg;
};

DoubleBlowupReport double_blowup_check(const HypersurfacePatch& patch,
                                       const VolumeForm& omega,
                                       const PrivilegedFrame& frame, const Vec& p,
                                       const DoubleBlowupParams& params);

// Smooth compactly-supported test field psi(x) Y(x) with
// psi = max(0, 1 - |x-c|^2/R^2)^4.
struct BumpField {
  Vec center;
  double radius = 1.0;
  PolyVectorField Y;

  Vec eval(const Vec& x) const;
  double bump(const Vec& x) const;
  Vec bump_grad(const Vec& x) const;
  // div_omega X = div X + X(log a) evaluated pointwise.
  double div_omega(const VolumeForm& omega, const Vec& x) const;
};

struct DivergenceCheckResult {
  double volume_integral = 0.0;
  double boundary_integral = 0.0;
  double relative_mismatch = 0.0;
};

// Divergence identity over a Euclidean ball domain, both sides by
// independent deterministic quadratures (polar tensor Gauss-Legendre).
DivergenceCheckResult divergence_identity_check(const VolumeForm& omega,
                                                const PrivilegedFrame& frame,
                                                const Vec& ball_center, double ball_radius,
                                                const BumpField& X, int quad = 48,
                                                const MetricExtension* metric_override = nullptr);

struct ExtensionIndependenceResult {
  double value_A = 0.0;
  double value_B = 0.0;
  double relative_discrepancy = 0.0;
  double restriction_residual = 0.0;  // worst horizontal Gram deviation
};

ExtensionIndependenceResult extension_independence_check(
    const HypersurfacePatch& patch, const VolumeForm& omega, const PrivilegedFrame& frame,
    const MeasureRegion& region, const MetricExtension& metric_A,
    const MetricExtension& metric_B, int grid = 64);

}  // namespace srgeo
