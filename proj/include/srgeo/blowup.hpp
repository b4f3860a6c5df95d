#pragma once

#include <cstdint>

#include "srgeo/distance.hpp"
#include "srgeo/nilpotent.hpp"

namespace srgeo {

// Shared per-manifold state for the convergence experiments.
struct BlowupContext {
  const PrivilegedFrame* frame = nullptr;
  ChartBox domain;
  FlowConfig cfg;
  double oracle_defect_coeff = 3.0;
};

// (1/r) d(F_q(delta_r x), F_q(delta_r y)), the rescaled local distance
// (computed through the chart isometry on the original polynomial fields).
double rescaled_distance(const BlowupContext& ctx, const Vec& q, double r, const Vec& x,
                         const Vec& y);

struct ConvergenceReport {
  std::vector<double> radii;          // strictly decreasing
  std::vector<double> sup_deviation;  // per radius, sup over q and pairs
  Mat per_q;                          // radii x q
  bool monotone = false;
  double final_deviation = std::numeric_limits<double>::infinity();
  std::string sample_desc;
  int fallback_count = 0;  // pairs where shooting needed the oracle
};

// Thm-4.2(2)-style experiment: sup |(1/r) d(F_q(delta_r x), F_q(delta_r y))
// - d_hat_q(x,y)| over sampled pairs, per radius and blow-up point.
ConvergenceReport distance_convergence(const BlowupContext& ctx,
                                       std::span<const Vec> q_list,
                                       std::span<const double> radii, int pair_count,
                                       double box_scale, std::uint64_t seed);

struct FrameConvergenceReport {
  std::vector<double> radii;
  std::vector<double> deviation;        // cumulative over derivative orders
  std::vector<double> halving_ratios;   // deviation(r_k) / deviation(r_{k+1})
  bool ratios_in_band = false;          // O(r) remainder: ratios within [1.5, 2.5]
  bool monotone = false;
};

FrameConvergenceReport frame_convergence(const BlowupContext& ctx, const Vec& q,
                                         std::span<const double> radii, double box_scale,
                                         int derivative_order);

struct IsometryFit {
  double epsilon = 0.0;
  double linearity_residual = 0.0;    // sup |H_eps(x) - L x|
  double orthogonality_residual = 0.0;  // |L^T L - I|
  double off_block_mass = 0.0;
  double dF_prediction_gap = 0.0;  // |L - d(F_Y^{-1} o F_X)(0)|
  double metric_isometry_residual = 0.0;
  Mat fitted;
};

struct IsometryReport {
  std::vector<IsometryFit> fits;  // one per epsilon, in the given order
  Mat predicted;                  // d(F_Y^{-1} o F_X)(0)
  bool residuals_decreasing = false;
};

IsometryReport coordinate_change_isometry(const BlowupContext& ctx_X,
                                          const PrivilegedFrame& frame_Y, const Vec& p,
                                          std::span<const double> epsilons,
                                          double box_scale, int metric_pairs = 12,
                                          std::uint64_t seed = 7);

struct UniformRadiusReport {
  std::vector<double> radius_per_q;
  double inf_radius = 0.0;
};

// R(q) = sup { t : B(q,t) inside F_{q,X}(V_box) }, estimated by bisection on
// boundary samples.
UniformRadiusReport uniform_radius_estimate(const BlowupContext& ctx,
                                            std::span<const Vec> q_list,
                                            const ChartBox& V_box, int sample_count = 24);

struct DiameterReport {
  std::vector<double> radii;
  Mat ratios;  // radii x q, diameter/(2r)
  std::vector<double> min_ratio_per_radius;
  bool in_band = false;        // smallest radius: within [1-eps, 1+1e-3]
  bool nondecreasing = false;  // toward 1 as r shrinks (with slack)
  double epsilon = 0.05;
};

DiameterReport diameter_asymptotics(const BlowupContext& ctx, std::span<const Vec> q_list,
                                    std::span<const double> radii, int count,
                                    double epsilon = 0.05);

}  // namespace srgeo
