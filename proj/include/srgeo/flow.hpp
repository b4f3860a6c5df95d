#pragma once

#include <span>

#include "srgeo/frame.hpp"
#include "srgeo/ode.hpp"

namespace srgeo {

// Anisotropic dilation delta_r with coordinate weights.
struct Dilation {
  std::vector<int> weights;
  double r = 1.0;
};

Vec dilate(const Vec& x, const Dilation& d);
Vec dilate(const Vec& x, std::span<const int> weights, double r);

// Axis-aligned chart box; integration aborts when a trajectory escapes it.
struct ChartBox {
  Vec lo, hi;
  static ChartBox centered(int n, double half_width);
  bool contains(const Vec& x, double margin = 0.0) const;
};

// Point of the integral curve of X through q at time t.
Vec flow(const PolyVectorField& X, const Vec& q, double t, const FlowConfig& cfg,
         const ChartBox* box = nullptr);

// First-kind exponential coordinates F_{q,X}(x) = exp(x_1 X_1 + ... + x_n X_n)(q).
Vec exp_coords(const PrivilegedFrame& frame, const Vec& q, const Vec& x,
               const FlowConfig& cfg, const ChartBox* box = nullptr);

// F together with its Jacobian dF(x), from the variational equation.
struct ExpCoordsResult {
  Vec point;
  Mat jacobian;
};
ExpCoordsResult exp_coords_with_jacobian(const PrivilegedFrame& frame, const Vec& q,
                                         const Vec& x, const FlowConfig& cfg,
                                         const ChartBox* box = nullptr);

// Newton inversion of F_{q,X}; throws after max_iter without residual <= tol.
Vec exp_coords_inverse(const PrivilegedFrame& frame, const Vec& q, const Vec& p,
                       const FlowConfig& cfg, double tol = 1e-9, int max_iter = 50);

// Columns are the coordinate-frame vectors (X~_i)(sample) of the q-centered chart.
Mat coordinate_frame(const PrivilegedFrame& frame, const Vec& q, const Vec& sample,
                     const FlowConfig& cfg);

// Columns are X~^{q,r}_i(sample) = r^{w_i} (delta_{1/r})_* X~^q_i (sample).
Mat rescaled_frame(const PrivilegedFrame& frame, const Vec& q, double r, const Vec& sample,
                   const FlowConfig& cfg);

}  // namespace srgeo
