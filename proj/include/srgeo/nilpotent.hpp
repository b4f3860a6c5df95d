#pragma once

#include "srgeo/flow.hpp"
#include "srgeo/jet.hpp"

namespace srgeo {

// Delta-homogeneous polynomial frame of the metric tangent group at a point.
struct NilpotentFrame {
  std::vector<PolyVectorField> fields;
  int m = 0;
  std::vector<int> weights;
  std::vector<int> growth;
  int step = 0;
  int Q = 0;
  Vec base_point;
  // c[k](i,j): [X_i, X_j] = sum_k c^k_{ij} X_k.
  std::vector<Mat> structure_constants;
  double split_residual = 0.0;  // largest low-order coefficient discarded from a_ij

  int dim() const { return static_cast<int>(fields.size()); }
  std::span<const PolyVectorField> horizontal() const {
    return {fields.data(), static_cast<size_t>(m)};
  }
  bool abelian() const;
  PrivilegedFrame as_privileged_frame() const;
};

// Weighted-order-K Taylor coefficients at 0 of the coordinate-frame
// coefficients a_ij of the q-centered chart, by transporting jet arguments
// through the flow map and its variational equation. jets[i][j] carries a_ij.
std::vector<std::vector<Jet>> coefficient_jets(const PrivilegedFrame& frame, const Vec& q,
                                               int K, const FlowConfig& cfg);

// b_ij = weighted-homogeneous degree-(w_j - w_i) part of a_ij.
// Throws when the equal-weight blocks deviate from the identity beyond
// 1e-6 (non-privileged input frame).
NilpotentFrame nilpotent_approximation(const std::vector<std::vector<Jet>>& jets,
                                       std::span<const int> weights, const Vec& base_point,
                                       int m);

NilpotentFrame nilpotent_approximation_at(const PrivilegedFrame& frame, const Vec& q,
                                          const FlowConfig& cfg = {});

struct StratifiedCheck {
  bool ok = false;
  double residual = 0.0;
};

struct StratifiedReport {
  StratifiedCheck homogeneity;       // b_ij(delta_r x) = r^{w_j-w_i} b_ij(x)
  StratifiedCheck nilpotency;        // brackets of weighted length > step vanish
  StratifiedCheck layer_generation;  // horizontal brackets span each layer
  StratifiedCheck bracket_closure;   // [X_i,X_j] = sum c^k_{ij} X_k exactly
  StratifiedCheck jacobi;            // structure constants satisfy Jacobi
  bool pass() const {
    return homogeneity.ok && nilpotency.ok && layer_generation.ok && bracket_closure.ok &&
           jacobi.ok;
  }
  double max_residual() const {
    return std::max({homogeneity.residual, nilpotency.residual, layer_generation.residual,
                     bracket_closure.residual, jacobi.residual});
  }
};

StratifiedReport verify_stratified(const NilpotentFrame& nf, double tol = 1e-8);

}  // namespace srgeo
