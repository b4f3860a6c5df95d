#pragma once

#include <optional>
#include <span>
#include <vector>

#include "srgeo/vector_field.hpp"

namespace srgeo {

enum class MetricMode { kFrameOrthonormal, kUserMatrix };

// Riemannian extension of the SR metric. Frame-orthonormal mode declares the
// constructed privileged frame orthonormal everywhere; user-matrix mode
// carries an SPD polynomial matrix G(x).
struct MetricExtension {
  MetricMode mode = MetricMode::kFrameOrthonormal;
  std::vector<std::vector<Polynomial>> matrix_field;  // n x n, user mode only

  static MetricExtension frame_orthonormal() { return {}; }
  static MetricExtension user_matrix(std::vector<std::vector<Polynomial>> G);

  Mat eval(const Vec& q) const;  // user mode only
};

struct FlagReport {
  std::vector<int> growth;  // n_1 <= ... <= n_s = n at the first probe
  int step = 0;
  bool equiregular = false;
  std::optional<Vec> mismatch_point;  // first probe whose growth differs
  std::vector<int> mismatch_growth;
};

// Growth vector of the flag D^{k+1} = D^k + [D^k, D] at each probe point;
// ranks use a singular-value cutoff of 1e-9 times the largest singular value.
FlagReport compute_flag(std::span<const PolyVectorField> horizontal,
                        std::span<const Vec> probe_points, int max_step);

struct PrivilegedFrame {
  std::vector<PolyVectorField> fields;  // n fields, first m horizontal
  int m = 0;                            // rank of the distribution
  std::vector<int> weights;             // w_1..w_n
  std::vector<int> growth;              // n_1..n_s
  int step = 0;
  int Q = 0;                                    // homogeneous dimension
  std::vector<std::vector<int>> bracket_recipe;  // 0-based, entries for i >= m
  Vec base_point;
  MetricExtension metric;

  int dim() const { return static_cast<int>(fields.size()); }
  std::span<const PolyVectorField> horizontal() const {
    return {fields.data(), static_cast<size_t>(m)};
  }

  // Columns X_1(q)..X_n(q).
  Mat frame_matrix(const Vec& q) const { return field_matrix(fields, q); }
  // G(q) of the metric extension; frame-orthonormal mode gives (A A^T)^{-1}.
  Mat metric_matrix(const Vec& q) const;
  // Columns form a g-orthonormal frame at q adapted to the flag
  // (pointwise Gram-Schmidt under the user-matrix extension).
  Mat orthonormal_frame_at(const Vec& q) const;
};

struct FrameBuildOptions {
  int max_step = 6;
  double probe_radius = 0.1;  // offsets of the internal equiregularity probes
  double orthonormal_tol = 1e-8;
};

// Completes the horizontal frame with iterated brackets (lexicographic
// candidate order, greedy residual pivoting) and orthonormalizes the
// completion at base_point against the metric extension.
PrivilegedFrame build_privileged_frame(std::span<const PolyVectorField> horizontal,
                                       const MetricExtension& metric, const Vec& base_point,
                                       const FrameBuildOptions& opts = {});

// g_q(v, w) under the frame's metric extension.
double evaluate_metric(const MetricExtension& metric, const PrivilegedFrame& frame,
                       const Vec& q, const Vec& v, const Vec& w);

// Polynomial SPD matrix of the extension that declares
// (X_1,...,X_m, s X_{m+1},..., s X_n) orthonormal, i.e.
// G = A^{-T} D^{-2} A^{-1} with D = diag(1,..,1,s,..,s). Requires the frame
// determinant to be a nonzero constant (adjugate inverse stays polynomial).
std::vector<std::vector<Polynomial>> scaled_extension_matrix(const PrivilegedFrame& frame,
                                                             double vertical_scale);

}  // namespace srgeo
