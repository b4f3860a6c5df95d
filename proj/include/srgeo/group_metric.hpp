#pragma once

#include <memory>

#include "srgeo/distance.hpp"
#include "srgeo/nilpotent.hpp"

namespace srgeo {

// CC-distance oracle used by measure-theoretic estimators that fire many
// membership tests.
class DistanceField {
 public:
  virtual ~DistanceField() = default;
  virtual double distance(const Vec& a, const Vec& b) const = 0;
  // Axis-aligned bounding box of the closed ball B(center, r).
  virtual ChartBox ball_box(const Vec& center, double r) const = 0;
};

// Tangent-group distance: exact polynomial group product (by jet transport)
// plus a homogeneous-sphere table of origin distances, so a membership test
// costs an interpolation instead of a boundary-value solve.
class GroupTangentMetric : public DistanceField {
 public:
  struct Options {
    int polar_nodes = 80;    // per polar angle
    int azimuth_nodes = 96;  // wrap-around angle
    int cloud_count = 320;   // unit-sphere geodesic endpoints kept for boxes
    FlowConfig flow;
  };

  explicit GroupTangentMetric(const NilpotentFrame& nf, const Options& opts = {});

  double origin_distance(const Vec& x) const;
  double distance(const Vec& a, const Vec& b) const override;
  ChartBox ball_box(const Vec& center, double r) const override;

  // Group product a . x in exponential coordinates; inverse of a is -a.
  Vec translate(const Vec& a, const Vec& x) const;
  const std::vector<Polynomial>& product_polynomials() const { return product_; }
  const NilpotentFrame& frame() const { return nf_; }
  bool abelian() const { return abelian_; }
  // Per-axis extents of the unit ball at the origin.
  Vec unit_ball_extents() const { return extents_; }
  double homogeneous_norm(const Vec& x) const;
  // Table accuracy, measured against fresh boundary-value solves.
  double table_error_estimate() const { return table_error_; }

 private:
  NilpotentFrame nf_;
  PrivilegedFrame pframe_;
  bool abelian_ = false;
  std::vector<Polynomial> product_;  // 2n-variable coordinates of a . x
  Vec extents_;
  std::vector<Mat> cloud_;  // columns: unit-sphere points (one matrix; kept as 1 entry)
  std::vector<int> grid_shape_;
  std::vector<double> rho_;  // row-major over polar x azimuth angles
  double table_error_ = 0.0;
  Options opts_;

  double rho_lookup(const Vec& unit_dir) const;
  void build_product();
  void build_table();
};

// True when the manifold frame already equals its own tangent group at the
// base point (coefficient-wise), e.g. Heisenberg or Engel group frames.
bool frame_is_group(const PrivilegedFrame& frame, const NilpotentFrame& nf,
                    double tol = 1e-9);

// Fallback distance field backed by the shooting engine (slow; for frames
// without detected group structure).
class ShootingDistanceField : public DistanceField {
 public:
  ShootingDistanceField(const PrivilegedFrame& frame, ChartBox domain, FlowConfig cfg = {},
                        ShootingParams params = {});
  double distance(const Vec& a, const Vec& b) const override;
  ChartBox ball_box(const Vec& center, double r) const override;

 private:
  const PrivilegedFrame& frame_;
  ChartBox domain_;
  FlowConfig cfg_;
  ShootingParams params_;
  OracleParams oracle_params_;
};

}  // namespace srgeo
