#pragma once

#include <cstdint>
#include <optional>

#include "srgeo/flow.hpp"

namespace srgeo {

enum class DistanceEngine { kOracle, kShooting, kBoth };

struct DistanceQuery {
  const PrivilegedFrame* frame = nullptr;  // horizontal() drives the dynamics
  Vec x, y;
  ChartBox domain;
  DistanceEngine engine = DistanceEngine::kBoth;
};

struct OracleParams {
  int segments = 16;
  int control_grid = 8;
  int refine_rounds = 2;
  // Endpoint-defect-to-distance conversion coefficient; <= 0 calibrates one
  // from local probes (slower, done once per frame by callers that batch).
  double defect_coeff = 0.0;
};

struct ShootingParams {
  int attempts = 30;
  double lambda_hat_max = 6.0;
  int max_newton = 40;
  double endpoint_tol = 1e-10;
  // Optional warm starts (covector, duration), tried before the design.
  std::vector<std::pair<Vec, double>> warm_starts;
  bool enforce_domain = true;
};

struct DistanceResult {
  double value = std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
  std::string engine;
  bool converged = false;
  bool cross_check_ok = true;  // shooting value <= oracle bound * 1.01
  double endpoint_defect = std::numeric_limits<double>::infinity();
  Mat controls;          // m x segments witness (oracle)
  Vec covector;          // initial covector witness (shooting)
  double duration = 0.0; // witness time (shooting)
};

struct GeodesicArc {
  Vec initial_covector;
  double duration = 0.0;
  Mat samples;              // n x (sample_count+1), includes both endpoints
  double hamiltonian_drift = 0.0;  // relative
};

// Hamiltonian dynamics of the normal Pontryagin system for the horizontal
// frame; caches coefficient/derivative polynomials.
class HamiltonianSystem {
 public:
  explicit HamiltonianSystem(std::span<const PolyVectorField> horizontal);

  int n() const { return n_; }
  int m() const { return m_; }
  double hamiltonian(const Vec& x, const Vec& p) const;
  // z = (x, p)
  void rhs(const Vec& z, Vec& dz) const;
  // z followed by d z / d p0 (2n x n, column-major in the flat state)
  void rhs_sensitivity(const Vec& zS, Vec& dzS) const;

 private:
  int n_, m_;
  std::vector<PolyVectorField> X_;
  std::vector<std::vector<std::vector<Polynomial>>> dX_;    // [i][j][k] = d_k X_i,j
  std::vector<std::vector<std::vector<std::vector<Polynomial>>>> d2X_;  // [i][j][k][l]
};

GeodesicArc geodesic_shoot(const PrivilegedFrame& frame, const Vec& q, const Vec& p0,
                           double T, const FlowConfig& cfg, int sample_count = 16);

DistanceResult distance_oracle(const DistanceQuery& q, const OracleParams& params,
                               const FlowConfig& cfg = {});

DistanceResult distance_shooting(const DistanceQuery& q, const ShootingParams& params,
                                 const FlowConfig& cfg = {});

// Engine dispatch per q.engine with cross-validation when both run.
DistanceResult distance(const DistanceQuery& q, const OracleParams& op = {},
                        const ShootingParams& sp = {}, const FlowConfig& cfg = {});

struct BoundarySample {
  Vec point;
  Vec covector;
};

// Endpoints of unit-Hamiltonian geodesics of time r from q, covectors on a
// deterministic sphere design (first 2m entries are the +-horizontal axes).
std::vector<BoundarySample> ball_boundary_sample(const PrivilegedFrame& frame, const Vec& q,
                                                 double r, int count,
                                                 const FlowConfig& cfg = {},
                                                 const ChartBox* box = nullptr);

struct DiameterEstimate {
  double value = 0.0;
  int sample_count = 0;
  int failed_pairs = 0;
};

DiameterEstimate diameter_estimate(const PrivilegedFrame& frame, const Vec& q, double r,
                                   int count, const ChartBox& domain,
                                   const FlowConfig& cfg = {});

struct ConsistencyReport {
  bool ok = false;
  double max_discrepancy = std::numeric_limits<double>::infinity();
  int pair_count = 0;
  std::string note;
};

// Prop-2.12-style check: distances of the same point pairs computed in two
// nearby exponential charts (jet-truncated coordinate frames) must agree.
ConsistencyReport local_global_consistency(const PrivilegedFrame& frame, const Vec& q,
                                           double r, const ChartBox& domain,
                                           int pair_count = 20, std::uint64_t seed = 99,
                                           const FlowConfig& cfg = {});

// Dual-frame anisotropic norm sum_i |<eta_i, d>|^{1/w_i} at q; the calibrated
// multiple of it bounds distances of small displacements.
double weighted_dual_norm(const PrivilegedFrame& frame, const Vec& q, const Vec& d);

}  // namespace srgeo
