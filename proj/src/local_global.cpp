#include "srgeo/distance.hpp"
#include "srgeo/nilpotent.hpp"
#include "srgeo/rng.hpp"

namespace srgeo {

namespace {

// Chart frame of the q-centered exponential coordinates, truncated at weighted
// order K: polynomial stand-ins for the non-polynomial X~^q_i.
PrivilegedFrame chart_frame(const PrivilegedFrame& frame, const Vec& q, int K,
                            const FlowConfig& cfg) {
  auto jets = coefficient_jets(frame, q, K, cfg);
  const int n = frame.dim();
  PrivilegedFrame out;
  out.m = frame.m;
  out.weights = frame.weights;
  out.growth = frame.growth;
  out.step = frame.step;
  out.Q = frame.Q;
  out.base_point = Vec::Zero(n);
  out.metric = MetricExtension::frame_orthonormal();
  out.fields.assign(n, PolyVectorField(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.fields[i].coeffs[j] = jets[i][j].to_polynomial();
  return out;
}

}  // namespace

ConsistencyReport local_global_consistency(const PrivilegedFrame& frame, const Vec& q,
                                           double r, const ChartBox& domain,
                                           int pair_count, std::uint64_t seed,
                                           const FlowConfig& cfg) {
  const int n = frame.dim();
  ConsistencyReport rep;
  rep.pair_count = pair_count;

  // Prop 2.12 needs B(q,4r) inside the chart image; probe the 4r-ball hull.
  for (int axis = 0; axis < n; ++axis)
    for (double sgn : {-1.0, 1.0}) {
      Vec u = Vec::Zero(n);
      u[axis] = sgn * std::pow(4.0 * r, frame.weights[axis]);
      Vec p = exp_coords(frame, q, u, cfg);
      if (!domain.contains(p)) {
        rep.note = "radius too large";
        return rep;
      }
    }

  Vec qp = q;
  qp[0] += 0.5 * r;

  const int K = frame.step + 3;
  PrivilegedFrame chart_q = chart_frame(frame, q, K, cfg);
  PrivilegedFrame chart_qp = chart_frame(frame, qp, K, cfg);

  ChartBox local_box;
  local_box.lo = Vec::Constant(n, -1.0);
  local_box.hi = Vec::Constant(n, 1.0);
  for (int i = 0; i < n; ++i) {
    double extent = 8.0 * std::pow(r, frame.weights[i]) + 0.1 * r;
    local_box.lo[i] = -extent;
    local_box.hi[i] = extent;
  }

  CounterRng rng(seed, 5);
  ShootingParams sp;
  sp.attempts = 18;
  rep.max_discrepancy = 0.0;
  int done = 0;
  for (int pair = 0; pair < pair_count; ++pair) {
    Vec xa(n), xb(n);
    for (int i = 0; i < n; ++i) {
      xa[i] = 0.7 * std::pow(r, frame.weights[i]) *
              rng.uniform(static_cast<std::uint64_t>(pair) * 2 * n + i, -1.0, 1.0);
      xb[i] = 0.7 * std::pow(r, frame.weights[i]) *
              rng.uniform(static_cast<std::uint64_t>(pair) * 2 * n + n + i, -1.0, 1.0);
    }
    Vec a = exp_coords(frame, q, xa, cfg);
    Vec b = exp_coords(frame, q, xb, cfg);
    Vec xpa = exp_coords_inverse(frame, qp, a, cfg);
    Vec xpb = exp_coords_inverse(frame, qp, b, cfg);

    DistanceQuery d1{&chart_q, xa, xb, local_box, DistanceEngine::kShooting};
    DistanceQuery d2{&chart_qp, xpa, xpb, local_box, DistanceEngine::kShooting};
    DistanceResult r1 = distance_shooting(d1, sp, cfg);
    DistanceResult r2 = distance_shooting(d2, sp, cfg);
    if (!r1.converged || !r2.converged) continue;
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(r1.value - r2.value));
    ++done;
  }
  rep.pair_count = done;
  rep.ok = done >= pair_count / 2 && rep.max_discrepancy < 1e-3;
  return rep;
}

}  // namespace srgeo
