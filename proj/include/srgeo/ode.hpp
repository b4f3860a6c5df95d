#pragma once

#include <cmath>

#include "srgeo/common.hpp"

namespace srgeo {

struct FlowConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_step_count = 200000;
};

// Dormand-Prince 5(4) embedded pair with standard step control. The state is
// a flat coefficient vector; jet-valued integrations view segments of it as
// truncated series inside the RHS functor.
//
// rhs(t, y, dydt); on_step(t, y) is called after each accepted step and may
// throw to abort (chart containment checks live there).
template <typename Rhs, typename StepFn>
void integrate(Rhs&& rhs, Vec& y, double t0, double t1, const FlowConfig& cfg,
               StepFn&& on_step) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (t0 == t1) return;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const Eigen::Index n = y.size();
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), ynew(n), err(n);

  double t = t0;
  double h = dir * std::min(1e-2, std::abs(t1 - t0));
  rhs(t, y, k1);
  int steps = 0;
  while (dir * (t1 - t) > 0) {
    if (++steps > cfg.max_step_count) throw Error("integrator: step count exhausted");
    if (dir * (t + h - t1) > 0) h = t1 - t;

    yt = y + h * (a21 * k1);
    rhs(t + c2 * h, yt, k2);
    yt = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, yt, k3);
    yt = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, yt, k4);
    yt = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, yt, k5);
    yt = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, yt, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_ratio = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err_ratio = std::max(err_ratio, std::abs(err[i]) / sc);
    }
    if (err_ratio <= 1.0) {
      t += h;
      y.swap(ynew);
      k1.swap(k7);  // FSAL
      on_step(t, y);
    }
    double factor = err_ratio > 0 ? 0.9 * std::pow(err_ratio, -0.2) : 5.0;
    h *= std::min(5.0, std::max(0.2, factor));
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t)))
      throw Error("integrator: step size underflow");
  }
}

template <typename Rhs>
void integrate(Rhs&& rhs, Vec& y, double t0, double t1, const FlowConfig& cfg) {
  integrate(rhs, y, t0, t1, cfg, [](double, const Vec&) {});
}

}  // namespace srgeo
