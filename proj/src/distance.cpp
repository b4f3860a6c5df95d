#include "srgeo/distance.hpp"

#include <algorithm>

#include "srgeo/ode.hpp"
#include "srgeo/rng.hpp"

namespace srgeo {

namespace {

Mat dual_basis(const PrivilegedFrame& frame, const Vec& q) {
  Eigen::FullPivLU<Mat> lu(frame.frame_matrix(q));
  if (!lu.isInvertible()) throw Error("frame singular at " + point_str(q));
  return lu.inverse().transpose();  // column i pairs to delta_ij with X_j(q)
}

// Unit c-directions: golden-angle for m=2, Fibonacci sphere for m=3+.
Vec sphere_direction(int m, std::uint64_t k) {
  if (m == 1) return Vec::Constant(1, k % 2 == 0 ? 1.0 : -1.0);
  if (m == 2) {
    double phi = 2.0 * M_PI * std::fmod(0.6180339887498949 * static_cast<double>(k), 1.0);
    Vec c(2);
    c << std::cos(phi), std::sin(phi);
    return c;
  }
  Vec c(m);
  double z = 1.0 - 2.0 * (static_cast<double>(k % 64) + 0.5) / 64.0;
  double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
  double phi = 2.0 * M_PI * std::fmod(0.6180339887498949 * static_cast<double>(k), 1.0);
  c.setZero();
  c[0] = rr * std::cos(phi);
  c[1] = rr * std::sin(phi);
  c[2] = z;
  for (int i = 3; i < m; ++i) c[i] = 0.0;  // higher ranks: rotate through Halton
  if (m > 3) {
    for (int i = 0; i < m; ++i) c[i] = 2.0 * halton(k, static_cast<unsigned>(2 + i)) - 1.0;
    double nn = c.norm();
    c = nn > 0 ? Vec(c / nn) : Vec::Unit(m, 0);
  }
  return c;
}

}  // namespace

HamiltonianSystem::HamiltonianSystem(std::span<const PolyVectorField> horizontal)
    : n_(horizontal.empty() ? 0 : horizontal[0].dim), m_(static_cast<int>(horizontal.size())) {
  if (n_ == 0) throw Error("HamiltonianSystem: empty horizontal frame");
  X_.assign(horizontal.begin(), horizontal.end());
  dX_.resize(m_);
  d2X_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    dX_[i].resize(n_);
    d2X_[i].resize(n_);
    for (int j = 0; j < n_; ++j) {
      for (int k = 0; k < n_; ++k) dX_[i][j].push_back(X_[i].coeffs[j].derivative(k));
      d2X_[i][j].resize(n_);
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) d2X_[i][j][k].push_back(dX_[i][j][k].derivative(l));
    }
  }
}

double HamiltonianSystem::hamiltonian(const Vec& x, const Vec& p) const {
  double h = 0.0;
  for (int i = 0; i < m_; ++i) {
    double u = p.dot(X_[i].eval(x));
    h += 0.5 * u * u;
  }
  return h;
}

void HamiltonianSystem::rhs(const Vec& z, Vec& dz) const {
  const Vec x = z.head(n_);
  const Vec p = z.tail(n_);
  dz.setZero(2 * n_);
  for (int i = 0; i < m_; ++i) {
    Vec Xi = X_[i].eval(x);
    double u = p.dot(Xi);
    if (u == 0.0) continue;
    dz.head(n_) += u * Xi;
    for (int k = 0; k < n_; ++k) {
      double w = 0.0;
      for (int j = 0; j < n_; ++j) w += p[j] * dX_[i][j][k].eval(x);
      dz[n_ + k] -= u * w;
    }
  }
}

void HamiltonianSystem::rhs_sensitivity(const Vec& zS, Vec& dzS) const {
  const int n = n_;
  const Vec x = zS.head(n);
  const Vec p = zS.segment(n, n);
  dzS.setZero(zS.size());

  Mat Axx = Mat::Zero(n, n), Axp = Mat::Zero(n, n), Apx = Mat::Zero(n, n),
      App = Mat::Zero(n, n);
  Vec dx = Vec::Zero(n), dp = Vec::Zero(n);
  for (int i = 0; i < m_; ++i) {
    Vec Xi = X_[i].eval(x);
    Mat Ji(n, n);  // Ji(j,k) = d_k X_i,j
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) Ji(j, k) = dX_[i][j][k].eval(x);
    double u = p.dot(Xi);
    Vec w = Ji.transpose() * p;  // w_k = d_k u
    dx += u * Xi;
    dp -= u * w;
    Axx += Xi * w.transpose() + u * Ji;
    Axp += Xi * Xi.transpose();
    Mat Hpp(n, n);  // Hpp(k,l) = sum_j p_j d2 X_i,j / dx_k dx_l
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += p[j] * d2X_[i][j][k][l].eval(x);
        Hpp(k, l) = s;
      }
    Apx -= w * w.transpose() + u * Hpp;
    App -= Xi * w.transpose() + u * Ji;
    // note: (d dp_k / d p_j) = -(X_i,j w_k + u Ji(j,k)) -> App(k,j)
  }
  dzS.head(n) = dx;
  dzS.segment(n, n) = dp;

  Mat D(2 * n, 2 * n);
  D.topLeftCorner(n, n) = Axx;
  D.topRightCorner(n, n) = Axp;
  D.bottomLeftCorner(n, n) = Apx;
  D.bottomRightCorner(n, n) = App.transpose();
  const int cols = (static_cast<int>(zS.size()) - 2 * n) / (2 * n);
  for (int c = 0; c < cols; ++c) {
    Eigen::Map<const Vec> Sc(zS.data() + 2 * n + c * 2 * n, 2 * n);
    Eigen::Map<Vec> dSc(dzS.data() + 2 * n + c * 2 * n, 2 * n);
    dSc = D * Sc;
  }
}

GeodesicArc geodesic_shoot(const PrivilegedFrame& frame, const Vec& q, const Vec& p0,
                           double T, const FlowConfig& cfg, int sample_count) {
  HamiltonianSystem H(frame.horizontal());
  const int n = H.n();
  double h0 = H.hamiltonian(q, p0);
  if (!(h0 > 0)) throw Error("geodesic_shoot: Hamiltonian vanishes at start");

  GeodesicArc arc;
  arc.initial_covector = p0;
  arc.duration = T;
  arc.samples.resize(n, sample_count + 1);
  Vec z(2 * n);
  z.head(n) = q;
  z.tail(n) = p0;
  arc.samples.col(0) = q;
  double h_worst = h0;
  for (int s = 1; s <= sample_count; ++s) {
    double t0 = T * (s - 1) / sample_count, t1 = T * s / sample_count;
    integrate([&H](double, const Vec& zz, Vec& dzz) { H.rhs(zz, dzz); }, z, t0, t1, cfg);
    arc.samples.col(s) = z.head(n);
    double h = H.hamiltonian(z.head(n), z.tail(n));
    if (std::abs(h - h0) > std::abs(h_worst - h0)) h_worst = h;
  }
  arc.hamiltonian_drift = std::abs(h_worst - h0) / h0;
  return arc;
}

namespace {

struct NewtonShot {
  bool ok = false;
  double T = 0.0;
  Vec p0;
  double defect = std::numeric_limits<double>::infinity();
};

struct ShootContext {
  const HamiltonianSystem* H;
  const PrivilegedFrame* frame;
  Vec q, y;
  Mat dual;  // columns eta_1..eta_n at q
  const ChartBox* domain;
  const FlowConfig* cfg;
  double scale = 1.0;
};

Vec integrate_endpoint(const ShootContext& sc, const Vec& p0, double T, Mat* Mx,
                       Vec* xdot, bool* in_domain) {
  const int n = sc.H->n();
  if (in_domain) *in_domain = true;
  if (Mx) {
    Vec z(2 * n + 2 * n * n);
    z.head(n) = sc.q;
    z.segment(n, n) = p0;
    z.tail(2 * n * n).setZero();
    for (int c = 0; c < n; ++c) z[2 * n + c * 2 * n + n + c] = 1.0;  // dp/dp0 = I
    integrate([&sc](double, const Vec& zz, Vec& dzz) { sc.H->rhs_sensitivity(zz, dzz); }, z,
              0.0, T, *sc.cfg,
              [&](double, const Vec& zz) {
                if (in_domain && sc.domain && !sc.domain->contains(zz.head(n), 1e-9))
                  *in_domain = false;
              });
    for (int c = 0; c < n; ++c) Mx->col(c) = z.segment(2 * n + c * 2 * n, n);
    if (xdot) {
      Vec dz(2 * n);
      sc.H->rhs(z.head(2 * n), dz);
      *xdot = dz.head(n);
    }
    return z.head(n);
  }
  Vec z(2 * n);
  z.head(n) = sc.q;
  z.tail(n) = p0;
  integrate([&sc](double, const Vec& zz, Vec& dzz) { sc.H->rhs(zz, dzz); }, z, 0.0, T,
            *sc.cfg,
            [&](double, const Vec& zz) {
              if (in_domain && sc.domain && !sc.domain->contains(zz.head(n), 1e-9))
                *in_domain = false;
            });
  if (xdot) {
    Vec dz(2 * n);
    sc.H->rhs(z, dz);
    *xdot = dz.head(n);
  }
  return z.head(n);
}

// Damped Newton on (c, lambda, T) with residual [x(T) - y; (|c|^2 - 1)/2].
NewtonShot newton_shoot(const ShootContext& sc, Vec c, Vec lambda, double T,
                        const ShootingParams& params) {
  const int n = sc.H->n();
  const int m = sc.H->m();
  NewtonShot out;
  if (c.norm() == 0.0) return out;
  c /= c.norm();

  auto covector = [&](const Vec& cc, const Vec& ll) {
    Vec coef(n);
    coef.head(m) = cc;
    coef.tail(n - m) = ll;
    return Vec(sc.dual * coef);
  };

  double ep_tol = params.endpoint_tol * std::max(1.0, sc.scale);
  Vec r(n + 1);
  Mat Mx(n, n);
  Vec xdot(n);
  Vec p0 = covector(c, lambda);
  Vec x_end = integrate_endpoint(sc, p0, T, &Mx, &xdot, nullptr);
  r.head(n) = x_end - sc.y;
  r[n] = 0.5 * (c.squaredNorm() - 1.0);
  double rn = r.norm();

  for (int it = 0; it < params.max_newton; ++it) {
    if (rn <= ep_tol) break;
    Mat J = Mat::Zero(n + 1, n + 1);
    J.topLeftCorner(n, n) = Mx * sc.dual;
    J.block(0, n, n, 1) = xdot;
    J.block(n, 0, 1, m) = c.transpose();
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible()) return out;
    Vec step = lu.solve(r);
    double damp = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 10; ++bt) {
      Vec cc = c - damp * step.head(m);
      Vec ll = lambda - damp * step.segment(m, n - m);
      double TT = T - damp * step[n];
      if (TT <= 1e-12 || cc.norm() < 1e-9) {
        damp *= 0.5;
        continue;
      }
      Vec pp = covector(cc, ll);
      Vec xe = integrate_endpoint(sc, pp, TT, nullptr, nullptr, nullptr);
      Vec rr(n + 1);
      rr.head(n) = xe - sc.y;
      rr[n] = 0.5 * (cc.squaredNorm() - 1.0);
      if (rr.norm() < rn) {
        c = cc;
        lambda = ll;
        T = TT;
        rn = rr.norm();
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) return out;
    p0 = covector(c, lambda);
    x_end = integrate_endpoint(sc, p0, T, &Mx, &xdot, nullptr);
    r.head(n) = x_end - sc.y;
    r[n] = 0.5 * (c.squaredNorm() - 1.0);
    rn = r.norm();
  }
  if (rn > ep_tol) return out;
  if (params.enforce_domain && sc.domain) {
    bool inside = true;
    integrate_endpoint(sc, p0, T, nullptr, nullptr, &inside);
    if (!inside) return out;
  }
  out.ok = true;
  out.T = T;
  out.p0 = p0;
  out.defect = (x_end - sc.y).norm();
  return out;
}

}  // namespace

double weighted_dual_norm(const PrivilegedFrame& frame, const Vec& q, const Vec& d) {
  Eigen::FullPivLU<Mat> lu(frame.frame_matrix(q));
  if (!lu.isInvertible()) throw Error("frame singular at " + point_str(q));
  Vec c = lu.solve(d);
  double s = 0.0;
  for (int i = 0; i < frame.dim(); ++i)
    s += std::pow(std::abs(c[i]), 1.0 / frame.weights[i]);
  return s;
}

DistanceResult distance_shooting(const DistanceQuery& query, const ShootingParams& params,
                                 const FlowConfig& cfg) {
  const PrivilegedFrame& frame = *query.frame;
  HamiltonianSystem H(frame.horizontal());
  const int n = H.n(), m = H.m();

  DistanceResult res;
  res.engine = "shooting";
  if ((query.x - query.y).norm() == 0.0) {
    res.value = 0.0;
    res.converged = true;
    res.covector = Vec::Zero(n);
    res.duration = 0.0;
    res.endpoint_defect = 0.0;
    return res;
  }

  ShootContext sc{&H, &frame, query.x, query.y, dual_basis(frame, query.x), &query.domain,
                  &cfg, std::max(1.0, query.y.norm())};

  double T0 = weighted_dual_norm(frame, query.x, query.y - query.x);
  T0 = std::max(T0, 1e-6);

  // Deterministic start list.
  struct Start {
    Vec c, lambda;
    double T;
  };
  std::vector<Start> starts;
  {
    Eigen::FullPivLU<Mat> lu(frame.frame_matrix(query.x));
    Vec coords = lu.solve(query.y - query.x);
    Vec ch = coords.head(m);
    if (ch.norm() > 1e-12) {
      starts.push_back({Vec(ch / ch.norm()), Vec::Zero(n - m), T0});
      starts.push_back({Vec(ch / ch.norm()), Vec::Zero(n - m), std::max(ch.norm(), 1e-6)});
    }
    int k = 0;
    while (static_cast<int>(starts.size()) < params.attempts) {
      Vec c = sphere_direction(m, static_cast<std::uint64_t>(k));
      Vec lh(n - m);
      for (int j = 0; j < n - m; ++j)
        lh[j] = params.lambda_hat_max * (2.0 * halton(static_cast<std::uint64_t>(k),
                                                      static_cast<unsigned>(3 + 2 * j)) -
                                         1.0);
      if (k % 3 == 0) lh.setZero();
      Vec lam(n - m);
      for (int j = 0; j < n - m; ++j)
        lam[j] = lh[j] / std::pow(T0, frame.weights[m + j] - 1);
      starts.push_back({c, lam, T0});
      ++k;
    }
  }

  for (const auto& [p0, T] : params.warm_starts) {
    Eigen::FullPivLU<Mat> lu(frame.frame_matrix(query.x));
    Vec coef = sc.dual.fullPivLu().solve(p0);
    Vec c = coef.head(m);
    if (c.norm() < 1e-12) continue;
    NewtonShot shot = newton_shoot(sc, c, coef.tail(n - m), T, params);
    if (shot.ok && shot.T < res.value) {
      res.value = shot.T;
      res.covector = shot.p0;
      res.duration = shot.T;
      res.endpoint_defect = shot.defect;
      res.converged = true;
    }
  }

  int converged_count = res.converged ? 1 : 0;
  int since_improvement = 0;
  for (const auto& st : starts) {
    NewtonShot shot = newton_shoot(sc, st.c, st.lambda, st.T, params);
    if (shot.ok) {
      ++converged_count;
      if (shot.T < res.value - 1e-14) {
        res.value = shot.T;
        res.covector = shot.p0;
        res.duration = shot.T;
        res.endpoint_defect = shot.defect;
        res.converged = true;
        since_improvement = 0;
      } else {
        ++since_improvement;
      }
    } else {
      ++since_improvement;
    }
    if (converged_count >= 3 && since_improvement >= 8) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Piecewise-constant-control oracle.
// ---------------------------------------------------------------------------

namespace {

struct ControlSystem {
  int n, m;
  std::vector<PolyVectorField> X;
  std::vector<std::vector<std::vector<Polynomial>>> dX;  // [i][j][k]

  explicit ControlSystem(std::span<const PolyVectorField> horizontal)
      : n(horizontal[0].dim), m(static_cast<int>(horizontal.size())) {
    X.assign(horizontal.begin(), horizontal.end());
    dX.resize(m);
    for (int i = 0; i < m; ++i) {
      dX[i].resize(n);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) dX[i][j].push_back(X[i].coeffs[j].derivative(k));
    }
  }

  Vec field(const Vec& x, const Vec& u) const {
    Vec v = Vec::Zero(n);
    for (int i = 0; i < m; ++i)
      if (u[i] != 0.0) v += u[i] * X[i].eval(x);
    return v;
  }

  Mat field_jac(const Vec& x, const Vec& u) const {
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i < m; ++i) {
      if (u[i] == 0.0) continue;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) J(j, k) += u[i] * dX[i][j][k].eval(x);
    }
    return J;
  }

  Mat control_jac(const Vec& x) const {
    Mat B(n, m);
    for (int i = 0; i < m; ++i) B.col(i) = X[i].eval(x);
    return B;
  }

  // One unit-time segment with constant control u, fixed-step RK4 (smooth in
  // u, deterministic). Optionally the variational state/control Jacobians.
  Vec segment(const Vec& x0, const Vec& u, int steps, Mat* Mx, Mat* Su) const {
    Vec x = x0;
    Mat M = Mat::Identity(n, n), S = Mat::Zero(n, m);
    const double h = 1.0 / steps;
    const bool want = Mx || Su;
    for (int s = 0; s < steps; ++s) {
      if (!want) {
        Vec k1 = field(x, u);
        Vec k2 = field(x + 0.5 * h * k1, u);
        Vec k3 = field(x + 0.5 * h * k2, u);
        Vec k4 = field(x + h * k3, u);
        x += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        continue;
      }
      auto rhs = [&](const Vec& xx, const Mat& MM, const Mat& SS, Vec& kx, Mat& kM,
                     Mat& kS) {
        kx = field(xx, u);
        Mat J = field_jac(xx, u);
        kM = J * MM;
        kS = J * SS + control_jac(xx);
      };
      Vec k1x(n), k2x(n), k3x(n), k4x(n);
      Mat k1M(n, n), k2M(n, n), k3M(n, n), k4M(n, n);
      Mat k1S(n, m), k2S(n, m), k3S(n, m), k4S(n, m);
      rhs(x, M, S, k1x, k1M, k1S);
      rhs(x + 0.5 * h * k1x, M + 0.5 * h * k1M, S + 0.5 * h * k1S, k2x, k2M, k2S);
      rhs(x + 0.5 * h * k2x, M + 0.5 * h * k2M, S + 0.5 * h * k2S, k3x, k3M, k3S);
      rhs(x + h * k3x, M + h * k3M, S + h * k3S, k4x, k4M, k4S);
      x += (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x);
      M += (h / 6.0) * (k1M + 2 * k2M + 2 * k3M + k4M);
      S += (h / 6.0) * (k1S + 2 * k2S + 2 * k3S + k4S);
    }
    if (Mx) *Mx = M;
    if (Su) *Su = S;
    return x;
  }
};

struct Trajectory {
  Vec endpoint;
  Mat jac;  // n x (m*N), d endpoint / d u (column blocks per segment)
};

int segment_steps(double umag) {
  return std::clamp(static_cast<int>(std::ceil(umag * 24.0)), 4, 48);
}

Vec endpoint_only(const ControlSystem& cs, const Vec& x0, const Mat& U) {
  Vec x = x0;
  for (Eigen::Index k = 0; k < U.cols(); ++k)
    x = cs.segment(x, U.col(k), segment_steps(U.col(k).norm()), nullptr, nullptr);
  return x;
}

Trajectory endpoint_with_jac(const ControlSystem& cs, const Vec& x0, const Mat& U) {
  const int N = static_cast<int>(U.cols());
  const int n = cs.n, m = cs.m;
  std::vector<Mat> Ms(N), Ss(N);
  Vec x = x0;
  for (int k = 0; k < N; ++k) {
    Mat M(n, n), S(n, m);
    x = cs.segment(x, U.col(k), segment_steps(U.col(k).norm()), &M, &S);
    Ms[k] = M;
    Ss[k] = S;
  }
  Trajectory tr;
  tr.endpoint = x;
  tr.jac.resize(n, m * N);
  Mat P = Mat::Identity(n, n);
  for (int k = N - 1; k >= 0; --k) {
    tr.jac.middleCols(k * m, m) = P * Ss[k];
    P = P * Ms[k];
  }
  return tr;
}

double control_length(const Mat& U) {
  double L = 0.0;
  for (Eigen::Index k = 0; k < U.cols(); ++k) L += U.col(k).norm();
  return L;
}

// Levenberg-Marquardt endpoint feasibility: min |e(U) - y|.
double lm_feasibility(const ControlSystem& cs, const Vec& x0, const Vec& y, Mat& U,
                      int iters, double target) {
  double lm = 1e-8;
  Trajectory tr = endpoint_with_jac(cs, x0, U);
  double err = (tr.endpoint - y).norm();
  for (int it = 0; it < iters && err > target; ++it) {
    Mat JJt = tr.jac * tr.jac.transpose();
    Vec r = tr.endpoint - y;
    Vec delta_dual = (JJt + lm * JJt.trace() / cs.n * Mat::Identity(cs.n, cs.n))
                         .ldlt()
                         .solve(r);
    Mat Ucand = U;
    Eigen::Map<Vec> uflat(Ucand.data(), Ucand.size());
    uflat -= tr.jac.transpose() * delta_dual;
    Vec e2 = endpoint_only(cs, x0, Ucand);
    double err2 = (e2 - y).norm();
    if (err2 < err) {
      U = Ucand;
      err = err2;
      lm = std::max(lm * 0.33, 1e-12);
      tr = endpoint_with_jac(cs, x0, U);
    } else {
      lm *= 4.0;
      if (lm > 1e10) break;
    }
  }
  return err;
}

// Penalty ladder on mu |e(U)-y|^2 + sum |u_k|^2, then a feasibility polish.
void lm_energy(const ControlSystem& cs, const Vec& x0, const Vec& y, Mat& U, int rounds) {
  const int dim = static_cast<int>(U.size());
  for (int round = 0; round < rounds; ++round) {
    for (double mu : {1e4, 1e6, 1e8, 1e10}) {
      double lm = 1e-6;
      for (int it = 0; it < 20; ++it) {
        Trajectory tr = endpoint_with_jac(cs, x0, U);
        Vec r = tr.endpoint - y;
        Eigen::Map<const Vec> uflat(U.data(), U.size());
        Mat A = mu * tr.jac.transpose() * tr.jac + Mat::Identity(dim, dim);
        Vec g = mu * tr.jac.transpose() * r + uflat;
        double cost = mu * r.squaredNorm() + uflat.squaredNorm();
        Mat Ucand(U.rows(), U.cols());
        bool ok = false;
        for (int bt = 0; bt < 8; ++bt) {
          Vec delta = (A + lm * Mat::Identity(dim, dim)).ldlt().solve(g);
          Ucand = U;
          Eigen::Map<Vec> uc(Ucand.data(), Ucand.size());
          uc -= delta;
          Vec e2 = endpoint_only(cs, x0, Ucand);
          double cost2 = mu * (e2 - y).squaredNorm() + uc.squaredNorm();
          if (cost2 < cost) {
            ok = true;
            break;
          }
          lm *= 6.0;
        }
        if (!ok) break;
        U = Ucand;
        lm = std::max(lm * 0.3, 1e-10);
      }
    }
    lm_feasibility(cs, x0, y, U, 25, 1e-11 * std::max(1.0, y.norm()));
  }
}

Mat upsample_controls(const Mat& U) {
  Mat out(U.rows(), U.cols() * 2);
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    out.col(2 * k) = 0.5 * U.col(k);
    out.col(2 * k + 1) = 0.5 * U.col(k);
  }
  return out;
}

std::vector<Mat> coarse_candidates(const ControlSystem& cs, const Vec& x0, const Vec& y,
                                   int N, int control_grid, double scale) {
  const int m = cs.m;
  std::vector<Mat> cands;

  // Straight shot toward the target in the horizontal directions.
  {
    Mat B = cs.control_jac(x0);
    Vec c = B.colPivHouseholderQr().solve(y - x0);
    Mat U = Mat::Zero(m, N);
    for (int k = 0; k < N; ++k) U.col(k) = c / N;
    cands.push_back(U);
  }

  // Rotating-control patterns pick up curvature (loops in rank-2 frames).
  if (m == 2) {
    for (int j : {1, -1, 2, -2})
      for (int ph = 0; ph < 4; ++ph)
        for (double amp : {0.8, 1.6}) {
          Mat U(m, N);
          for (int k = 0; k < N; ++k) {
            double a = 2.0 * M_PI * j * (k + 0.5) / N + 0.5 * M_PI * ph;
            U(0, k) = amp * scale / N * std::cos(a);
            U(1, k) = amp * scale / N * std::sin(a);
          }
          cands.push_back(U);
        }
  }

  // Blockwise direction enumeration.
  const int B = std::min(3, N);
  std::vector<Vec> dirs;
  for (int g = 0; g < control_grid; ++g) {
    if (m == 1)
      dirs.push_back(Vec::Constant(1, g % 2 == 0 ? 1.0 : -1.0));
    else if (m == 2) {
      Vec d(2);
      d << std::cos(2.0 * M_PI * g / control_grid), std::sin(2.0 * M_PI * g / control_grid);
      dirs.push_back(d);
    } else {
      dirs.push_back(sphere_direction(m, static_cast<std::uint64_t>(g)));
    }
  }
  std::vector<int> pick(B, 0);
  std::vector<std::pair<double, Mat>> scored;
  while (true) {
    for (double amp : {0.9, 1.8}) {
      Mat U(m, N);
      for (int k = 0; k < N; ++k) {
        int b = std::min(B - 1, k * B / N);
        U.col(k) = dirs[pick[b]] * (amp * scale / N);
      }
      double err = (endpoint_only(cs, x0, U) - y).norm();
      scored.emplace_back(err, U);
    }
    int pos = B - 1;
    while (pos >= 0 && pick[pos] == control_grid - 1) pick[pos--] = 0;
    if (pos < 0) break;
    ++pick[pos];
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 0; i < scored.size() && i < 4; ++i) cands.push_back(scored[i].second);
  return cands;
}

struct OracleSolution {
  Mat U;
  double length = std::numeric_limits<double>::infinity();
  double defect = std::numeric_limits<double>::infinity();
};

OracleSolution oracle_solve_level(const ControlSystem& cs, const Vec& x0, const Vec& y,
                                  int N, const OracleParams& params, double scale,
                                  const Mat* seed) {
  std::vector<Mat> cands = coarse_candidates(cs, x0, y, N, params.control_grid, scale);
  if (seed) cands.insert(cands.begin(), *seed);

  const double feas_target = 1e-10 * std::max(1.0, y.norm());
  std::vector<std::pair<double, Mat>> feasible;
  for (auto& U : cands) {
    double err = lm_feasibility(cs, x0, y, U, 40, feas_target);
    if (err < 1e-5 * std::max(1.0, y.norm()))
      feasible.emplace_back(control_length(U) + err, U);
  }
  if (feasible.empty()) return {};
  std::stable_sort(feasible.begin(), feasible.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  OracleSolution best;
  const size_t polish_count = std::min<size_t>(2, feasible.size());
  for (size_t i = 0; i < polish_count; ++i) {
    Mat U = feasible[i].second;
    lm_energy(cs, x0, y, U, params.refine_rounds);
    double defect = (endpoint_only(cs, x0, U) - y).norm();
    double L = control_length(U);
    if (defect < 1e-5 * std::max(1.0, y.norm()) && L < best.length) {
      best.U = U;
      best.length = L;
      best.defect = defect;
    }
  }
  return best;
}

}  // namespace

DistanceResult distance_oracle(const DistanceQuery& query, const OracleParams& params,
                               const FlowConfig& cfg) {
  (void)cfg;
  const PrivilegedFrame& frame = *query.frame;
  ControlSystem cs(frame.horizontal());
  const int m = cs.m;

  DistanceResult res;
  res.engine = "oracle";
  if ((query.x - query.y).norm() == 0.0) {
    res.value = 0.0;
    res.upper_bound = 0.0;
    res.converged = true;
    res.controls = Mat::Zero(m, 0);
    res.endpoint_defect = 0.0;
    return res;
  }

  double scale = std::max(weighted_dual_norm(frame, query.x, query.y - query.x), 1e-6);

  // Level ladder 8 -> 16 -> ... -> segments keeps the estimate monotone in
  // the segment count: each level is seeded with the upsampled previous
  // witness, and the best level wins.
  std::vector<int> levels;
  for (int L = std::min(params.segments, 8);; L *= 2) {
    levels.push_back(L);
    if (L >= params.segments) break;
    if (L * 2 > params.segments) {
      levels.push_back(params.segments);
      break;
    }
  }

  OracleSolution best;
  std::optional<Mat> seed;
  for (size_t li = 0; li < levels.size(); ++li) {
    int N = levels[li];
    std::optional<Mat> level_seed;
    if (seed) {
      Mat s = *seed;
      while (s.cols() < N) s = upsample_controls(s);
      if (s.cols() == N) level_seed = s;
    }
    OracleSolution sol = oracle_solve_level(cs, query.x, query.y, N, params, scale,
                                            level_seed ? &*level_seed : nullptr);
    if (sol.length < best.length) best = sol;
    if (sol.U.size() > 0) seed = sol.U;
  }
  if (!std::isfinite(best.length)) {
    res.converged = false;
    return res;  // +inf diagnostics: no feasible curve within budget
  }

  double coeff = params.defect_coeff;
  if (coeff <= 0.0) {
    // Probe tiny displacements to calibrate the defect-to-distance bound.
    coeff = 0.0;
    CounterRng rng(4242, 7);
    for (int probe = 0; probe < 6; ++probe) {
      Vec d(frame.dim());
      for (int i = 0; i < frame.dim(); ++i) d[i] = rng.uniform(probe * 8 + i, -1.0, 1.0);
      d *= 1e-3 / std::max(d.norm(), 1e-12);
      double hn = weighted_dual_norm(frame, query.y, d);
      Mat U = Mat::Zero(m, 4);
      double err = lm_feasibility(cs, query.y, Vec(query.y + d), U, 40,
                                  1e-12 * std::max(1.0, query.y.norm()));
      if (err < 0.3 * d.norm()) coeff = std::max(coeff, control_length(U) / hn);
    }
    coeff = coeff > 0 ? 1.5 * coeff : 3.0;
  }

  Vec defect_vec = endpoint_only(cs, query.x, best.U) - query.y;
  res.controls = best.U;
  res.endpoint_defect = defect_vec.norm();
  res.upper_bound =
      best.length + coeff * weighted_dual_norm(frame, query.y, defect_vec);
  res.value = res.upper_bound;
  res.converged = true;
  return res;
}

DistanceResult distance(const DistanceQuery& query, const OracleParams& op,
                        const ShootingParams& sp, const FlowConfig& cfg) {
  if (query.engine == DistanceEngine::kOracle) return distance_oracle(query, op, cfg);
  if (query.engine == DistanceEngine::kShooting) return distance_shooting(query, sp, cfg);
  DistanceResult oracle = distance_oracle(query, op, cfg);
  DistanceResult shoot = distance_shooting(query, sp, cfg);
  DistanceResult res = shoot;
  res.engine = "both";
  res.upper_bound = oracle.upper_bound;
  res.controls = oracle.controls;
  if (!shoot.converged) {
    res.value = oracle.upper_bound;
    res.converged = oracle.converged;
    res.endpoint_defect = oracle.endpoint_defect;
    return res;
  }
  res.cross_check_ok = shoot.value <= oracle.upper_bound * 1.01 + 1e-9;
  if (!res.cross_check_ok && oracle.converged)
    res.value = std::min(shoot.value, oracle.upper_bound);
  return res;
}

std::vector<BoundarySample> ball_boundary_sample(const PrivilegedFrame& frame, const Vec& q,
                                                 double r, int count, const FlowConfig& cfg,
                                                 const ChartBox* box) {
  HamiltonianSystem H(frame.horizontal());
  const int n = H.n(), m = H.m();
  Mat dual = dual_basis(frame, q);

  std::vector<BoundarySample> out;
  for (int k = 0; k < count; ++k) {
    Vec c(m);
    Vec lambda_hat = Vec::Zero(n - m);
    if (k < 2 * m) {
      c.setZero();
      c[k / 2] = (k % 2 == 0) ? 1.0 : -1.0;
    } else {
      int idx = k - 2 * m;
      c = sphere_direction(m, static_cast<std::uint64_t>(idx));
      for (int j = 0; j < n - m; ++j)
        lambda_hat[j] =
            4.5 * (2.0 * halton(static_cast<std::uint64_t>(idx), static_cast<unsigned>(3 + 2 * j)) - 1.0);
      if (idx % 4 == 0) lambda_hat.setZero();
    }
    Vec coef(n);
    coef.head(m) = c;
    for (int j = 0; j < n - m; ++j)
      coef[m + j] = lambda_hat[j] / std::pow(r, frame.weights[m + j] - 1);
    Vec p0 = dual * coef;

    Vec z(2 * n);
    z.head(n) = q;
    z.tail(n) = p0;
    integrate([&H](double, const Vec& zz, Vec& dzz) { H.rhs(zz, dzz); }, z, 0.0, r, cfg,
              [&](double, const Vec& zz) {
                if (box && !box->contains(zz.head(n)))
                  throw Error("ball_boundary_sample: chart escape at " +
                              point_str(zz.head(n)));
              });
    out.push_back({Vec(z.head(n)), p0});
  }
  return out;
}

DiameterEstimate diameter_estimate(const PrivilegedFrame& frame, const Vec& q, double r,
                                   int count, const ChartBox& domain,
                                   const FlowConfig& cfg) {
  auto samples = ball_boundary_sample(frame, q, r, count, cfg, &domain);
  DiameterEstimate est;
  est.sample_count = count;

  OracleParams op;
  op.segments = 12;
  op.defect_coeff = 3.0;
  ShootingParams sp;
  sp.attempts = 14;

  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = i + 1; j < samples.size(); ++j) {
      DistanceQuery dq{&frame, samples[i].point, samples[j].point, domain,
                       DistanceEngine::kShooting};
      DistanceResult dr = distance_shooting(dq, sp, cfg);
      if (!dr.converged) {
        dr = distance_oracle(dq, op, cfg);
        if (!dr.converged) {
          ++est.failed_pairs;
          continue;
        }
      }
      est.value = std::max(est.value, dr.value);
    }
  return est;
}

}  // namespace srgeo
