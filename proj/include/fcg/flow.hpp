#ifndef FCG_FLOW_HPP
#define FCG_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "fcg/metric.hpp"

namespace fcg {

template <int N>
struct PhaseState {
  ChartPoint<N> point;
  Vec<double, N> velocity{};
  double time = 0.0;
};

// Geodesic acceleration from d/dt(dL/dy) = dL/dx, L = F^2/2.
// g xdd = Lx - (d2L/dy dx) y.
template <class S, int N>
Vec<S, N> spray_accel(const Metric<N>& m, ChartId chart, const Vec<S, N>& u, const Vec<S, N>& y) {
  using D = Dual<S>;
  using DD = Dual<Dual<S>>;
  check_nonzero<S, N>(y);

  auto lift2 = [](const Vec<S, N>& v) {
    Vec<DD, N> r;
    for (int i = 0; i < N; ++i) r[i] = DD(D(v[i]));
    return r;
  };

  Mat<S, N> g{};
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      Vec<DD, N> U = lift2(u), Y = lift2(y);
      Y[i].b = D(S(1.0));
      Y[j].a.b = S(1.0);
      DD L = m.template lagrangian<DD>(chart, U, Y);
      g[i][j] = g[j][i] = L.b.b;
    }

  Vec<S, N> rhs;
  for (int i = 0; i < N; ++i) {
    // directional x-derivative along y of dL/dy_i
    Vec<DD, N> U = lift2(u), Y = lift2(y);
    Y[i].b = D(S(1.0));
    for (int k = 0; k < N; ++k) U[k].a.b = y[k];
    DD L = m.template lagrangian<DD>(chart, U, Y);
    S lyx_y = L.b.b;

    Vec<D, N> Ud, Yd;
    for (int k = 0; k < N; ++k) { Ud[k] = D(u[k]); Yd[k] = D(y[k]); }
    Ud[i].b = S(1.0);
    D Lx = m.template lagrangian<D>(chart, Ud, Yd);
    rhs[i] = Lx.b - lyx_y;
  }
  return solve<S, N>(g, rhs);
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with Hairer's quartic continuous extension and chart
// switching by step rejection.

struct StepRecord {
  double t0 = 0, h = 0;
  ChartId chart = ChartId::North;
  int det_parity = 1;  // cumulative sign of chart-transition determinants
  std::vector<double> r1, r2, r3, r4, r5;
};

class DenseOutput {
 public:
  std::vector<StepRecord> steps;

  // state at time t, in the chart recorded for the containing step
  void eval(double t, ChartId& chart, std::vector<double>& out, int* parity = nullptr) const {
    const StepRecord& s = locate(t);
    double th = s.h > 0 ? (t - s.t0) / s.h : 0.0;
    double th1 = 1.0 - th;
    size_t n = s.r1.size();
    out.resize(n);
    for (size_t i = 0; i < n; ++i)
      out[i] = s.r1[i] + th * (s.r2[i] + th1 * (s.r3[i] + th * (s.r4[i] + th1 * s.r5[i])));
    chart = s.chart;
    if (parity) *parity = s.det_parity;
  }

  double t_end() const { return steps.empty() ? 0.0 : steps.back().t0 + steps.back().h; }

 private:
  const StepRecord& locate(double t) const {
    size_t lo = 0, hi = steps.size();
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (steps[mid].t0 <= t) lo = mid; else hi = mid;
    }
    return steps[lo];
  }
};

// A first-order system living in chart coordinates.  rhs and the transition
// act on a flat state vector.
template <class Sys>
struct IntegrationResult {
  ChartId chart;
  std::vector<double> state;
  DenseOutput dense;
};

struct IntegratorOptions {
  double tol = 1e-10;
  double h_init = 1e-2;
  double h_max = 0.2;
  bool store_dense = true;
};

template <class Sys>
IntegrationResult<Sys> integrate_system(const Sys& sys, ChartId chart0,
                                        std::vector<double> z, double T,
                                        const IntegratorOptions& opt) {
  static const double A[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static const double C[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static const double E[7] = {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920,
                              -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
  static const double D[7] = {-12715105075.0 / 11282082432.0, 0.0,
                              87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0,
                              701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0,
                              69997945.0 / 29380423.0};

  const size_t n = z.size();
  IntegrationResult<Sys> res;
  res.dense.steps.reserve(opt.store_dense ? 256 : 0);

  std::vector<double> k[7];
  for (auto& v : k) v.assign(n, 0.0);
  std::vector<double> ztmp(n), znew(n);

  double t = 0.0;
  double h = std::min(opt.h_init, T);
  int parity = 1;
  ChartId chart = chart0;
  sys.rhs(chart, z.data(), k[0].data());

  while (t < T) {
    if (h < 1e-14 * std::max(1.0, T))
      fail(ErrorCode::StepSizeUnderflow, "integrator step size underflow");
    if (t + h > T) h = T - t;

    for (int st = 1; st < 7; ++st) {
      for (size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < st; ++j) acc += A[st][j] * k[j][i];
        ztmp[i] = z[i] + h * acc;
      }
      sys.rhs(chart, ztmp.data(), k[st].data());
      (void)C;
    }
    // 5th order solution is stage 7's argument (FSAL)
    for (size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (int j = 0; j < 6; ++j) acc += A[6][j] * k[j][i];
      znew[i] = z[i] + h * acc;
    }
    // embedded error estimate
    double err = 0;
    for (size_t i = 0; i < n; ++i) {
      double e = 0;
      for (int j = 0; j < 7; ++j) e += E[j] * k[j][i];
      e *= h;
      double sc = opt.tol * (1.0 + std::max(std::abs(z[i]), std::abs(znew[i])));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / n);

    if (err <= 1.0) {
      if (opt.store_dense) {
        StepRecord rec;
        rec.t0 = t;
        rec.h = h;
        rec.chart = chart;
        rec.det_parity = parity;
        rec.r1 = z;
        rec.r2.resize(n);
        rec.r3.resize(n);
        rec.r4.resize(n);
        rec.r5.resize(n);
        for (size_t i = 0; i < n; ++i) {
          double dy = znew[i] - z[i];
          rec.r2[i] = dy;
          rec.r3[i] = h * k[0][i] - dy;
          rec.r4[i] = dy - h * k[6][i] - rec.r3[i];
          double d5 = 0;
          for (int j = 0; j < 7; ++j) d5 += D[j] * k[j][i];
          rec.r5[i] = h * d5;
        }
        res.dense.steps.push_back(std::move(rec));
      }
      t += h;
      z = znew;
      std::swap(k[0], k[6]);  // FSAL

      if (sys.need_switch(chart, z.data())) {
        sys.convert(chart, z.data());
        parity = -parity;
        sys.rhs(chart, z.data(), k[0].data());
      }
      double f = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      h = std::min(h * std::min(5.0, std::max(0.2, f)), opt.h_max);
    } else {
      double f = 0.9 * std::pow(err, -0.2);
      h *= std::min(1.0, std::max(0.1, f));
    }
  }
  res.chart = chart;
  res.state = std::move(z);
  return res;
}

// ---------------------------------------------------------------------------

template <int N>
struct GeodesicSystem {
  const Metric<N>* m;

  void rhs(ChartId chart, const double* z, double* dz) const {
    Vec<double, N> u, y;
    for (int i = 0; i < N; ++i) { u[i] = z[i]; y[i] = z[N + i]; }
    Vec<double, N> a = spray_accel<double, N>(*m, chart, u, y);
    for (int i = 0; i < N; ++i) { dz[i] = y[i]; dz[N + i] = a[i]; }
  }
  bool need_switch(ChartId, const double* z) const {
    double r2 = 0;
    for (int i = 0; i < N; ++i) r2 += z[i] * z[i];
    return r2 > kRSwitch * kRSwitch;
  }
  void convert(ChartId& chart, double* z) const {
    Vec<double, N> u, y;
    for (int i = 0; i < N; ++i) { u[i] = z[i]; y[i] = z[N + i]; }
    transition<double, N>(u, y);
    chart = other(chart);
    for (int i = 0; i < N; ++i) { z[i] = u[i]; z[N + i] = y[i]; }
  }
};

// Geodesic plus K variation columns (delta u, delta y) advected by the
// linearized flow.  Layout: [u y | col_1 ... col_K], each column 2N.
template <int N>
struct VariationalSystem {
  const Metric<N>* m;
  int K;

  void rhs(ChartId chart, const double* z, double* dz) const {
    Vec<double, N> u, y;
    for (int i = 0; i < N; ++i) { u[i] = z[i]; y[i] = z[N + i]; }
    Vec<double, N> a = spray_accel<double, N>(*m, chart, u, y);
    for (int i = 0; i < N; ++i) { dz[i] = y[i]; dz[N + i] = a[i]; }

    // Jacobian of the spray via one dual pass per variation column
    for (int c = 0; c < K; ++c) {
      const double* col = z + 2 * N + 2 * N * c;
      double* dcol = dz + 2 * N + 2 * N * c;
      Vec<D1, N> U, Y;
      for (int i = 0; i < N; ++i) {
        U[i] = D1(u[i], col[i]);
        Y[i] = D1(y[i], col[N + i]);
      }
      Vec<D1, N> ad = spray_accel<D1, N>(*m, chart, U, Y);
      for (int i = 0; i < N; ++i) {
        dcol[i] = col[N + i];
        dcol[N + i] = ad[i].b;
      }
    }
  }
  bool need_switch(ChartId, const double* z) const {
    double r2 = 0;
    for (int i = 0; i < N; ++i) r2 += z[i] * z[i];
    return r2 > kRSwitch * kRSwitch;
  }
  void convert(ChartId& chart, double* z) const {
    Vec<double, N> u0, y0;
    for (int i = 0; i < N; ++i) { u0[i] = z[i]; y0[i] = z[N + i]; }
    // transform each variation column by the tangent map of the transition
    for (int c = 0; c < K; ++c) {
      double* col = z + 2 * N + 2 * N * c;
      Vec<D1, N> u, y;
      for (int i = 0; i < N; ++i) {
        u[i] = D1(u0[i], col[i]);
        y[i] = D1(y0[i], col[N + i]);
      }
      transition<D1, N>(u, y);
      for (int i = 0; i < N; ++i) { col[i] = u[i].b; col[N + i] = y[i].b; }
    }
    Vec<double, N> u = u0, y = y0;
    transition<double, N>(u, y);
    chart = other(chart);
    for (int i = 0; i < N; ++i) { z[i] = u[i]; z[N + i] = y[i]; }
  }
};

template <int N>
struct GeodesicSegment {
  PhaseState<N> initial;
  double T = 0;
  double F_speed = 1.0;
  double F_drift = 0.0;  // max |F - F_speed| over dense nodes
  ChartId end_chart = ChartId::North;
  std::vector<double> end_state;  // (u, y)
  DenseOutput dense;

  double length() const { return F_speed * T; }

  PhaseState<N> state_at(double t) const {
    ChartId chart;
    std::vector<double> z;
    dense.eval(t, chart, z);
    PhaseState<N> s;
    s.point.chart = chart;
    for (int i = 0; i < N; ++i) { s.point.u[i] = z[i]; s.velocity[i] = z[N + i]; }
    s.time = t;
    return s;
  }

  PhaseState<N> end() const {
    PhaseState<N> s;
    s.point.chart = end_chart;
    for (int i = 0; i < N; ++i) { s.point.u[i] = end_state[i]; s.velocity[i] = end_state[N + i]; }
    s.time = T;
    return s;
  }
};

template <int N>
GeodesicSegment<N> integrate(const Metric<N>& m, const PhaseState<N>& init, double T,
                             double tol = 1e-10, bool store_dense = true) {
  if (!(T > 0)) fail(ErrorCode::BadInput, "integration time must be positive");
  GeodesicSystem<N> sys{&m};
  std::vector<double> z(2 * N);
  for (int i = 0; i < N; ++i) { z[i] = init.point.u[i]; z[N + i] = init.velocity[i]; }
  IntegratorOptions opt;
  opt.tol = tol;
  opt.store_dense = store_dense;
  auto r = integrate_system(sys, init.point.chart, std::move(z), T, opt);

  GeodesicSegment<N> seg;
  seg.initial = init;
  seg.T = T;
  seg.F_speed = m.template eval<double>(init.point.chart, init.point.u, init.velocity);
  seg.end_chart = r.chart;
  seg.end_state = std::move(r.state);
  seg.dense = std::move(r.dense);
  if (store_dense) {
    double drift = 0;
    for (const auto& st : seg.dense.steps) {
      Vec<double, N> u, y;
      for (int i = 0; i < N; ++i) { u[i] = st.r1[i]; y[i] = st.r1[N + i]; }
      drift = std::max(drift, std::abs(m.template eval<double>(st.chart, u, y) - seg.F_speed));
    }
    Vec<double, N> u, y;
    for (int i = 0; i < N; ++i) { u[i] = seg.end_state[i]; y[i] = seg.end_state[N + i]; }
    drift = std::max(drift, std::abs(m.template eval<double>(seg.end_chart, u, y) - seg.F_speed));
    seg.F_drift = drift;
  }
  return seg;
}

// Zermelo navigation ground truth: the F-geodesic with the wind of strength
// eps about the polar axis is the wind flow applied to a round geodesic.
template <int N>
ChartPoint<N> navigation_geodesic(double eps, const std::array<double, N + 1>& p0,
                                  const std::array<double, N + 1>& v0, double t) {
  if (!(eps >= 0.0 && eps < 1.0)) fail(ErrorCode::EpsilonOutOfRange, "epsilon must be in [0,1)");
  std::array<double, N + 1> g{};
  for (int i = 0; i <= N; ++i) g[i] = p0[i] * std::cos(t) + v0[i] * std::sin(t);
  double a = eps * t, c = std::cos(a), s = std::sin(a);
  std::array<double, N + 1> q = g;
  q[0] = c * g[0] - s * g[1];
  q[1] = s * g[0] + c * g[1];
  ChartPoint<N> out;
  out.chart = q[N] >= 0 ? ChartId::North : ChartId::South;
  out.u = ambient_to_chart<double, N>(out.chart, q);
  return out;
}

// Equatorial unit-F-speed start on the Katok sphere; direction +1 flows with
// the wind, -1 against it.  The Zermelo velocity is wind plus round-unit
// vector, so these close after 2*pi/(1 +- eps).
inline PhaseState<2> katok_equator_state(double eps, int direction) {
  PhaseState<2> s;
  s.point.chart = ChartId::North;
  s.point.u = {1.0, 0.0};
  s.velocity = {0.0, direction > 0 ? 1.0 + eps : -(1.0 - eps)};
  return s;
}

// Unit-F-speed great-circle start through the poles of the round sphere.
inline PhaseState<2> polar_great_circle_state() {
  PhaseState<2> s;
  s.point.chart = ChartId::North;
  s.point.u = {0.0, 0.0};
  s.velocity = {0.5, 0.0};
  return s;
}

// One JSON record per dense-output node: {t, chart, u, y}.
template <int N>
void dump_segment_jsonl(const GeodesicSegment<N>& seg, std::ostream& os);

template <int N>
struct LinearizedFlow {
  GeodesicSegment<N> base;
  ChartId end_chart;
  Mat<double, 2 * N> monodromy{};  // d(flow_T)/d(u,y) in the end chart frame
  DenseOutput dense;               // augmented state, for Jacobi-field queries
};

template <int N>
LinearizedFlow<N> linearize(const Metric<N>& m, const GeodesicSegment<N>& seg,
                            double tol = 1e-11) {
  VariationalSystem<N> sys{&m, 2 * N};
  std::vector<double> z(2 * N + 4 * N * N, 0.0);
  for (int i = 0; i < N; ++i) {
    z[i] = seg.initial.point.u[i];
    z[N + i] = seg.initial.velocity[i];
  }
  for (int c = 0; c < 2 * N; ++c) z[2 * N + 2 * N * c + c] = 1.0;
  IntegratorOptions opt;
  opt.tol = tol;
  auto r = integrate_system(sys, seg.initial.point.chart, std::move(z), seg.T, opt);

  LinearizedFlow<N> lf;
  lf.base = seg;
  lf.end_chart = r.chart;
  for (int c = 0; c < 2 * N; ++c)
    for (int i = 0; i < 2 * N; ++i) lf.monodromy[i][c] = r.state[2 * N + 2 * N * c + i];
  lf.dense = std::move(r.dense);
  return lf;
}

// Arc-length positions s in (0, s_max] where a Jacobi field vanishing at 0
// with transversal initial derivative becomes tangent to the flow again.
template <int N>
std::vector<double> conjugate_points(const Metric<N>& m, const PhaseState<N>& init,
                                     double s_max, double tol = 1e-11) {
  double F0 = m.template eval<double>(init.point.chart, init.point.u, init.velocity);
  double Tmax = s_max / F0;

  // g-orthonormal transversal seeds at the start
  auto fund = fundamentals<double, N>(m, init.point.chart, init.point.u, init.velocity);
  std::vector<Vec<double, N>> basis;
  {
    std::vector<Vec<double, N>> cand;
    Vec<double, N> cp = init.velocity;
    cand.push_back(cp);
    for (int i = 0; i < N; ++i) {
      Vec<double, N> e = vzero<double, N>();
      e[i] = 1.0;
      cand.push_back(e);
    }
    auto gdot = [&](const Vec<double, N>& a, const Vec<double, N>& b) {
      double s = 0;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) s += fund.g[i][j] * a[i] * b[j];
      return s;
    };
    std::vector<Vec<double, N>> ortho;
    for (auto v : cand) {
      for (const auto& w : ortho) {
        double c = gdot(v, w);
        for (int i = 0; i < N; ++i) v[i] -= c * w[i];
      }
      double nn = gdot(v, v);
      if (nn > 1e-12) {
        for (int i = 0; i < N; ++i) v[i] /= std::sqrt(nn);
        ortho.push_back(v);
      }
    }
    if ((int)ortho.size() != N) fail(ErrorCode::FrameDegenerate, "could not build transversal frame");
    basis.assign(ortho.begin() + 1, ortho.end());
  }

  const int K = N - 1;
  VariationalSystem<N> sys{&m, K};
  std::vector<double> z(2 * N + 2 * N * K, 0.0);
  for (int i = 0; i < N; ++i) { z[i] = init.point.u[i]; z[N + i] = init.velocity[i]; }
  for (int c = 0; c < K; ++c)
    for (int i = 0; i < N; ++i) z[2 * N + 2 * N * c + N + i] = basis[c][i];
  IntegratorOptions opt;
  opt.tol = tol;
  auto r = integrate_system(sys, init.point.chart, std::move(z), Tmax, opt);

  // det [velocity | J_1 .. J_{N-1}] with chart-parity correction
  auto dvalue = [&](double t) {
    ChartId chart;
    std::vector<double> st;
    int parity = 1;
    r.dense.eval(t, chart, st, &parity);
    Mat<double, N> M{};
    for (int i = 0; i < N; ++i) M[i][0] = st[N + i];
    for (int c = 0; c < K; ++c)
      for (int i = 0; i < N; ++i) M[i][c + 1] = st[2 * N + 2 * N * c + i];
    double det;
    if constexpr (N == 2) {
      det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
    } else {
      det = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
            M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
            M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
    }
    return parity * det;
  };

  std::vector<double> zeros;
  int samples = std::max(64, (int)(Tmax * 40));
  double dt = Tmax / samples;
  double prev = dvalue(1e-9 * Tmax);
  double tprev = 1e-9 * Tmax;
  for (int i = 1; i <= samples; ++i) {
    double t = i * dt;
    double cur = dvalue(t);
    if (prev == 0.0) prev = 1e-300;
    if ((prev < 0) != (cur < 0)) {
      double a = tprev, b = t;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b);
        double v = dvalue(mid);
        if ((v < 0) == (prev < 0)) a = mid; else b = mid;
        if (b - a < 1e-12 * Tmax) break;
      }
      zeros.push_back(0.5 * (a + b) * F0);
    } else if (i >= 2) {
      // even-multiplicity touch: parabolic local minimum of |d|
      double t1 = t - 2 * dt, t2 = t - dt, t3 = t;
      bool near_known = !zeros.empty() && std::abs(zeros.back() / F0 - t2) < 2.5 * dt;
      double v1 = std::abs(dvalue(t1)), v2 = std::abs(dvalue(t2)), v3 = std::abs(dvalue(t3));
      if (!near_known && v2 < v1 && v2 < v3) {
        // refine by golden-section on |d|
        double a = t1, b = t3;
        for (int it = 0; it < 60; ++it) {
          double m1 = a + 0.381966 * (b - a), m2 = b - 0.381966 * (b - a);
          if (std::abs(dvalue(m1)) < std::abs(dvalue(m2))) b = m2; else a = m1;
        }
        double tmin = 0.5 * (a + b);
        double vmin = std::abs(dvalue(tmin));
        double scale = std::max({v1, v3, 1e-30});
        if (vmin < 1e-7 * scale) zeros.push_back(tmin * F0);
      }
    }
    prev = cur;
    tprev = t;
  }
  std::sort(zeros.begin(), zeros.end());
  // merge refinements of the same zero
  std::vector<double> out;
  for (double z : zeros)
    if (out.empty() || z - out.back() > 3.0 * dt * F0) out.push_back(z);
  return out;
}

}  // namespace fcg

#endif
