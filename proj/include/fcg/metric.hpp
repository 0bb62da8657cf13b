#ifndef FCG_METRIC_HPP
#define FCG_METRIC_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "fcg/chart.hpp"
#include "fcg/dual.hpp"
#include "fcg/error.hpp"
#include "fcg/smallmat.hpp"

namespace fcg {

enum class MetricKind { Round, Katok, Zermelo, Custom };

template <int N>
struct Tangent {
  ChartPoint<N> base;
  Vec<double, N> y{};
};

// Type-erased Finsler norm for the Custom variant: one callable per scalar
// level so differentiated paths keep working.
template <int N>
struct CustomF {
  template <class S>
  using Fn = std::function<S(ChartId, const Vec<S, N>&, const Vec<S, N>&)>;
  Fn<double> f0;
  Fn<D1> f1;
  Fn<D2> f2;
  Fn<D3> f3;

  template <class S>
  const Fn<S>& get() const {
    if constexpr (std::is_same_v<S, double>) return f0;
    else if constexpr (std::is_same_v<S, D1>) return f1;
    else if constexpr (std::is_same_v<S, D2>) return f2;
    else return f3;
  }
};

template <int N, class Fn>
CustomF<N> make_custom(Fn fn) {
  CustomF<N> c;
  c.f0 = fn;
  c.f1 = fn;
  c.f2 = fn;
  c.f3 = fn;
  return c;
}

// A Finsler metric on S^N given in stereographic charts.  Katok and Zermelo
// are Randers metrics obtained by navigation on the round sphere of
// curvature one with a Killing wind; Katok fixes the wind to the rotation
// field about the polar axis with strength epsilon.
template <int N>
struct Metric {
  MetricKind kind = MetricKind::Round;
  double epsilon = 0.0;                    // Katok strength, in [0,1)
  double strength = 0.0;                   // Zermelo wind strength
  Mat<double, N + 1> generator{};          // Zermelo: ambient antisymmetric matrix
  std::shared_ptr<CustomF<N>> custom;

  static Metric round() { return Metric{}; }

  static Metric katok(double eps) {
    if (!(eps >= 0.0 && eps < 1.0)) fail(ErrorCode::EpsilonOutOfRange, "katok epsilon must be in [0,1)");
    Metric m;
    m.kind = MetricKind::Katok;
    m.epsilon = eps;
    return m;
  }

  // Wind field s * G p for an antisymmetric generator G; |W|_h < 1 required.
  static Metric zermelo(const Mat<double, N + 1>& gen, double s) {
    Metric m;
    m.kind = MetricKind::Zermelo;
    m.generator = gen;
    m.strength = s;
    return m;
  }

  static Metric custom_metric(CustomF<N> f) {
    Metric m;
    m.kind = MetricKind::Custom;
    m.custom = std::make_shared<CustomF<N>>(std::move(f));
    return m;
  }

  // Wind in chart coordinates.  The Katok wind rotates the (x1,x2) ambient
  // plane, which commutes with both polar projections, so it is the plane
  // rotation field in either chart.
  template <class S>
  Vec<S, N> wind(ChartId chart, const Vec<S, N>& u) const {
    if (kind == MetricKind::Katok) {
      Vec<S, N> w = vzero<S, N>();
      w[0] = -epsilon * u[1];
      w[1] = epsilon * u[0];
      return w;
    }
    // generic Killing field: push to ambient, apply the generator, pull back
    auto p = chart_to_ambient<S, N>(chart, u);
    std::array<S, N + 1> gp;
    for (int i = 0; i <= N; ++i) {
      S s = S(0.0);
      for (int j = 0; j <= N; ++j) s += generator[i][j] * p[j];
      gp[i] = s * strength;
    }
    return pull_tangent<S, N>(chart, p, gp);
  }

  template <class S>
  S eval(ChartId chart, const Vec<S, N>& u, const Vec<S, N>& y) const {
    S w = S(1.0) + norm2<S, N>(u);
    switch (kind) {
      case MetricKind::Round:
        return 2.0 * sqrt(norm2<S, N>(y)) / w;
      case MetricKind::Katok:
      case MetricKind::Zermelo: {
        S conf = 4.0 / (w * w);
        Vec<S, N> W = wind<S>(chart, u);
        S hyy = conf * norm2<S, N>(y);
        S hWy = conf * dot<S, N>(W, y);
        S hWW = conf * norm2<S, N>(W);
        S mu = S(1.0) - hWW;
        return (sqrt(hWy * hWy + hyy * mu) - hWy) / mu;
      }
      case MetricKind::Custom:
        return custom->template get<S>()(chart, u, y);
    }
    return S(0.0);
  }

  template <class S>
  S lagrangian(ChartId chart, const Vec<S, N>& u, const Vec<S, N>& y) const {
    S f = eval<S>(chart, u, y);
    return 0.5 * f * f;
  }
};

// Second-order data of L = F^2/2 at one (x, y).  Lyx[i][j] = d2L/dy_i dx_j.
template <class S, int N>
struct Fundamentals {
  Mat<S, N> g{};
  Mat<S, N> Lyx{};
  Mat<S, N> Lxx{};
  Vec<S, N> Lx{};
};

template <class S, int N>
void check_nonzero(const Vec<S, N>& y) {
  if (value_norm<S, N>(y) == 0.0) fail(ErrorCode::ZeroVector, "F undefined at y = 0");
}

template <class S, int N>
void check_chart(const Vec<S, N>& u) {
  double r = 0;
  for (int i = 0; i < N; ++i) {
    double v = value_of(u[i]);
    if (!std::isfinite(v)) fail(ErrorCode::ChartOverflow, "non-finite chart coordinate");
    r += v * v;
  }
  if (r > 1e16) fail(ErrorCode::ChartOverflow, "point too far from chart center");
}

template <class S, int N>
Fundamentals<S, N> fundamentals(const Metric<N>& m, ChartId chart, const Vec<S, N>& u,
                                const Vec<S, N>& y) {
  check_chart<S, N>(u);
  check_nonzero<S, N>(y);
  using D = Dual<S>;
  using DD = Dual<Dual<S>>;
  Fundamentals<S, N> out;

  auto lift2 = [](const Vec<S, N>& v) {
    Vec<DD, N> r;
    for (int i = 0; i < N; ++i) r[i] = DD(D(v[i]));
    return r;
  };

  // g and Lxx: outer/inner seeds in the same slot group
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      {
        Vec<DD, N> U = lift2(u), Y = lift2(y);
        Y[i].b = D(S(1.0));
        Y[j].a.b = S(1.0);
        DD L = m.template lagrangian<DD>(chart, U, Y);
        out.g[i][j] = out.g[j][i] = L.b.b;
      }
      {
        Vec<DD, N> U = lift2(u), Y = lift2(y);
        U[i].b = D(S(1.0));
        U[j].a.b = S(1.0);
        DD L = m.template lagrangian<DD>(chart, U, Y);
        out.Lxx[i][j] = out.Lxx[j][i] = L.b.b;
      }
    }
  // mixed block
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Vec<DD, N> U = lift2(u), Y = lift2(y);
      Y[i].b = D(S(1.0));
      U[j].a.b = S(1.0);
      DD L = m.template lagrangian<DD>(chart, U, Y);
      out.Lyx[i][j] = L.b.b;
    }
  // gradient in x
  for (int i = 0; i < N; ++i) {
    Vec<D, N> U, Y;
    for (int k = 0; k < N; ++k) { U[k] = D(u[k]); Y[k] = D(y[k]); }
    U[i].b = S(1.0);
    D L = m.template lagrangian<D>(chart, U, Y);
    out.Lx[i] = L.b;
  }
  return out;
}

// --- spec-facing operations ------------------------------------------------

struct ReversibilityResult {
  double lambda = 1.0;
  ChartId chart = ChartId::North;
  std::array<double, 3> witness_u{};   // padded to 3; first n entries used
  std::array<double, 3> witness_y{};
};

template <int N>
double eval_F(const Metric<N>& m, const Tangent<N>& v) {
  check_chart<double, N>(v.base.u);
  check_nonzero<double, N>(v.y);
  double f = m.template eval<double>(v.base.chart, v.base.u, v.y);
  if (!(f > 0.0)) fail(ErrorCode::DegenerateTensor, "F not positive");
  return f;
}

template <int N>
Fundamentals<double, N> fundamental_quantities(const Metric<N>& m, const Tangent<N>& v) {
  auto q = fundamentals<double, N>(m, v.base.chart, v.base.u, v.y);
  // positive definiteness of g via Cholesky-style pivots
  Mat<double, N> g = q.g;
  for (int k = 0; k < N; ++k) {
    if (g[k][k] <= 0.0) fail(ErrorCode::DegenerateTensor, "fundamental tensor not positive definite");
    for (int i = k + 1; i < N; ++i) {
      double f = g[i][k] / g[k][k];
      for (int j = k; j < N; ++j) g[i][j] -= f * g[k][j];
    }
  }
  return q;
}

struct KatokExpected {
  double lambda;
  double L1;
  double L2;
};

inline KatokExpected katok_expected(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) fail(ErrorCode::EpsilonOutOfRange, "epsilon must be in [0,1)");
  const double pi = 3.14159265358979323846;
  return {(1.0 + eps) / (1.0 - eps), 2.0 * pi / (1.0 + eps), 2.0 * pi / (1.0 - eps)};
}

namespace detail {

// direction vector from n-1 angles (n = 2 or 3)
template <int N>
Vec<double, N> dir_from_angles(const std::array<double, 2>& a) {
  Vec<double, N> d{};
  if constexpr (N == 2) {
    d[0] = std::cos(a[0]);
    d[1] = std::sin(a[0]);
  } else {
    d[0] = std::cos(a[0]) * std::cos(a[1]);
    d[1] = std::sin(a[0]) * std::cos(a[1]);
    d[2] = std::sin(a[1]);
  }
  return d;
}

}  // namespace detail

// lambda = max F(-X) over F(X) = 1: coarse grid over the unit sphere bundle,
// then shrinking compass ascent.
template <int N>
ReversibilityResult reversibility(const Metric<N>& m, int grid_density = 64,
                                  double refine_tol = 1e-10) {
  static_assert(N == 2 || N == 3);
  auto objective = [&](ChartId chart, const Vec<double, N>& u,
                       const std::array<double, 2>& ang) {
    Vec<double, N> y = detail::dir_from_angles<N>(ang);
    double fp = m.template eval<double>(chart, u, y);
    double fneg = m.template eval<double>(chart, u, scaled(y, -1.0));
    return fneg / fp;
  };

  double best = 1.0;
  ChartId best_chart = ChartId::North;
  Vec<double, N> best_u{};
  std::array<double, 2> best_ang{};
  const double pi = 3.14159265358979323846;

  int gp = grid_density;
  // positions: golden-angle spirals, mapped into the covering chart
  int npos = gp * gp / 4;
  for (int k = 0; k < npos; ++k) {
    std::array<double, N + 1> p{};
    if constexpr (N == 2) {
      double z = 1.0 - 2.0 * (k + 0.5) / npos;
      double phi = 2.39996322972865332 * k;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      p[0] = r * std::cos(phi);
      p[1] = r * std::sin(phi);
      p[2] = z;
    } else {
      double zeta = (k + 0.5) / npos;
      double t1 = 2.39996322972865332 * k, t2 = 1.23606797749978969 * k;
      double r0 = std::sqrt(1.0 - zeta), r1 = std::sqrt(zeta);
      p[0] = r0 * std::cos(t1);
      p[1] = r0 * std::sin(t1);
      p[2] = r1 * std::cos(t2);
      p[3] = r1 * std::sin(t2);
    }
    ChartId chart = p[N] >= 0 ? ChartId::North : ChartId::South;
    Vec<double, N> u = ambient_to_chart<double, N>(chart, p);
    int na = (N == 2) ? gp : gp / 4;
    for (int ia = 0; ia < na; ++ia) {
      std::array<double, 2> ang{2.0 * pi * ia / na, 0.0};
      int nb = (N == 2) ? 1 : gp / 4;
      for (int ib = 0; ib < nb; ++ib) {
        if constexpr (N == 3) ang[1] = -pi / 2 + pi * (ib + 0.5) / nb;
        double v = objective(chart, u, ang);
        if (v > best) {
          best = v;
          best_chart = chart;
          best_u = u;
          best_ang = ang;
        }
      }
    }
  }

  // compass ascent in (u, angles)
  double step = 0.5 / gp;
  double astep = pi / gp;
  for (int it = 0; it < 50 && (step > refine_tol || astep > refine_tol); ++it) {
    bool improved = false;
    for (int i = 0; i < N; ++i)
      for (double s : {step, -step}) {
        Vec<double, N> u = best_u;
        u[i] += s;
        double v = objective(best_chart, u, best_ang);
        if (v > best) { best = v; best_u = u; improved = true; }
      }
    int nang = (N == 2) ? 1 : 2;
    for (int i = 0; i < nang; ++i)
      for (double s : {astep, -astep}) {
        auto ang = best_ang;
        ang[i] += s;
        double v = objective(best_chart, best_u, ang);
        if (v > best) { best = v; best_ang = ang; improved = true; }
      }
    if (!improved) { step *= 0.5; astep *= 0.5; }
  }

  ReversibilityResult r;
  r.lambda = std::max(best, 1.0);
  r.chart = best_chart;
  Vec<double, N> y = detail::dir_from_angles<N>(best_ang);
  double f = m.template eval<double>(best_chart, best_u, y);
  for (int i = 0; i < N; ++i) {
    r.witness_u[i] = best_u[i];
    r.witness_y[i] = y[i] / f;
  }
  return r;
}

}  // namespace fcg

#endif
