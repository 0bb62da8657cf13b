#ifndef FCG_CHART_HPP
#define FCG_CHART_HPP

#include <array>
#include <cmath>

#include "fcg/smallmat.hpp"

namespace fcg {

// Two stereographic charts on S^n.  North is centered at the north pole
// (projection from the south pole), so the covered cap is |u| <= R_switch
// with the equator at |u| = 1.  Transition on the overlap is inversion.
enum class ChartId { North, South };

inline ChartId other(ChartId c) { return c == ChartId::North ? ChartId::South : ChartId::North; }
inline const char* chart_name(ChartId c) { return c == ChartId::North ? "north" : "south"; }

constexpr double kRSwitch = 1.5;

template <int N>
struct ChartPoint {
  ChartId chart = ChartId::North;
  Vec<double, N> u{};
};

template <class S, int N>
std::array<S, N + 1> chart_to_ambient(ChartId chart, const Vec<S, N>& u) {
  S w = S(1.0) + norm2<S, N>(u);
  std::array<S, N + 1> p;
  for (int i = 0; i < N; ++i) p[i] = 2.0 * u[i] / w;
  S z = (S(2.0) / w) - 1.0;
  p[N] = chart == ChartId::North ? z : -z;
  return p;
}

template <class S, int N>
Vec<S, N> ambient_to_chart(ChartId chart, const std::array<S, N + 1>& p) {
  S d = chart == ChartId::North ? S(1.0) + p[N] : S(1.0) - p[N];
  Vec<S, N> u;
  for (int i = 0; i < N; ++i) u[i] = p[i] / d;
  return u;
}

// Differential of the inverse projection: chart tangent -> ambient tangent.
template <class S, int N>
std::array<S, N + 1> push_tangent(ChartId chart, const Vec<S, N>& u, const Vec<S, N>& y) {
  S w = S(1.0) + norm2<S, N>(u);
  S dw = 2.0 * dot<S, N>(u, y);
  std::array<S, N + 1> q;
  for (int i = 0; i < N; ++i) q[i] = 2.0 * y[i] / w - 2.0 * u[i] * dw / (w * w);
  S qz = -2.0 * dw / (w * w);
  q[N] = chart == ChartId::North ? qz : -qz;
  return q;
}

// Differential of the projection: ambient tangent at p -> chart tangent.
template <class S, int N>
Vec<S, N> pull_tangent(ChartId chart, const std::array<S, N + 1>& p,
                       const std::array<S, N + 1>& q) {
  S sgn = chart == ChartId::North ? S(1.0) : S(-1.0);
  S d = S(1.0) + sgn * p[N];
  Vec<S, N> y;
  for (int i = 0; i < N; ++i) y[i] = q[i] / d - p[i] * sgn * q[N] / (d * d);
  return y;
}

// Inversion u -> u/|u|^2 between the two charts, with tangent map.
template <class S, int N>
void transition(Vec<S, N>& u, Vec<S, N>& y) {
  S r2 = norm2<S, N>(u);
  S uy = dot<S, N>(u, y);
  Vec<S, N> un, yn;
  for (int i = 0; i < N; ++i) {
    un[i] = u[i] / r2;
    yn[i] = y[i] / r2 - 2.0 * uy * u[i] / (r2 * r2);
  }
  u = un;
  y = yn;
}

template <int N>
std::array<double, N + 1> position(const ChartPoint<N>& x) {
  return chart_to_ambient<double, N>(x.chart, x.u);
}

// Chart-independent distance between points on the sphere (ambient chord).
template <int N>
double chord(const ChartPoint<N>& a, const ChartPoint<N>& b) {
  auto pa = position(a), pb = position(b);
  double s = 0;
  for (int i = 0; i <= N; ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return std::sqrt(s);
}

}  // namespace fcg

#endif
