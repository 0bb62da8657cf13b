#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fcg/flow.hpp"

using namespace fcg;

namespace {

const double kPi = 3.14159265358979323846;

std::mt19937_64 rng(777123);

PhaseState<2> random_unit_state(const Metric<2>& m) {
  std::uniform_real_distribution<double> U(-1.2, 1.2), A(0, 2 * kPi);
  PhaseState<2> s;
  s.point.chart = ChartId::North;
  s.point.u = {U(rng), U(rng)};
  double a = A(rng);
  s.velocity = {std::cos(a), std::sin(a)};
  double f = m.eval<double>(s.point.chart, s.point.u, s.velocity);
  s.velocity = scaled(s.velocity, 1.0 / f);
  return s;
}

double phase_distance(const PhaseState<2>& a, const PhaseState<2>& b) {
  auto pa = position(a.point), pb = position(b.point);
  auto va = push_tangent<double, 2>(a.point.chart, a.point.u, a.velocity);
  auto vb = push_tangent<double, 2>(b.point.chart, b.point.u, b.velocity);
  double s = 0;
  for (int i = 0; i < 3; ++i) {
    s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    s += (va[i] - vb[i]) * (va[i] - vb[i]);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("spray reproduces ambient great circles on the round sphere") {
  auto m = Metric<2>::round();
  auto s0 = polar_great_circle_state();
  auto seg = integrate(m, s0, 2.0, 1e-11);
  // ambient oracle: p(t) = e3 cos t + e1 sin t
  for (double t : {0.3, 0.9, 1.5, 1.99}) {
    auto st = seg.state_at(t);
    auto p = position(st.point);
    CHECK(p[0] == doctest::Approx(std::sin(t)).epsilon(1e-8));
    CHECK(std::abs(p[1]) < 1e-9);
    CHECK(p[2] == doctest::Approx(std::cos(t)).epsilon(1e-8));
  }
}

TEST_CASE("spray is 2-homogeneous in velocity") {
  auto m = Metric<2>::katok(1.0 / 3.0);
  std::uniform_real_distribution<double> U(-1.2, 1.2), Y(-2, 2);
  for (int i = 0; i < 100; ++i) {
    Vec<double, 2> u = {U(rng), U(rng)};
    Vec<double, 2> y = {Y(rng), Y(rng)};
    if (value_norm<double, 2>(y) < 0.2) continue;
    auto a1 = spray_accel<double, 2>(m, ChartId::North, u, y);
    auto a2 = spray_accel<double, 2>(m, ChartId::North, u, scaled(y, 2.0));
    for (int k = 0; k < 2; ++k)
      CHECK(a2[k] == doctest::Approx(4.0 * a1[k]).epsilon(1e-8));
  }
}

TEST_CASE("round great circle is 2 pi periodic across chart switches") {
  auto m = Metric<2>::round();
  auto s0 = polar_great_circle_state();
  auto seg = integrate(m, s0, 2 * kPi, 1e-11);
  CHECK(phase_distance(seg.end(), s0) < 1e-8);
  CHECK(seg.F_drift <= 10 * 1e-10);
  // the orbit leaves the north chart on the way
  bool switched = false;
  for (auto& st : seg.dense.steps) switched |= st.chart == ChartId::South;
  CHECK(switched);
}

TEST_CASE("katok equatorial geodesics close at the stated lengths") {
  double eps = 1.0 / 3.0;
  auto m = Metric<2>::katok(eps);
  auto swith = katok_equator_state(eps, +1);
  CHECK(m.eval<double>(swith.point.chart, swith.point.u, swith.velocity) ==
        doctest::Approx(1.0).epsilon(1e-12));
  auto seg1 = integrate(m, swith, 1.5 * kPi, 1e-11);
  CHECK(phase_distance(seg1.end(), swith) < 1e-6);

  auto sagainst = katok_equator_state(eps, -1);
  auto seg2 = integrate(m, sagainst, 3.0 * kPi, 1e-11);
  CHECK(phase_distance(seg2.end(), sagainst) < 1e-6);
}

TEST_CASE("navigation oracle: epsilon zero is the round geodesic") {
  std::array<double, 3> p0 = {0, 0, 1}, v0 = {1, 0, 0};
  for (double t : {0.2, 1.0, 2.5}) {
    auto c = navigation_geodesic<2>(0.0, p0, v0, t);
    auto p = position(c);
    CHECK(p[0] == doctest::Approx(std::sin(t)).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(std::cos(t)).epsilon(1e-12));
  }
}

TEST_CASE("navigation closure times on the equator") {
  double eps = 1.0 / 3.0;
  // with the wind: round geodesic eastward, closes at 2 pi/(1+eps) = 3 pi/2
  std::array<double, 3> p0 = {1, 0, 0}, east = {0, 1, 0}, west = {0, -1, 0};
  auto cw = navigation_geodesic<2>(eps, p0, east, 1.5 * kPi);
  CHECK(chord(cw, navigation_geodesic<2>(eps, p0, east, 0.0)) < 1e-12);
  auto ccw = navigation_geodesic<2>(eps, p0, west, 3.0 * kPi);
  CHECK(chord(ccw, navigation_geodesic<2>(eps, p0, west, 0.0)) < 1e-12);
}

TEST_CASE("integrated geodesics track the navigation construction") {
  for (double eps : {0.1, 1.0 / 3.0}) {
    auto m = Metric<2>::katok(eps);
    struct Case {
      std::array<double, 3> p0, v0;
      double T;
    };
    std::vector<Case> cases = {
        {{1, 0, 0}, {0, 1, 0}, 2 * kPi / (1 + eps)},
        {{1, 0, 0}, {0, -1, 0}, 2 * kPi / (1 - eps)},
        {{1, 0, 0}, {0, 0.6, 0.8}, 2 * kPi},  // tilted great circle
    };
    for (const auto& c : cases) {
      // initial chart state: wind + round-unit velocity at p0
      ChartPoint<2> x;
      x.chart = ChartId::North;
      x.u = ambient_to_chart<double, 2>(x.chart, c.p0);
      Vec<double, 2> yr = pull_tangent<double, 2>(x.chart, c.p0, c.v0);
      Vec<double, 2> W = m.wind<double>(x.chart, x.u);
      PhaseState<2> s;
      s.point = x;
      s.velocity = yr + W;
      auto seg = integrate(m, s, c.T, 1e-11);
      double sup = 0;
      for (int k = 0; k <= 200; ++k) {
        double t = c.T * k / 200.0;
        auto got = seg.state_at(t);
        auto want = navigation_geodesic<2>(eps, c.p0, c.v0, t);
        sup = std::max(sup, chord(got.point, want));
      }
      CHECK(sup <= 1e-6);
    }
  }
}

TEST_CASE("time homogeneity of the flow") {
  auto m = Metric<2>::katok(0.3);
  for (int i = 0; i < 5; ++i) {
    auto s0 = random_unit_state(m);
    auto once = integrate(m, s0, 3.7, 1e-11, false);
    auto first = integrate(m, s0, 1.3, 1e-11, false);
    auto second = integrate(m, first.end(), 2.4, 1e-11, false);
    PhaseState<2> a = once.end(), b = second.end();
    CHECK(phase_distance(a, b) < 1e-8);
  }
}

TEST_CASE("F-speed is conserved along integrated segments") {
  auto m = Metric<2>::katok(0.45);
  for (int i = 0; i < 10; ++i) {
    auto s0 = random_unit_state(m);
    auto seg = integrate(m, s0, 8.0, 1e-10);
    CHECK(seg.F_drift <= 10 * 1e-10);
  }
}

TEST_CASE("linearize: monodromy matches finite differences of the flow") {
  auto m = Metric<2>::katok(1.0 / 3.0);
  auto s0 = random_unit_state(m);
  double T = 2.3;
  auto seg = integrate(m, s0, T, 1e-12);
  auto lf = linearize(m, seg, 1e-12);
  double h = 1e-6;
  for (int c = 0; c < 4; ++c) {
    PhaseState<2> sp = s0, sm = s0;
    if (c < 2) { sp.point.u[c] += h; sm.point.u[c] -= h; }
    else { sp.velocity[c - 2] += h; sm.velocity[c - 2] -= h; }
    auto ep = integrate(m, sp, T, 1e-12, false).end();
    auto em = integrate(m, sm, T, 1e-12, false).end();
    REQUIRE(ep.point.chart == lf.end_chart);
    REQUIRE(em.point.chart == lf.end_chart);
    for (int i = 0; i < 4; ++i) {
      double fd = i < 2 ? (ep.point.u[i] - em.point.u[i]) / (2 * h)
                        : (ep.velocity[i - 2] - em.velocity[i - 2]) / (2 * h);
      CHECK(std::abs(fd - lf.monodromy[i][c]) <= 1e-4 * (1.0 + std::abs(lf.monodromy[i][c])));
    }
  }
}

TEST_CASE("round great circle monodromy is unipotent at T = 2 pi") {
  auto m = Metric<2>::round();
  auto seg = integrate(m, polar_great_circle_state(), 2 * kPi, 1e-12);
  auto lf = linearize(m, seg, 1e-12);
  // all four eigenvalues equal one; Jordan structure makes the numerical
  // eigenvalues split like sqrt of the integration error
  double charpoly_at_1 = 0;  // det(M - I) should vanish
  Mat<double, 4> A = lf.monodromy;
  for (int i = 0; i < 4; ++i) A[i][i] -= 1.0;
  // 4x4 determinant by expansion over the first row via 3x3 minors
  auto det3 = [](const Mat<double, 4>& M, int r0, int c0) {
    int rs[3], cs[3], ri = 0, ci = 0;
    for (int i = 0; i < 4; ++i) if (i != r0) rs[ri++] = i;
    for (int j = 0; j < 4; ++j) if (j != c0) cs[ci++] = j;
    return M[rs[0]][cs[0]] * (M[rs[1]][cs[1]] * M[rs[2]][cs[2]] - M[rs[1]][cs[2]] * M[rs[2]][cs[1]]) -
           M[rs[0]][cs[1]] * (M[rs[1]][cs[0]] * M[rs[2]][cs[2]] - M[rs[1]][cs[2]] * M[rs[2]][cs[0]]) +
           M[rs[0]][cs[2]] * (M[rs[1]][cs[0]] * M[rs[2]][cs[1]] - M[rs[1]][cs[1]] * M[rs[2]][cs[0]]);
  };
  for (int j = 0; j < 4; ++j)
    charpoly_at_1 += (j % 2 ? -1.0 : 1.0) * A[0][j] * det3(A, 0, j);
  CHECK(std::abs(charpoly_at_1) < 1e-6);
}

TEST_CASE("conjugate points: round sphere at pi, 2 pi") {
  auto m = Metric<2>::round();
  auto zeros = conjugate_points(m, polar_great_circle_state(), 2.2 * kPi);
  REQUIRE(zeros.size() == 2);
  CHECK(zeros[0] == doctest::Approx(kPi).epsilon(1e-8));
  CHECK(zeros[1] == doctest::Approx(2 * kPi).epsilon(1e-8));
}

TEST_CASE("conjugate spacing pi on katok geodesics") {
  auto m = Metric<2>::katok(1.0 / 3.0);
  for (int i = 0; i < 20; ++i) {
    auto s0 = random_unit_state(m);
    auto zeros = conjugate_points(m, s0, 2.5 * kPi);
    REQUIRE(zeros.size() >= 2);
    CHECK(std::abs(zeros[0] - kPi) <= 1e-4);
    CHECK(std::abs(zeros[1] - zeros[0] - kPi) <= 1e-4);
  }
}

TEST_CASE("conjugate points scale with the metric") {
  // doubling F halves the curvature scale: first conjugate point at 2 pi
  auto doubled = Metric<2>::custom_metric(make_custom<2>(
      [](ChartId, const auto& u, const auto& y) {
        using S = std::decay_t<decltype(u[0])>;
        S w = S(1.0) + norm2<S, 2>(u);
        return 4.0 * sqrt(norm2<S, 2>(y)) / w;
      }));
  PhaseState<2> s0;
  s0.point.chart = ChartId::North;
  s0.point.u = {0, 0};
  s0.velocity = {0.25, 0};  // unit F-speed for the doubled metric
  auto zeros = conjugate_points(doubled, s0, 2.2 * kPi);
  REQUIRE(zeros.size() >= 1);
  CHECK(zeros[0] == doctest::Approx(2 * kPi).epsilon(1e-7));
}

TEST_CASE("segment jsonl dump") {
  auto m = Metric<2>::round();
  auto seg = integrate(m, polar_great_circle_state(), 1.0, 1e-10);
  std::ostringstream os;
  dump_segment_jsonl(seg, os);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    CHECK(line.find("\"t\":") != std::string::npos);
    CHECK(line.find("\"chart\":") != std::string::npos);
    CHECK(line.find("\"u\":") != std::string::npos);
    CHECK(line.find("\"y\":") != std::string::npos);
  }
  CHECK(lines == (int)seg.dense.steps.size() + 1);
}
