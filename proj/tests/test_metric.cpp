#include <cmath>
#include <random>

#include "doctest.h"
#include "fcg/metric.hpp"
#include "fcg/metric_spec.hpp"

using namespace fcg;

namespace {

const double kPi = 3.14159265358979323846;

std::mt19937_64 rng(20240915);

Tangent<2> random_tangent(double umax = 1.4) {
  std::uniform_real_distribution<double> U(-umax, umax), Y(-2.0, 2.0);
  std::uniform_int_distribution<int> C(0, 1);
  Tangent<2> v;
  v.base.chart = C(rng) ? ChartId::North : ChartId::South;
  for (;;) {
    v.base.u = {U(rng), U(rng)};
    if (norm2<double, 2>(v.base.u) <= umax * umax) break;
  }
  for (;;) {
    v.y = {Y(rng), Y(rng)};
    if (value_norm<double, 2>(v.y) > 0.1) break;
  }
  return v;
}

// Independent length oracle: norm of the pushed-forward tangent in ambient
// R^3, where the round sphere has its induced metric.
double ambient_round_norm(const Tangent<2>& v) {
  auto q = push_tangent<double, 2>(v.base.chart, v.base.u, v.y);
  return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
}

// Independent navigation oracle: F is the speed solving |y/F - W|_h = 1,
// found by bisection on the residual.
double navigation_F_oracle(const Metric<2>& m, const Tangent<2>& v) {
  auto hnorm = [&](const Vec<double, 2>& u, const Vec<double, 2>& a) {
    double w = 1.0 + norm2<double, 2>(u);
    return (2.0 / w) * std::sqrt(norm2<double, 2>(a));
  };
  Vec<double, 2> W = m.wind<double>(v.base.chart, v.base.u);
  auto resid = [&](double F) {
    Vec<double, 2> d = {v.y[0] / F - W[0], v.y[1] / F - W[1]};
    return hnorm(v.base.u, d) - 1.0;
  };
  double lo = 1e-8, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (resid(mid) > 0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("round F equals ambient arc-length rate") {
  auto m = Metric<2>::round();
  Tangent<2> v;
  v.base.u = {0, 0};
  v.y = {1, 0};
  CHECK(eval_F(m, v) == doctest::Approx(2.0).epsilon(1e-14));
  for (int i = 0; i < 200; ++i) {
    Tangent<2> w = random_tangent();
    CHECK(eval_F(m, w) == doctest::Approx(ambient_round_norm(w)).epsilon(1e-12));
  }
}

TEST_CASE("katok F along the wind matches the navigation oracle") {
  for (double eps : {0.1, 1.0 / 3.0, 0.5}) {
    auto m = Metric<2>::katok(eps);
    // equator point u = (1,0); chart wind there is (0, eps); round-unit vector
    // along the wind is (0,1).
    Tangent<2> v;
    v.base.u = {1, 0};
    v.y = {0, 1};
    double f = eval_F(m, v);
    CHECK(f == doctest::Approx(1.0 / (1.0 + eps)).epsilon(1e-12));
    CHECK(f == doctest::Approx(navigation_F_oracle(m, v)).epsilon(1e-7));
    // and against the wind
    Tangent<2> w = v;
    w.y = {0, -1};
    CHECK(eval_F(m, w) == doctest::Approx(1.0 / (1.0 - eps)).epsilon(1e-12));
  }
}

TEST_CASE("katok(0) degenerates to round") {
  auto k0 = Metric<2>::katok(0.0);
  auto r = Metric<2>::round();
  for (int i = 0; i < 1000; ++i) {
    Tangent<2> v = random_tangent();
    CHECK(std::abs(eval_F(k0, v) - eval_F(r, v)) <= 1e-12 * eval_F(r, v));
  }
}

TEST_CASE("positive 1-homogeneity and positivity") {
  auto m = Metric<2>::katok(1.0 / 3.0);
  for (int i = 0; i < 100; ++i) {
    Tangent<2> v = random_tangent();
    double f = eval_F(m, v);
    CHECK(f > 0.0);
    for (double t : {0.5, 2.0, 7.0}) {
      Tangent<2> w = v;
      w.y = scaled(v.y, t);
      CHECK(std::abs(eval_F(m, w) - t * f) <= 1e-10 * t * f);
    }
  }
}

TEST_CASE("chart consistency on the overlap") {
  for (auto m : {Metric<2>::round(), Metric<2>::katok(1.0 / 3.0)}) {
    for (int i = 0; i < 200; ++i) {
      Tangent<2> v = random_tangent();
      double r2 = norm2<double, 2>(v.base.u);
      if (r2 < 0.2) continue;  // other chart representation too far out
      Tangent<2> w = v;
      Vec<double, 2> u = v.base.u, y = v.y;
      transition<double, 2>(u, y);
      w.base.chart = other(v.base.chart);
      w.base.u = u;
      w.y = y;
      CHECK(eval_F(m, w) == doctest::Approx(eval_F(m, v)).epsilon(1e-10));
    }
  }
}

TEST_CASE("fundamental tensor: round closed form and FD oracle") {
  auto m = Metric<2>::round();
  Tangent<2> v;
  v.base.u = {0, 0};
  v.y = {1, 0};
  auto q = fundamental_quantities(m, v);
  CHECK(q.g[0][0] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(q.g[1][1] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(std::abs(q.g[0][1]) < 1e-9);
}

TEST_CASE("fundamentals agree with central differences") {
  auto m = Metric<2>::katok(1.0 / 3.0);
  auto L = [&](const Tangent<2>& v) { return m.lagrangian<double>(v.base.chart, v.base.u, v.y); };
  for (int s = 0; s < 20; ++s) {
    Tangent<2> v = random_tangent();
    double h = 1e-5 * (1.0 + value_norm<double, 2>(v.y));
    auto q = fundamental_quantities(m, v);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        auto vv = v;
        auto perturb = [&](int slot, int k, double d) {
          if (slot == 0) vv.base.u[k] += d; else vv.y[k] += d;
        };
        // d2L/dy_i dx_j
        double acc = 0;
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            vv = v;
            perturb(1, i, si * h);
            perturb(0, j, sj * h);
            acc += si * sj * L(vv);
          }
        double fd = acc / (4 * h * h);
        CHECK(q.Lyx[i][j] == doctest::Approx(fd).epsilon(1e-5));
        // g
        acc = 0;
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            vv = v;
            perturb(1, i, si * h);
            perturb(1, j, sj * h);
            acc += si * sj * L(vv);
          }
        fd = acc / (4 * h * h);
        CHECK(q.g[i][j] == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("g is 0-homogeneous in y") {
  auto m = Metric<2>::katok(0.3);
  for (int s = 0; s < 50; ++s) {
    Tangent<2> v = random_tangent();
    auto q1 = fundamental_quantities(m, v);
    for (double t : {0.5, 2.0, 7.0}) {
      Tangent<2> w = v;
      w.y = scaled(v.y, t);
      auto q2 = fundamental_quantities(m, w);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          CHECK(std::abs(q2.g[i][j] - q1.g[i][j]) <= 1e-8 * (1.0 + std::abs(q1.g[i][j])));
    }
  }
}

TEST_CASE("killing wind preserves its round norm along its flow") {
  auto m = Metric<2>::katok(0.4);
  auto wind_norm = [&](const Vec<double, 2>& u, ChartId chart) {
    auto W = m.wind<double>(chart, u);
    double w = 1.0 + norm2<double, 2>(u);
    return (2.0 / w) * std::sqrt(norm2<double, 2>(W));
  };
  std::uniform_real_distribution<double> U(-1.2, 1.2);
  for (int s = 0; s < 50; ++s) {
    Vec<double, 2> u = {U(rng), U(rng)};
    double n0 = wind_norm(u, ChartId::North);
    // flow of the wind is rotation of the chart plane
    for (double a : {0.3, 1.1, 2.7}) {
      Vec<double, 2> v = {std::cos(a) * u[0] - std::sin(a) * u[1],
                          std::sin(a) * u[0] + std::cos(a) * u[1]};
      CHECK(std::abs(wind_norm(v, ChartId::North) - n0) <= 1e-8);
    }
  }
}

TEST_CASE("reversibility") {
  CHECK(reversibility(Metric<2>::round()).lambda == doctest::Approx(1.0).epsilon(1e-8));
  for (double eps : {0.1, 1.0 / 3.0, 0.5}) {
    auto r = reversibility(Metric<2>::katok(eps));
    CHECK(r.lambda == doctest::Approx((1 + eps) / (1 - eps)).epsilon(1e-6));
  }
}

TEST_CASE("katok_expected closed forms") {
  auto e = katok_expected(1.0 / 3.0);
  CHECK(e.lambda == doctest::Approx(2.0));
  CHECK(e.L1 == doctest::Approx(1.5 * kPi));
  CHECK(e.L2 == doctest::Approx(3.0 * kPi));
  e = katok_expected(0.0);
  CHECK(e.lambda == doctest::Approx(1.0));
  CHECK(e.L1 == doctest::Approx(2 * kPi));
  CHECK(e.L2 == doctest::Approx(2 * kPi));
  e = katok_expected(0.5);
  CHECK(e.lambda == doctest::Approx(3.0));
  CHECK(e.L1 == doctest::Approx(4.0 * kPi / 3.0));
  CHECK(e.L2 == doctest::Approx(4.0 * kPi));
  CHECK_THROWS_AS(katok_expected(1.0), Error);
  CHECK_THROWS_AS(katok_expected(-0.1), Error);
}

TEST_CASE("error paths") {
  auto m = Metric<2>::round();
  Tangent<2> v;
  v.base.u = {0, 0};
  v.y = {0, 0};
  CHECK_THROWS_AS(eval_F(m, v), Error);
  v.y = {1, 0};
  v.base.u = {1e9, 0};
  CHECK_THROWS_AS(eval_F(m, v), Error);
}

TEST_CASE("metric spec json round trip") {
  MetricSpec s = MetricSpec::katok(2, 1.0 / 3.0);
  auto text = metric_spec_to_json_text(s);
  MetricSpec t = metric_spec_from_json_text(text);
  CHECK(t.variant == "katok");
  CHECK(t.n == 2);
  CHECK(t.epsilon == doctest::Approx(1.0 / 3.0));
  auto m = instantiate<2>(t);
  CHECK(m.kind == MetricKind::Katok);
  CHECK_THROWS_AS(metric_spec_from_json_text("{\"variant\":\"katok\",\"n\":2,\"epsilon\":1.5}"), Error);
}

TEST_CASE("custom metric: uniform scaling of round") {
  // F -> 2F doubles lengths
  auto base = Metric<2>::round();
  auto scaled2 = Metric<2>::custom_metric(make_custom<2>(
      [](ChartId chart, const auto& u, const auto& y) {
        using S = std::decay_t<decltype(u[0])>;
        S w = S(1.0) + norm2<S, 2>(u);
        return 4.0 * sqrt(norm2<S, 2>(y)) / w;
      }));
  for (int i = 0; i < 50; ++i) {
    Tangent<2> v = random_tangent();
    CHECK(eval_F(scaled2, v) == doctest::Approx(2.0 * eval_F(base, v)).epsilon(1e-12));
  }
}
