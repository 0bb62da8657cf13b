#include "fcg/orbits.hpp"

#include <map>

#include "fcg/metric_spec.hpp"
#include "json.hpp"

namespace fcg {

using detail::apply3;
using detail::BvpSolution;
using detail::shoot;

namespace {

Mat<double, 3> transpose3(const Mat<double, 3>& A) {
  Mat<double, 3> T{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) T[i][j] = A[j][i];
  return T;
}

std::array<double, 3> chart_to_sphere(ChartId chart, const Vec<double, 2>& u) {
  return chart_to_ambient<double, 2>(chart, u);
}

struct FieldPoint {
  double f = -1;  // theta^2, negative = unavailable
  BvpSolution sol;
};

}  // namespace

std::vector<ClosedGeodesic<2>> invariant_via_displacement(const Metric<2>& m,
                                                          const Mat<double, 3>& A, int order,
                                                          const DisplacementOptions& opt) {
  if (order < 2) fail(ErrorCode::BadInput, "isometry order must be at least 2");
  const double pi = 3.14159265358979323846;

  std::vector<ClosedGeodesic<2>> collected;

  for (const Mat<double, 3>& iso : {A, transpose3(A)}) {
    auto displaced = [&](const std::array<double, 3>& p) { return apply3(iso, p); };
    auto fixed_point = [&](const std::array<double, 3>& p) {
      auto q = displaced(p);
      double d = 0;
      for (int i = 0; i < 3; ++i) d += (q[i] - p[i]) * (q[i] - p[i]);
      return std::sqrt(d) < 0.05;
    };

    auto eval_f = [&](const std::array<double, 3>& p, const BvpSolution* warm) -> FieldPoint {
      FieldPoint fp;
      if (fixed_point(p)) return fp;
      auto sol = shoot(m, p, displaced(p), opt, warm);
      if (!sol) return fp;
      fp.sol = *sol;
      fp.f = sol->theta * sol->theta;
      return fp;
    };

    // latitude-longitude grid; poles excluded by the fixed-point guard
    int nlat = opt.grid, nlon = 2 * opt.grid;
    std::vector<std::vector<FieldPoint>> field(nlat, std::vector<FieldPoint>(nlon));
    for (int i = 0; i < nlat; ++i) {
      double lat = -pi / 2 + pi * (i + 0.5) / nlat;
      const FieldPoint* warm = nullptr;
      for (int j = 0; j < nlon; ++j) {
        double lon = 2 * pi * j / nlon;
        std::array<double, 3> p = {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                                   std::sin(lat)};
        field[i][j] = eval_f(p, warm && warm->f > 0 ? &warm->sol : nullptr);
        warm = &field[i][j];
      }
    }

    // local maxima over the 8-neighborhood (longitude wraps); ties allowed so
    // that degenerate maximum circles, constant along a latitude, survive
    std::vector<std::pair<int, int>> maxima;
    for (int i = 0; i < nlat; ++i)
      for (int j = 0; j < nlon; ++j) {
        if (field[i][j].f <= 0) continue;
        bool is_max = true;
        for (int di = -1; di <= 1 && is_max; ++di)
          for (int dj = -1; dj <= 1 && is_max; ++dj) {
            if (!di && !dj) continue;
            int ii = i + di;
            if (ii < 0 || ii >= nlat) continue;
            int jj = (j + dj + nlon) % nlon;
            if (field[ii][jj].f > field[i][j].f + 1e-12) is_max = false;
          }
        if (is_max) maxima.push_back({i, j});
      }
    std::sort(maxima.begin(), maxima.end(), [&](auto a, auto b) {
      return field[a.first][a.second].f > field[b.first][b.second].f;
    });
    // a tie-circle floods the grid row; a few representatives are enough
    if ((int)maxima.size() > 4) maxima.resize(4);

    int ascent_failures = 0;
    for (auto [i0, j0] : maxima) {
      double lat = -pi / 2 + pi * (i0 + 0.5) / nlat;
      double lon = 2 * pi * j0 / nlon;
      std::array<double, 3> p = {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                                 std::sin(lat)};
      ChartId chart = p[2] >= 0 ? ChartId::North : ChartId::South;
      Vec<double, 2> u = ambient_to_chart<double, 2>(chart, p);
      FieldPoint cur = field[i0][j0];

      // shrinking compass ascent in chart coordinates
      double step = pi / nlat;
      int evals = 0;
      while (step > opt.ascent_tol && evals < 4000) {
        bool improved = false;
        for (int d = 0; d < 4; ++d) {
          Vec<double, 2> v = u;
          v[d / 2] += (d % 2 ? -step : step);
          auto q = chart_to_sphere(chart, v);
          FieldPoint fp = eval_f(q, &cur.sol);
          ++evals;
          if (fp.f > cur.f) {
            cur = fp;
            u = v;
            improved = true;
            break;
          }
        }
        if (!improved) step *= 0.5;
      }
      if (step > opt.ascent_tol) {
        ++ascent_failures;
        continue;
      }

      // close the invariant geodesic over `order` arcs and polish
      PhaseState<2> s;
      s.point.chart = chart;
      s.point.u = u;
      s.velocity = {std::cos(cur.sol.psi), std::sin(cur.sol.psi)};
      double f = m.eval<double>(s.point.chart, s.point.u, s.velocity);
      s.velocity = scaled(s.velocity, 1.0 / f);
      double T = order * cur.sol.theta;
      FindOptions fopt;
      auto polished = polish_orbit(m, s, T, T * 1.25 + 0.5, fopt);
      if (!polished) continue;
      auto [prime, mult] = prime_decompose(m, *polished, fopt);
      collected.push_back(prime);
    }
    if (collected.empty() && ascent_failures > 0)
      fail(ErrorCode::NotCritical, "displacement ascent stalled before criticality");
  }

  auto [dedup, rep] = distinct_filter(m, collected, 1e-5);
  (void)rep;
  return dedup;
}

// --- orbit store -------------------------------------------------------------

using nlohmann::json;

static json orbit_to_json(const ClosedGeodesic<2>& c) {
  json j;
  j["L"] = c.L;
  j["m"] = c.multiplicity;
  j["prime"] = c.prime;
  j["residual"] = c.residual;
  j["initial"] = {{"chart", chart_name(c.initial.point.chart)},
                  {"u", std::vector<double>{c.initial.point.u[0], c.initial.point.u[1]}},
                  {"y", std::vector<double>{c.initial.velocity[0], c.initial.velocity[1]}}};
  return j;
}

std::string orbits_to_json_text(const MetricSpec& spec, double budget,
                                const std::vector<ClosedGeodesic<2>>& orbits) {
  json j;
  j["metric"] = json::parse(metric_spec_to_json_text(spec));
  j["budget"] = budget;
  j["orbits"] = json::array();
  for (const auto& c : orbits) j["orbits"].push_back(orbit_to_json(c));
  return j.dump(2) + "\n";
}

OrbitStore orbits_from_json_text(const std::string& text) {
  json j = json::parse(text);
  OrbitStore st;
  st.spec = metric_spec_from_json_text(j.at("metric").dump());
  st.budget = j.value("budget", 0.0);
  for (const auto& o : j.at("orbits")) {
    ClosedGeodesic<2> c;
    c.L = o.at("L").get<double>();
    c.multiplicity = o.value("m", 1);
    c.prime = o.value("prime", true);
    c.residual = o.value("residual", 0.0);
    const auto& init = o.at("initial");
    std::string chart = init.at("chart").get<std::string>();
    c.initial.point.chart = chart == "north" ? ChartId::North : ChartId::South;
    auto u = init.at("u").get<std::vector<double>>();
    auto y = init.at("y").get<std::vector<double>>();
    c.initial.point.u = {u[0], u[1]};
    c.initial.velocity = {y[0], y[1]};
    st.orbits.push_back(c);
  }
  return st;
}

}  // namespace fcg
