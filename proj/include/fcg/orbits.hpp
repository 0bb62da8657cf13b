#ifndef FCG_ORBITS_HPP
#define FCG_ORBITS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "fcg/flow.hpp"
#include "fcg/metric_spec.hpp"

namespace fcg {

template <int N>
struct ClosedGeodesic {
  PhaseState<N> initial;  // unit F-speed
  double L = 0;           // period = length
  int multiplicity = 1;
  bool prime = true;
  double residual = 0;  // phase defect of flow_L at double integrator accuracy
};

struct FindStats {
  int seeds = 0;
  int candidates = 0;
  int skipped_by_prefilter = 0;
  int newton_failures = 0;
  int jacobian_retries = 0;
};

struct FindOptions {
  double tol = 1e-11;            // Newton residual target
  double integrator_tol = 1e-11;
  double verify_tol = 1e-12;     // residual is re-measured at this accuracy
  int grid = 24;                 // grid x grid seeds on the unit sphere bundle
  double close_return = 0.3;
  double trace_tol = 1e-5;
  std::uint64_t seed = 12345;
  bool symmetry_seeds = true;
  int max_candidates_per_seed = 3;
};

namespace detail {

template <int N>
std::array<double, 2 * (N + 1)> phase_embed(const PhaseState<N>& s) {
  std::array<double, 2 * (N + 1)> e{};
  auto p = position(s.point);
  auto v = push_tangent<double, N>(s.point.chart, s.point.u, s.velocity);
  for (int i = 0; i <= N; ++i) {
    e[i] = p[i];
    e[N + 1 + i] = v[i];
  }
  return e;
}

template <int N>
double phase_dist(const PhaseState<N>& a, const PhaseState<N>& b) {
  auto ea = phase_embed(a), eb = phase_embed(b);
  double s = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) s += (ea[i] - eb[i]) * (ea[i] - eb[i]);
  return std::sqrt(s);
}

// Express a phase state in a prescribed chart (possible whenever the point
// is not at that chart's antipode).
template <int N>
PhaseState<N> in_chart(const PhaseState<N>& s, ChartId chart) {
  if (s.point.chart == chart) return s;
  PhaseState<N> r = s;
  transition<double, N>(r.point.u, r.velocity);
  r.point.chart = chart;
  return r;
}

}  // namespace detail

// Newton polish of a near-closure candidate.  Unknowns (u, y, T); residuals
// are the phase defect in the start chart, a section anchor through the
// seed, and the unit-speed normalization.
template <int N>
std::optional<ClosedGeodesic<N>> polish_orbit(const Metric<N>& m, PhaseState<N> s, double T,
                                              double budget, const FindOptions& opt,
                                              FindStats* stats = nullptr) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n2 = 2 * N;

  // anchor direction: phase velocity at the seed
  Vec<double, N> acc0 = spray_accel<double, N>(m, s.point.chart, s.point.u, s.velocity);
  VectorXd anchor(n2);
  for (int i = 0; i < N; ++i) {
    anchor(i) = s.velocity[i];
    anchor(N + i) = acc0[i];
  }
  anchor.normalize();
  VectorXd q0(n2);
  for (int i = 0; i < N; ++i) {
    q0(i) = s.point.u[i];
    q0(N + i) = s.velocity[i];
  }

  ChartId chart0 = s.point.chart;
  PhaseState<N> cur = s;
  double curT = T;

  auto evaluate = [&](const PhaseState<N>& st, double Tv, VectorXd& resid, MatrixXd& J) {
    auto seg = integrate(m, st, Tv, opt.integrator_tol, false);
    auto lf = linearize(m, seg, opt.integrator_tol);
    PhaseState<N> end = seg.end();
    // fold the end state and the monodromy into the start chart
    Mat<double, 2 * N> G = lf.monodromy;
    if (end.point.chart != chart0) {
      Vec<double, N> u0 = end.point.u, y0 = end.velocity;
      for (int c = 0; c < n2; ++c) {
        Vec<D1, N> u, y;
        for (int i = 0; i < N; ++i) {
          u[i] = D1(u0[i], G[i][c]);
          y[i] = D1(y0[i], G[N + i][c]);
        }
        transition<D1, N>(u, y);
        for (int i = 0; i < N; ++i) {
          G[i][c] = u[i].b;
          G[N + i][c] = y[i].b;
        }
      }
      end = detail::in_chart(end, chart0);
    }
    Vec<double, N> endrhs_a = spray_accel<double, N>(m, end.point.chart, end.point.u, end.velocity);

    resid.resize(n2 + 2);
    J.resize(n2 + 2, n2 + 1);
    VectorXd q(n2);
    for (int i = 0; i < N; ++i) {
      q(i) = st.point.u[i];
      q(N + i) = st.velocity[i];
      resid(i) = end.point.u[i] - st.point.u[i];
      resid(N + i) = end.velocity[i] - st.velocity[i];
    }
    for (int i = 0; i < n2; ++i) {
      for (int c = 0; c < n2; ++c) J(i, c) = G[i][c] - (i == c ? 1.0 : 0.0);
      J(i, n2) = i < N ? end.velocity[i] : endrhs_a[i - N];
    }
    resid(n2) = anchor.dot(q - q0);
    for (int c = 0; c < n2; ++c) J(n2, c) = anchor(c);
    J(n2, n2) = 0.0;
    // unit F-speed row
    Vec<D1, N> du, dy;
    double fval = m.template eval<double>(st.point.chart, st.point.u, st.velocity);
    resid(n2 + 1) = fval - 1.0;
    for (int c = 0; c < n2; ++c) {
      for (int i = 0; i < N; ++i) {
        du[i] = D1(st.point.u[i], c == i ? 1.0 : 0.0);
        dy[i] = D1(st.velocity[i], c == N + i ? 1.0 : 0.0);
      }
      D1 f = m.template eval<D1>(st.point.chart, du, dy);
      J(n2 + 1, c) = f.b;
    }
    J(n2 + 1, n2) = 0.0;
  };

  VectorXd resid;
  MatrixXd J;
  bool perturbed = false;
  int stagnant = 0;
  double prev_norm = 1e300;
  for (int it = 0; it < 24; ++it) {
    try {
      evaluate(cur, curT, resid, J);
    } catch (const Error&) {
      if (stats) stats->newton_failures++;
      return std::nullopt;
    }
    double rn = resid.norm();
    if (rn < opt.tol) break;
    stagnant = rn > 0.7 * prev_norm ? stagnant + 1 : 0;
    prev_norm = rn;
    // minimum-norm Gauss-Newton step; rank deficiency is structural when the
    // orbit sits in a continuous family (round sphere), so proceed with the
    // pseudo-inverse and only perturb a genuinely singular first iterate
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(J);
    if (cod.rank() < n2 - 1 && it == 0 && !perturbed) {
      perturbed = true;
      if (stats) stats->jacobian_retries++;
      std::mt19937_64 prng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
      std::uniform_real_distribution<double> D(-1e-4, 1e-4);
      for (int i = 0; i < N; ++i) cur.point.u[i] += D(prng);
      continue;
    }
    if (stagnant >= 5) {
      if (stats) stats->newton_failures++;
      return std::nullopt;
    }
    VectorXd step = cod.solve(-resid);
    double sn = step.norm();
    if (sn > 0.5) step *= 0.5 / sn;  // trust region
    for (int i = 0; i < N; ++i) {
      cur.point.u[i] += step(i);
      cur.velocity[i] += step(N + i);
    }
    curT += step(n2);
    if (!(curT > 0.5) || !(curT < budget * 1.5)) return std::nullopt;
  }
  if (resid.size() == 0 || resid.norm() >= 10 * opt.tol) {
    if (stats) stats->newton_failures++;
    return std::nullopt;
  }

  // exact unit-speed normalization
  double f = m.template eval<double>(cur.point.chart, cur.point.u, cur.velocity);
  cur.velocity = scaled(cur.velocity, 1.0 / f);
  curT *= f;
  if (curT > budget) return std::nullopt;

  // residual at double integrator accuracy
  auto verify = integrate(m, cur, curT, opt.verify_tol, false);
  double rd = detail::phase_dist(verify.end(), cur);

  ClosedGeodesic<N> c;
  c.initial = cur;
  c.initial.time = 0;
  c.L = curT;
  c.residual = rd;
  if (rd > 1e-9) return std::nullopt;
  return c;
}

// Smallest sub-period closure: returns the underlying prime orbit and the
// covering multiplicity.
template <int N>
std::pair<ClosedGeodesic<N>, int> prime_decompose(const Metric<N>& m, const ClosedGeodesic<N>& c,
                                                  const FindOptions& opt = {}) {
  auto seg = integrate(m, c.initial, c.L, opt.integrator_tol);
  int kmax = std::max(1, (int)std::floor(c.L / 1.5));
  for (int k = kmax; k >= 2; --k) {
    double t = c.L / k;
    auto st = seg.state_at(t);
    if (detail::phase_dist(st, c.initial) < 1e-6) {
      auto polished = polish_orbit(m, c.initial, t, c.L, opt);
      if (polished) {
        ClosedGeodesic<N> p = *polished;
        p.prime = true;
        p.multiplicity = 1;
        return {p, k};
      }
    }
  }
  ClosedGeodesic<N> p = c;
  p.prime = true;
  p.multiplicity = 1;
  return {p, 1};
}

struct DistinctPair {
  int i = 0, j = 0;
  double trace_distance = 0;
  bool orientation_match = false;
  bool equivalent = false;
};

struct DistinctnessReport {
  std::vector<DistinctPair> pairs;
};

namespace detail {

template <int N>
struct TraceSamples {
  std::vector<std::array<double, N + 1>> pos;
  std::vector<std::array<double, N + 1>> vel;  // unit F-speed pushed to ambient
};

template <int N>
TraceSamples<N> sample_trace(const Metric<N>& m, const ClosedGeodesic<N>& c, int samples,
                             double tol) {
  auto seg = integrate(m, c.initial, c.L, tol);
  TraceSamples<N> tr;
  tr.pos.reserve(samples);
  tr.vel.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    auto st = seg.state_at(c.L * k / samples);
    tr.pos.push_back(position(st.point));
    tr.vel.push_back(push_tangent<double, N>(st.point.chart, st.point.u, st.velocity));
  }
  return tr;
}

template <int N>
double point_to_closed_polyline(const std::array<double, N + 1>& p,
                                const std::vector<std::array<double, N + 1>>& poly) {
  double best = 1e300;
  const std::size_t n = poly.size();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& a = poly[j];
    const auto& b = poly[(j + 1) % n];
    double ab2 = 0, ap_ab = 0;
    for (int i = 0; i <= N; ++i) {
      ab2 += (b[i] - a[i]) * (b[i] - a[i]);
      ap_ab += (p[i] - a[i]) * (b[i] - a[i]);
    }
    double t = ab2 > 0 ? std::clamp(ap_ab / ab2, 0.0, 1.0) : 0.0;
    double d = 0;
    for (int i = 0; i <= N; ++i) {
      double c = a[i] + t * (b[i] - a[i]);
      d += (p[i] - c) * (p[i] - c);
    }
    best = std::min(best, d);
  }
  return std::sqrt(best);
}

// Symmetric Hausdorff distance between traces, measured point-to-polyline so
// that sampling phase does not pollute the small-distance regime.
template <int N>
double hausdorff(const TraceSamples<N>& a, const TraceSamples<N>& b) {
  auto one_sided = [](const TraceSamples<N>& x, const TraceSamples<N>& y) {
    double worst = 0;
    for (const auto& p : x.pos) worst = std::max(worst, point_to_closed_polyline<N>(p, y.pos));
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

template <int N>
bool orientation_matches(const TraceSamples<N>& a, const TraceSamples<N>& b) {
  // sign of the velocity inner product at nearest trace points
  int pos = 0, neg = 0;
  for (std::size_t k = 0; k < a.pos.size(); k += 7) {
    double best = 1e300;
    std::size_t bj = 0;
    for (std::size_t j = 0; j < b.pos.size(); ++j) {
      double s = 0;
      for (int i = 0; i <= N; ++i) s += (a.pos[k][i] - b.pos[j][i]) * (a.pos[k][i] - b.pos[j][i]);
      if (s < best) { best = s; bj = j; }
    }
    double d = 0;
    for (int i = 0; i <= N; ++i) d += a.vel[k][i] * b.vel[bj][i];
    (d > 0 ? pos : neg)++;
  }
  return pos >= neg;
}

}  // namespace detail

// Geometric equivalence = trace coincidence + orientation coincidence.
// Equivalence classes collapse to the least-residual representative.
template <int N>
std::pair<std::vector<ClosedGeodesic<N>>, DistinctnessReport> distinct_filter(
    const Metric<N>& m, const std::vector<ClosedGeodesic<N>>& orbits, double trace_tol = 1e-5) {
  DistinctnessReport rep;
  const int no = (int)orbits.size();
  std::vector<detail::TraceSamples<N>> fine, coarse;
  fine.reserve(no);
  coarse.reserve(no);
  for (const auto& c : orbits) {
    fine.push_back(detail::sample_trace(m, c, 2048, 1e-10));
    detail::TraceSamples<N> cs;
    for (std::size_t k = 0; k < fine.back().pos.size(); k += 8) {
      cs.pos.push_back(fine.back().pos[k]);
      cs.vel.push_back(fine.back().vel[k]);
    }
    coarse.push_back(std::move(cs));
  }

  std::vector<int> parent(no);
  for (int i = 0; i < no; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };

  for (int i = 0; i < no; ++i)
    for (int j = i + 1; j < no; ++j) {
      DistinctPair p;
      p.i = i;
      p.j = j;
      p.trace_distance = detail::hausdorff(coarse[i], coarse[j]);
      if (p.trace_distance < 0.05) p.trace_distance = detail::hausdorff(fine[i], fine[j]);
      p.orientation_match = detail::orientation_matches(fine[i], fine[j]);
      p.equivalent = p.trace_distance <= trace_tol && p.orientation_match;
      if (p.equivalent) parent[find(i)] = find(j);
      rep.pairs.push_back(p);
    }

  std::vector<ClosedGeodesic<N>> out;
  for (int i = 0; i < no; ++i) {
    if (find(i) != i) continue;
    int best = i;
    for (int j = 0; j < no; ++j)
      if (find(j) == find(i) && orbits[j].residual < orbits[best].residual) best = j;
    out.push_back(orbits[best]);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.L != b.L ? a.L < b.L : a.residual < b.residual;
  });
  return {out, rep};
}

// Grid-seeded close-return scan followed by Newton shooting; results are
// deduplicated prime orbits sorted by (length, residual).
template <int N>
std::vector<ClosedGeodesic<N>> find_closed(const Metric<N>& m, double budget,
                                           const FindOptions& opt = {},
                                           FindStats* stats = nullptr) {
  static_assert(N == 2, "orbit search is built for surfaces");
  if (!(budget > 0)) fail(ErrorCode::BadInput, "length budget must be positive");
  FindStats local;
  FindStats& st = stats ? *stats : local;

  std::mt19937_64 prng(opt.seed);
  std::uniform_real_distribution<double> jitter(-5e-4, 5e-4);

  std::vector<PhaseState<2>> seeds;
  int npos = opt.grid;
  int ndir = opt.grid;
  for (int k = 0; k < npos; ++k) {
    double z = 1.0 - 2.0 * (k + 0.5) / npos;
    double phi = 2.39996322972865332 * k;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    std::array<double, 3> p = {r * std::cos(phi), r * std::sin(phi), z};
    ChartId chart = z >= 0 ? ChartId::North : ChartId::South;
    Vec<double, 2> u = ambient_to_chart<double, 2>(chart, p);
    for (int d = 0; d < ndir; ++d) {
      double a = 2 * 3.14159265358979323846 * d / ndir + jitter(prng);
      PhaseState<2> s;
      s.point.chart = chart;
      s.point.u = {u[0] + jitter(prng), u[1] + jitter(prng)};
      s.velocity = {std::cos(a), std::sin(a)};
      double f = m.template eval<double>(s.point.chart, s.point.u, s.velocity);
      s.velocity = scaled(s.velocity, 1.0 / f);
      seeds.push_back(s);
    }
  }
  if (opt.symmetry_seeds && m.kind == MetricKind::Katok) {
    seeds.push_back(katok_equator_state(m.epsilon, +1));
    seeds.push_back(katok_equator_state(m.epsilon, -1));
  }
  st.seeds = (int)seeds.size();

  std::vector<ClosedGeodesic<N>> found;
  std::vector<detail::TraceSamples<N>> found_traces;

  auto already_found = [&](const PhaseState<N>& s, double T) {
    auto es = detail::phase_embed(s);
    for (std::size_t f = 0; f < found.size(); ++f) {
      double ratio = T / found[f].L;
      double nearest = std::abs(ratio - std::round(ratio));
      if (std::round(ratio) < 1 || nearest > 0.02) continue;
      double best = 1e300;
      const auto& tr = found_traces[f];
      for (std::size_t j = 0; j < tr.pos.size(); ++j) {
        double d = 0;
        for (int i = 0; i <= N; ++i) {
          d += (es[i] - tr.pos[j][i]) * (es[i] - tr.pos[j][i]);
          d += (es[N + 1 + i] - tr.vel[j][i]) * (es[N + 1 + i] - tr.vel[j][i]);
        }
        best = std::min(best, d);
      }
      if (std::sqrt(best) < 0.08) return true;
    }
    return false;
  };

  for (const auto& seed : seeds) {
    GeodesicSegment<N> seg;
    try {
      seg = integrate(m, seed, budget, 1e-9);
    } catch (const Error&) {
      continue;
    }
    // close-return candidates: local minima of the phase distance to start
    std::vector<std::pair<double, double>> cand;  // (dist, t)
    int ns = std::max(64, (int)(budget * 24));
    double prevd = 0, prevprevd = 0;
    for (int i = 0; i <= ns; ++i) {
      double t = budget * i / ns;
      double d = detail::phase_dist(seg.state_at(t), seed);
      if (i >= 2 && prevd < prevprevd && prevd <= d && prevd < opt.close_return) {
        double tm = budget * (i - 1) / ns;
        // parabolic refinement of the minimum
        double h = budget / ns;
        double denom = prevprevd - 2 * prevd + d;
        double shift = denom > 1e-14 ? 0.5 * h * (prevprevd - d) / denom : 0.0;
        double tc = tm + std::clamp(shift, -h, h);
        if (tc > 1.0) cand.push_back({prevd, tc});
      }
      prevprevd = prevd;
      prevd = d;
    }
    std::sort(cand.begin(), cand.end());
    if ((int)cand.size() > opt.max_candidates_per_seed) cand.resize(opt.max_candidates_per_seed);

    for (auto [d, t] : cand) {
      st.candidates++;
      if (already_found(seed, t)) {
        st.skipped_by_prefilter++;
        continue;
      }
      auto c = polish_orbit(m, seed, t, budget, opt, &st);
      if (!c) continue;
      auto [prime, mult] = prime_decompose(m, *c, opt);
      if (prime.L > budget) continue;
      if (already_found(prime.initial, prime.L)) {
        st.skipped_by_prefilter++;
        continue;
      }
      found.push_back(prime);
      found_traces.push_back(detail::sample_trace(m, prime, 256, 1e-10));
    }
  }

  auto [dedup, rep] = distinct_filter(m, found, opt.trace_tol);
  (void)rep;
  return dedup;
}

// ---------------------------------------------------------------------------
// Displacement function machinery: f_A(x) = theta^2(x, Ax) for an isometry A
// of finite order; its critical points generate A-invariant closed geodesics.

struct DisplacementOptions {
  int grid = 12;              // latitude bands; longitudes are 2x
  double bvp_tol = 1e-11;
  int max_bvp_iter = 30;
  double ascent_tol = 1e-8;
};

inline Mat<double, 3> rotation_z(double angle) {
  Mat<double, 3> R{};
  R[0][0] = std::cos(angle);
  R[0][1] = -std::sin(angle);
  R[1][0] = std::sin(angle);
  R[1][1] = std::cos(angle);
  R[2][2] = 1.0;
  return R;
}

namespace detail {

inline std::array<double, 3> apply3(const Mat<double, 3>& A, const std::array<double, 3>& p) {
  std::array<double, 3> q{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) q[i] += A[i][j] * p[j];
  return q;
}

struct BvpSolution {
  double theta = 0;  // non-symmetric distance: time at unit F-speed
  double psi = 0;    // initial direction angle in the chart of x
};

// Shooting solve for the geodesic from x to z; warm start optional.
inline std::optional<BvpSolution> shoot(const Metric<2>& m, const std::array<double, 3>& xp,
                                        const std::array<double, 3>& zp,
                                        const DisplacementOptions& opt,
                                        const BvpSolution* warm = nullptr) {
  ChartPoint<2> x;
  x.chart = xp[2] >= 0 ? ChartId::North : ChartId::South;
  x.u = ambient_to_chart<double, 2>(x.chart, xp);

  double psi, t;
  if (warm) {
    psi = warm->psi;
    t = warm->theta;
  } else {
    // round initial guess: great-circle direction and distance
    double c = std::clamp(xp[0] * zp[0] + xp[1] * zp[1] + xp[2] * zp[2], -1.0, 1.0);
    t = std::acos(c);
    std::array<double, 3> w{};
    for (int i = 0; i < 3; ++i) w[i] = zp[i] - c * xp[i];
    double wn = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    if (wn < 1e-12) return std::nullopt;  // z at/antipodal to x
    for (int i = 0; i < 3; ++i) w[i] /= wn;
    Vec<double, 2> dir = pull_tangent<double, 2>(x.chart, xp, w);
    psi = std::atan2(dir[1], dir[0]);
  }

  ChartPoint<2> ztarget;
  ztarget.chart = zp[2] >= 0 ? ChartId::North : ChartId::South;
  ztarget.u = ambient_to_chart<double, 2>(ztarget.chart, zp);

  for (int it = 0; it < opt.max_bvp_iter; ++it) {
    PhaseState<2> s;
    s.point = x;
    s.velocity = {std::cos(psi), std::sin(psi)};
    double f = m.eval<double>(s.point.chart, s.point.u, s.velocity);
    s.velocity = scaled(s.velocity, 1.0 / f);
    // velocity derivative w.r.t. psi (with F-normalization correction)
    Vec<double, 2> dpsi = {-std::sin(psi), std::cos(psi)};
    Vec<D1, 2> ud, yd;
    for (int i = 0; i < 2; ++i) {
      ud[i] = D1(s.point.u[i], 0.0);
      yd[i] = D1(std::cos(psi) * (i == 0) + std::sin(psi) * (i == 1), dpsi[i]);
    }
    D1 fd = m.eval<D1>(s.point.chart, ud, yd);
    Vec<double, 2> dv;
    for (int i = 0; i < 2; ++i)
      dv[i] = (yd[i].b * fd.a - yd[i].a * fd.b) / (fd.a * fd.a);

    // one variational column for d(end)/d(psi)
    VariationalSystem<2> sys{&m, 1};
    std::vector<double> zst(4 + 4, 0.0);
    zst[0] = s.point.u[0];
    zst[1] = s.point.u[1];
    zst[2] = s.velocity[0];
    zst[3] = s.velocity[1];
    zst[6] = dv[0];
    zst[7] = dv[1];
    IntegratorOptions iop;
    iop.tol = opt.bvp_tol;
    iop.store_dense = false;
    IntegrationResult<VariationalSystem<2>> r;
    try {
      r = integrate_system(sys, s.point.chart, std::move(zst), t, iop);
    } catch (const Error&) {
      return std::nullopt;
    }

    PhaseState<2> end;
    end.point.chart = r.chart;
    end.point.u = {r.state[0], r.state[1]};
    end.velocity = {r.state[2], r.state[3]};
    Vec<double, 2> dend = {r.state[4], r.state[5]};
    Vec<double, 2> dend_v = {r.state[6], r.state[7]};

    // residual in the target's chart
    if (end.point.chart != ztarget.chart) {
      Vec<D1, 2> u, y;
      for (int i = 0; i < 2; ++i) {
        u[i] = D1(end.point.u[i], dend[i]);
        y[i] = D1(end.velocity[i], dend_v[i]);
      }
      transition<D1, 2>(u, y);
      for (int i = 0; i < 2; ++i) {
        dend[i] = u[i].b;
      }
      end = in_chart(end, ztarget.chart);
    }
    double r0 = end.point.u[0] - ztarget.u[0];
    double r1 = end.point.u[1] - ztarget.u[1];
    if (std::sqrt(r0 * r0 + r1 * r1) < 1e-11) {
      BvpSolution sol;
      sol.theta = t;
      sol.psi = psi;
      return sol;
    }
    // Jacobian [d end/d psi, d end/d t]
    double j00 = dend[0], j01 = end.velocity[0];
    double j10 = dend[1], j11 = end.velocity[1];
    double det = j00 * j11 - j01 * j10;
    if (std::abs(det) < 1e-14) return std::nullopt;
    double dp = (-r0 * j11 + r1 * j01) / det;
    double dt = (-r1 * j00 + r0 * j10) / det;
    double sn = std::sqrt(dp * dp + dt * dt);
    if (sn > 0.5) {
      dp *= 0.5 / sn;
      dt *= 0.5 / sn;
    }
    psi += dp;
    t += dt;
    if (!(t > 1e-6) || !(t < 20.0)) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

// Finds A-invariant closed geodesics through critical points of the
// displacement function, for A of finite order k (and its inverse, which
// captures the opposite orientation).  The grid walks latitude bands; local
// maxima are polished by shrinking compass ascent, then each critical
// geodesic is closed over k copies of the displacement arc and Newton
// verified.
std::vector<ClosedGeodesic<2>> invariant_via_displacement(const Metric<2>& m,
                                                          const Mat<double, 3>& A, int order,
                                                          const DisplacementOptions& opt = {});

// Orbit store (JSON) round trip.
std::string orbits_to_json_text(const MetricSpec& spec, double budget,
                                const std::vector<ClosedGeodesic<2>>& orbits);
struct OrbitStore {
  MetricSpec spec;
  double budget = 0;
  std::vector<ClosedGeodesic<2>> orbits;
};
OrbitStore orbits_from_json_text(const std::string& text);

}  // namespace fcg

#endif
