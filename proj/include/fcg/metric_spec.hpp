#ifndef FCG_METRIC_SPEC_HPP
#define FCG_METRIC_SPEC_HPP

#include <string>

#include "fcg/metric.hpp"

namespace fcg {

// Runtime metric description; the JSON-facing counterpart of Metric<N>.
struct MetricSpec {
  std::string variant = "round";  // round | katok | zermelo
  int n = 2;
  double epsilon = 0.0;   // katok
  double strength = 0.0;  // zermelo (polar-axis wind)

  static MetricSpec round(int n) { return {"round", n, 0.0, 0.0}; }
  static MetricSpec katok(int n, double eps) { return {"katok", n, eps, 0.0}; }
};

MetricSpec metric_spec_from_json_text(const std::string& text);
std::string metric_spec_to_json_text(const MetricSpec& spec);
MetricSpec load_metric_spec(const std::string& path);

template <int N>
Metric<N> instantiate(const MetricSpec& spec) {
  if (spec.n != N) fail(ErrorCode::BadInput, "metric dimension mismatch");
  if (spec.variant == "round") return Metric<N>::round();
  if (spec.variant == "katok") {
    if constexpr (N == 2) return Metric<N>::katok(spec.epsilon);
    fail(ErrorCode::BadInput, "katok family is built for n = 2");
  }
  if (spec.variant == "zermelo") {
    Mat<double, N + 1> gen{};
    for (auto& row : gen) row.fill(0.0);
    gen[0][1] = -1.0;
    gen[1][0] = 1.0;
    return Metric<N>::zermelo(gen, spec.strength);
  }
  fail(ErrorCode::BadInput, "unknown metric variant: " + spec.variant);
}

}  // namespace fcg

#endif
