#include "fcg/flow.hpp"

#include <ostream>

#include "json.hpp"

namespace fcg {

template <int N>
void dump_segment_jsonl(const GeodesicSegment<N>& seg, std::ostream& os) {
  auto emit = [&](double t, ChartId chart, const double* z) {
    nlohmann::json j;
    j["t"] = t;
    j["chart"] = chart_name(chart);
    std::vector<double> u(z, z + N), y(z + N, z + 2 * N);
    j["u"] = u;
    j["y"] = y;
    os << j.dump() << "\n";
  };
  for (const auto& st : seg.dense.steps) emit(st.t0, st.chart, st.r1.data());
  emit(seg.T, seg.end_chart, seg.end_state.data());
}

template void dump_segment_jsonl<2>(const GeodesicSegment<2>&, std::ostream&);
template void dump_segment_jsonl<3>(const GeodesicSegment<3>&, std::ostream&);

}  // namespace fcg
