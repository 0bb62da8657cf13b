#include "fcg/metric_spec.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fcg {

using nlohmann::json;

MetricSpec metric_spec_from_json_text(const std::string& text) {
  json j = json::parse(text);
  MetricSpec s;
  s.variant = j.value("variant", "round");
  s.n = j.value("n", 2);
  s.epsilon = j.value("epsilon", 0.0);
  s.strength = j.value("strength", 0.0);
  if (s.n < 2 || s.n > 3) fail(ErrorCode::BadInput, "supported dimensions are n = 2, 3");
  if (s.variant == "katok" && !(s.epsilon >= 0.0 && s.epsilon < 1.0))
    fail(ErrorCode::EpsilonOutOfRange, "katok epsilon must be in [0,1)");
  return s;
}

std::string metric_spec_to_json_text(const MetricSpec& spec) {
  json j;
  j["variant"] = spec.variant;
  j["n"] = spec.n;
  if (spec.variant == "katok") j["epsilon"] = spec.epsilon;
  if (spec.variant == "zermelo") j["strength"] = spec.strength;
  return j.dump();
}

MetricSpec load_metric_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::BadInput, "cannot open metric file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return metric_spec_from_json_text(ss.str());
}

}  // namespace fcg
