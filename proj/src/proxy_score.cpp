#include "synque/errors.hpp"
#include "synque/repmetrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace synque {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::mmd2: return "mmd2";
    case Metric::mdm: return "mdm";
    case Metric::pad: return "pad";
    case Metric::mauve: return "mauve";
    case Metric::lens: return "lens";
    case Metric::hybrid: return "hybrid";
  }
  return "unknown";
}

const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> metrics{Metric::mmd2, Metric::mdm,  Metric::pad,
                                           Metric::mauve, Metric::lens, Metric::hybrid};
  return metrics;
}

Metric metric_from_string(std::string_view name) {
  for (auto m : all_metrics())
    if (to_string(m) == name) return m;
  throw std::invalid_argument(fmt::format(
      "unknown metric '{}' (valid metrics: mmd2, mdm, pad, mauve, lens, hybrid)", name));
}

double orient(Metric metric, double raw) {
  return (metric == Metric::mmd2 || metric == Metric::pad) ? -raw : raw;
}

ProxyScore make_score(Metric metric, double raw, std::map<std::string, std::string> meta) {
  return {metric, raw, orient(metric, raw), std::move(meta)};
}

nlohmann::json to_json(const ProxyScore& score) {
  return {{"metric", std::string(to_string(score.metric))},
          {"raw", score.raw},
          {"synque_score", score.synque_score},
          {"meta", score.meta}};
}

std::map<std::string, double> minmax_normalize(const std::map<std::string, ProxyScore>& pool) {
  std::map<std::string, double> out;
  if (pool.empty()) return out;
  auto [lo, hi] = std::minmax_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.second.synque_score < b.second.synque_score;
  });
  const double min = lo->second.synque_score;
  const double range = hi->second.synque_score - min;
  for (const auto& [name, s] : pool) out[name] = range > 0.0 ? (s.synque_score - min) / range : 0.5;
  return out;
}

ProxyScore hybrid(const ProxyScore& lens_normalized, const ProxyScore& mdm_normalized, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument(fmt::format("hybrid alpha must lie in [0, 1], got {}", alpha));
  const double value = alpha * lens_normalized.synque_score + (1.0 - alpha) * mdm_normalized.synque_score;
  auto meta = lens_normalized.meta;
  for (const auto& [k, v] : mdm_normalized.meta) meta.emplace("mdm." + k, v);
  meta["alpha"] = fmt::format("{}", alpha);
  return make_score(Metric::hybrid, value, std::move(meta));
}

std::map<std::string, ProxyScore> hybrid_pool(const std::map<std::string, ProxyScore>& lens,
                                              const std::map<std::string, ProxyScore>& mdm, double alpha) {
  const auto lens_n = minmax_normalize(lens);
  const auto mdm_n = minmax_normalize(mdm);
  std::map<std::string, ProxyScore> out;
  for (const auto& [name, l] : lens) {
    const auto it = mdm.find(name);
    if (it == mdm.end()) throw std::invalid_argument(fmt::format("hybrid: no mdm score for '{}'", name));
    ProxyScore ln = l;
    ln.synque_score = lens_n.at(name);
    ProxyScore mn = it->second;
    mn.synque_score = mdm_n.at(name);
    out[name] = hybrid(ln, mn, alpha);
  }
  return out;
}

}  // namespace synque
