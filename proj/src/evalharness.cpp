#include "synque/evalharness.hpp"

#include "synque/errors.hpp"
#include "synque/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace synque {

using json = nlohmann::json;

double PerformanceTable::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw DataError(fmt::format("performance table has no entry for dataset '{}'", name));
  return it->second;
}

PerformanceTable load_performance_table(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw DataError(fmt::format("{}: empty performance table", path.string()));
  const auto& header = rows.front().fields;
  const auto col = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError(fmt::format("{}:1: header must contain \"dataset\" and \"performance\"", path.string()));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t name_col = col("dataset"), perf_col = col("performance");
  PerformanceTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != header.size())
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), rows[r].line, header.size(),
                                  f.size()));
    const std::string& text = f[perf_col];
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
      throw DataError(fmt::format("{}:{}: performance '{}' is not a finite number", path.string(), rows[r].line, text));
    if (!table.entries.emplace(f[name_col], value).second)
      throw DataError(fmt::format("{}:{}: duplicate dataset '{}'", path.string(), rows[r].line, f[name_col]));
  }
  if (table.entries.empty()) throw DataError(fmt::format("{}: empty performance table", path.string()));
  return table;
}

std::vector<std::string> rank_by_score(const std::map<std::string, double>& scores) {
  std::vector<std::string> names;
  for (const auto& [name, _] : scores) names.push_back(name);
  std::stable_sort(names.begin(), names.end(),
                   [&](const std::string& a, const std::string& b) { return scores.at(a) > scores.at(b); });
  return names;
}

TopKSection topk_table(const std::map<std::string, double>& scores, const PerformanceTable& perf, std::size_t k) {
  if (k < 1 || k > scores.size())
    throw std::invalid_argument(fmt::format("top-k needs 1 <= k <= {}, got {}", scores.size(), k));
  TopKSection out;
  out.k = k;
  double pool = 0.0;
  for (const auto& [name, _] : scores) pool += perf.at(name);
  out.pool_mean = pool / static_cast<double>(scores.size());
  const auto ranked = rank_by_score(scores);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.selected.push_back(ranked[i]);
    out.selected_scores.push_back(scores.at(ranked[i]));
    out.selected_performance.push_back(perf.at(ranked[i]));
    sum += out.selected_performance.back();
  }
  out.topk_mean = sum / static_cast<double>(k);
  out.improvement = out.topk_mean - out.pool_mean;
  return out;
}

TopKSection topk_table(const std::map<std::string, ProxyScore>& scores, const PerformanceTable& perf, std::size_t k) {
  std::map<std::string, double> plain;
  for (const auto& [name, s] : scores) plain[name] = s.synque_score;
  return topk_table(plain, perf, k);
}

// ---------------------------------------------------------------------------

std::string MetricSpec::name() const { return label.empty() ? std::string(to_string(metric)) : label; }

nlohmann::json to_json(const MetricSpec& spec) {
  json j{{"metric", std::string(to_string(spec.metric))}, {"label", spec.name()}};
  switch (spec.metric) {
    case Metric::mmd2: j["kernel"] = to_json(spec.kernel); break;
    case Metric::mdm: j["k"] = spec.k; break;
    case Metric::pad: j["pad"] = to_json(spec.pad); break;
    case Metric::mauve: j["mauve"] = to_json(spec.mauve); break;
    case Metric::lens: j["lens"] = to_json(spec.lens); break;
    case Metric::hybrid: j["alpha"] = spec.alpha; break;
  }
  return j;
}

MetricSpec metric_spec_from_json(const nlohmann::json& j) {
  MetricSpec spec;
  if (j.is_string()) {
    try {
      spec.metric = metric_from_string(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return spec;
  }
  if (!j.is_object() || !j.contains("metric")) throw ConfigError("metric entry needs a \"metric\" name");
  try {
    spec.metric = metric_from_string(j.at("metric").get<std::string>());
    for (const auto& [key, value] : j.items()) {
      if (key == "metric") continue;
      if (key == "label")
        spec.label = value.get<std::string>();
      else if (key == "kernel")
        spec.kernel = kernel_spec_from_json(value);
      else if (key == "k")
        spec.k = value.get<std::size_t>();
      else if (key == "pad")
        spec.pad = pad_config_from_json(value);
      else if (key == "mauve")
        spec.mauve = mauve_config_from_json(value);
      else if (key == "lens")
        spec.lens = lens_config_from_json(value);
      else if (key == "alpha")
        spec.alpha = value.get<double>();
      else
        throw ConfigError(fmt::format("unknown metric key '{}'", key));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("metric entry: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (spec.k < 1) throw ConfigError("mdm k must be at least 1");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) throw ConfigError("hybrid alpha must lie in [0, 1]");
  return spec;
}

ProxyScore compute_metric(const MetricSpec& spec, const Dataset& ds, const Dataset& real, std::int64_t seed) {
  switch (spec.metric) {
    case Metric::mmd2: return mmd2(ds.embeddings, real.embeddings, spec.kernel);
    case Metric::mdm: return mdm(ds.embeddings, spec.k, seed);
    case Metric::pad: return pad(ds.embeddings, real.embeddings, spec.pad, seed);
    case Metric::mauve: return mauve(ds.embeddings, real.embeddings, spec.mauve, seed);
    case Metric::lens:
    case Metric::hybrid: break;
  }
  throw std::invalid_argument(fmt::format("compute_metric does not handle '{}'", to_string(spec.metric)));
}

// ---------------------------------------------------------------------------

Summary summarize(const std::vector<Correlation>& values) {
  Summary s;
  std::vector<double> defined;
  std::string first_reason;
  for (const auto& c : values) {
    if (c.value)
      defined.push_back(*c.value);
    else if (first_reason.empty())
      first_reason = c.reason;
  }
  s.defined = defined.size();
  if (defined.empty()) {
    s.reason = first_reason.empty() ? "no seeds" : first_reason;
    return s;
  }
  const double n = static_cast<double>(defined.size());
  const double mean = std::accumulate(defined.begin(), defined.end(), 0.0) / n;
  double var = 0.0;
  for (double v : defined) var += (v - mean) * (v - mean);
  s.mean = mean;
  s.std = std::sqrt(var / n);
  if (defined.size() < values.size())
    s.reason = fmt::format("undefined in {} of {} seeds: {}", values.size() - defined.size(), values.size(),
                           first_reason);
  return s;
}

namespace {

Correlation correlate(const std::map<std::string, ProxyScore>& scores, const PerformanceTable& perf, bool rank) {
  std::vector<double> a, b;
  for (const auto& [name, s] : scores) {
    a.push_back(s.synque_score);
    b.push_back(perf.at(name));
  }
  if (a.size() < 2) return {std::nullopt, "fewer than two datasets"};
  try {
    return {rank ? spearman(a, b) : pearson(a, b), ""};
  } catch (const UndefinedCorrelation& e) {
    return {std::nullopt, e.what()};
  }
}

void check_unique_labels(const std::vector<MetricSpec>& metrics) {
  std::set<std::string> seen;
  for (const auto& m : metrics)
    if (!seen.insert(m.name()).second) throw ConfigError(fmt::format("duplicate metric label '{}'", m.name()));
}

}  // namespace

EvaluationReport multi_seed_eval(const std::vector<Dataset>& datasets, const Dataset& real_pool,
                                 const std::optional<PerformanceTable>& perf, const EvalConfig& cfg,
                                 LensClients llm) {
  if (cfg.seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  if (cfg.metrics.empty()) throw ConfigError("evaluation needs at least one metric");
  if (datasets.empty()) throw DataError("evaluation needs at least one dataset");
  if (cfg.m_r < 1 || cfg.m_r > real_pool.records.size())
    throw ConfigError(fmt::format("m_r = {} must lie in [1, {}]", cfg.m_r, real_pool.records.size()));
  check_unique_labels(cfg.metrics);
  std::set<std::string> names;
  for (const auto& d : datasets)
    if (!names.insert(d.name()).second) throw DataError(fmt::format("duplicate dataset name '{}'", d.name()));
  if (perf)
    for (const auto& n : names) perf->at(n);

  const MetricSpec* lens_spec = nullptr;
  const MetricSpec* mdm_spec = nullptr;
  for (const auto& m : cfg.metrics) {
    if (m.metric == Metric::lens && !lens_spec) lens_spec = &m;
    if (m.metric == Metric::mdm && !mdm_spec) mdm_spec = &m;
    if (m.metric == Metric::lens && (!llm.rubric || !llm.scoring))
      throw ConfigError("lens metric needs an LLM endpoint");
  }
  for (const auto& m : cfg.metrics)
    if (m.metric == Metric::hybrid && (!lens_spec || !mdm_spec))
      throw ConfigError("hybrid metric needs both a lens and an mdm metric in the same run");

  const std::size_t n_seeds = cfg.seeds.size(), n_ds = datasets.size(), n_m = cfg.metrics.size();
  std::vector<Dataset> reals;
  for (auto seed : cfg.seeds) reals.push_back(subsample(real_pool, cfg.m_r, seed));

  // results[seed][metric][dataset]
  std::vector<std::vector<std::vector<std::optional<ProxyScore>>>> results(
      n_seeds, std::vector<std::vector<std::optional<ProxyScore>>>(n_m, std::vector<std::optional<ProxyScore>>(n_ds)));
  std::vector<std::vector<std::vector<std::string>>> errors(n_seeds,
                                                            std::vector<std::vector<std::string>>(n_m));
  std::mutex error_mutex;

  const std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  parallel_for(n_seeds * n_m * n_ds, workers, [&](std::size_t t) {
    const std::size_t s = t / (n_m * n_ds), m = (t / n_ds) % n_m, d = t % n_ds;
    const auto& spec = cfg.metrics[m];
    if (spec.metric == Metric::hybrid) return;
    try {
      ProxyScore score;
      if (spec.metric == Metric::lens) {
        LensConfig lc = spec.lens;
        lc.seed = cfg.seeds[s];
        score = to_proxy_score(lens_score(datasets[d].records, reals[s].records, *llm.rubric, *llm.scoring, lc), lc);
      } else {
        score = compute_metric(spec, datasets[d], reals[s], cfg.seeds[s]);
      }
      if (spec.metric != Metric::mdm) score.meta["m_r"] = std::to_string(cfg.m_r);
      score.meta["seed"] = std::to_string(cfg.seeds[s]);
      results[s][m][d] = std::move(score);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      spdlog::error("{} on '{}' (seed {}) failed: {}", spec.name(), datasets[d].name(), cfg.seeds[s], e.what());
      std::lock_guard lock(error_mutex);
      errors[s][m].push_back(fmt::format("{} (seed {}): {}", datasets[d].name(), cfg.seeds[s], e.what()));
    }
  });

  const auto index_of = [&](const MetricSpec* p) { return static_cast<std::size_t>(p - cfg.metrics.data()); };

  EvaluationReport report;
  for (std::size_t m = 0; m < n_m; ++m) {
    const auto& spec = cfg.metrics[m];
    MetricReport mr;
    mr.label = spec.name();
    mr.metric = spec.metric;
    std::map<std::string, std::vector<double>> per_dataset;
    std::vector<Correlation> sp, pe;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      SeedRow row;
      row.seed = cfg.seeds[s];
      if (spec.metric == Metric::hybrid) {
        const std::size_t li = index_of(lens_spec), mi = index_of(mdm_spec);
        std::map<std::string, ProxyScore> lens, mdm_scores;
        bool complete = true;
        for (std::size_t d = 0; d < n_ds; ++d) {
          if (!results[s][li][d] || !results[s][mi][d]) {
            complete = false;
            continue;
          }
          lens[datasets[d].name()] = *results[s][li][d];
          mdm_scores[datasets[d].name()] = *results[s][mi][d];
        }
        if (!complete) mr.errors.push_back(fmt::format("seed {}: lens or mdm inputs missing", row.seed));
        if (!complete) mr.partial = true;
        if (complete) {
          row.scores = hybrid_pool(lens, mdm_scores, spec.alpha);
          for (auto& [_, sc] : row.scores) sc.meta["seed"] = std::to_string(row.seed);
        }
      } else {
        for (std::size_t d = 0; d < n_ds; ++d)
          if (results[s][m][d]) row.scores[datasets[d].name()] = *results[s][m][d];
        if (!errors[s][m].empty()) {
          mr.partial = true;
          auto errs = errors[s][m];
          std::sort(errs.begin(), errs.end());
          mr.errors.insert(mr.errors.end(), errs.begin(), errs.end());
        }
      }
      for (const auto& [name, sc] : row.scores) per_dataset[name].push_back(sc.synque_score);
      if (perf) {
        const bool full = row.scores.size() == n_ds;
        row.spearman = full ? correlate(row.scores, *perf, true) : Correlation{std::nullopt, "partial results"};
        row.pearson = full ? correlate(row.scores, *perf, false) : Correlation{std::nullopt, "partial results"};
      } else {
        row.spearman = row.pearson = Correlation{std::nullopt, "no performance table"};
      }
      sp.push_back(row.spearman);
      pe.push_back(row.pearson);
      mr.seeds.push_back(std::move(row));
    }
    mr.spearman = summarize(sp);
    mr.pearson = summarize(pe);
    for (const auto& [name, values] : per_dataset) {
      const double n = static_cast<double>(values.size());
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      mr.score_mean[name] = mean;
      mr.score_std[name] = std::sqrt(var / n);
    }
    if (perf && !mr.partial && mr.score_mean.size() == n_ds) mr.topk = topk_table(mr.score_mean, *perf, std::min(cfg.k, n_ds));
    report.partial = report.partial || mr.partial;
    report.metrics.push_back(std::move(mr));
  }

  json metrics = json::array();
  for (const auto& m : cfg.metrics) metrics.push_back(to_json(m));
  std::vector<std::string> pool(names.begin(), names.end());
  report.settings = {{"seeds", cfg.seeds},
                     {"m_r", cfg.m_r},
                     {"k", cfg.k},
                     {"metrics", std::move(metrics)},
                     {"datasets", pool},
                     {"real_pool_size", real_pool.records.size()},
                     {"performance_table", perf.has_value()},
                     {"std", "population"},
                     {"topk_order", "synque_score descending, ties by dataset name ascending"}};
  return report;
}

// ---------------------------------------------------------------------------

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json correlation_json(const Correlation& c) {
  json j{{"value", opt(c.value)}};
  if (!c.value) j["reason"] = c.reason;
  return j;
}

json summary_json(const Summary& s) {
  json j{{"mean", opt(s.mean)}, {"std", opt(s.std)}, {"defined_seeds", s.defined}};
  if (!s.reason.empty()) j["reason"] = s.reason;
  return j;
}

void write_canonical(const json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += json(key).dump();
        out += ": ";
        write_canonical(value, out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write_canonical(j[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float: {
      std::string s = fmt::format("{:.6f}", j.get<double>());
      if (s == "-0.000000") s = "0.000000";
      out += s;
      return;
    }
    default: out += j.dump();
  }
}

std::string fixed(double v) {
  std::string s = fmt::format("{:.6f}", v);
  return s == "-0.000000" ? "0.000000" : s;
}

std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : "null"; }

}  // namespace

nlohmann::json to_json(const EvaluationReport& report) {
  json metrics = json::object();
  for (const auto& m : report.metrics) {
    json seeds = json::array();
    for (const auto& row : m.seeds) {
      json scores = json::object();
      for (const auto& [name, s] : row.scores) scores[name] = to_json(s);
      seeds.push_back({{"seed", row.seed},
                       {"spearman", correlation_json(row.spearman)},
                       {"pearson", correlation_json(row.pearson)},
                       {"scores", std::move(scores)}});
    }
    json entry{{"metric", std::string(to_string(m.metric))},
               {"per_seed", std::move(seeds)},
               {"spearman", summary_json(m.spearman)},
               {"pearson", summary_json(m.pearson)},
               {"score_mean", m.score_mean},
               {"score_std", m.score_std},
               {"partial", m.partial},
               {"errors", m.errors}};
    if (m.topk) {
      entry["topk"] = {{"k", m.topk->k},
                       {"selected", m.topk->selected},
                       {"selected_scores", m.topk->selected_scores},
                       {"selected_performance", m.topk->selected_performance},
                       {"topk_mean", m.topk->topk_mean},
                       {"pool_mean", m.topk->pool_mean},
                       {"improvement", m.topk->improvement}};
    } else {
      entry["topk"] = nullptr;
    }
    metrics[m.label] = std::move(entry);
  }
  return {{"settings", report.settings}, {"partial", report.partial}, {"metrics", std::move(metrics)}};
}

std::string canonical_json(const nlohmann::json& j) {
  std::string out;
  write_canonical(j, out, 0);
  out += '\n';
  return out;
}

std::string to_markdown(const EvaluationReport& report) {
  std::string out = "# SynQuE evaluation\n\n";
  if (report.partial) out += "**Partial results:** at least one metric failed; see errors below.\n\n";
  out += "| Metric | Spearman mean | Spearman std | Pearson mean | Pearson std | Top-k | Top-k mean | Pool mean | "
         "Improvement |\n";
  out += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& m : report.metrics) {
    std::string sel = "-", tk = "-", pm = "-", imp = "-";
    if (m.topk) {
      sel = fmt::format("{}", fmt::join(m.topk->selected, ", "));
      tk = fixed(m.topk->topk_mean);
      pm = fixed(m.topk->pool_mean);
      imp = fmt::format("{}{}", m.topk->improvement >= 0 ? "+" : "", fixed(m.topk->improvement));
    }
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", m.label, fixed(m.spearman.mean),
                       fixed(m.spearman.std), fixed(m.pearson.mean), fixed(m.pearson.std), sel, tk, pm, imp);
  }
  for (const auto& m : report.metrics) {
    out += fmt::format("\n## {}\n\n| Seed | Spearman | Pearson |\n|---|---|---|\n", m.label);
    for (const auto& row : m.seeds)
      out += fmt::format("| {} | {} | {} |\n", row.seed, fixed(row.spearman.value), fixed(row.pearson.value));
    out += "\n| Dataset | Mean score | Std |\n|---|---|---|\n";
    for (const auto& [name, mean] : m.score_mean)
      out += fmt::format("| {} | {} | {} |\n", name, fixed(mean), fixed(m.score_std.at(name)));
    for (const auto& e : m.errors) out += fmt::format("\n- error: {}", e);
    if (!m.errors.empty()) out += "\n";
  }
  return out;
}

}  // namespace synque
