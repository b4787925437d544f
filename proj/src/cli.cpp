#include "synque/cli.hpp"

#include "synque/errors.hpp"
#include "synque/lens.hpp"
#include "synque/scenariogen.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace synque {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
}

fs::path existing(const fs::path& base, const std::string& rel, std::string_view what) {
  const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::exists(p)) throw ConfigError(fmt::format("{} '{}' does not exist", what, p.string()));
  return p;
}

fs::path resolved(const fs::path& base, const std::string& rel) {
  return fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
}

DatasetEntry dataset_entry(const json& j, const fs::path& base, bool need_name) {
  if (!j.is_object()) throw ConfigError("dataset entry must be an object");
  DatasetEntry e;
  for (const auto& [key, value] : j.items()) {
    if (key == "name")
      e.name = value.get<std::string>();
    else if (key == "records")
      e.records = existing(base, value.get<std::string>(), "records file");
    else if (key == "embeddings")
      e.embeddings = existing(base, value.get<std::string>(), "embeddings file");
    else
      throw ConfigError(fmt::format("unknown dataset key '{}'", key));
  }
  if (e.records.empty()) throw ConfigError("dataset entry needs \"records\"");
  if (need_name && e.name.empty()) throw ConfigError("dataset entry needs \"name\"");
  return e;
}

// A relative mock fixture directory resolves against the config file.
void resolve_mock(LlmEndpointConfig& ep, const fs::path& base) {
  if (ep.base_url.starts_with("mock:"))
    ep.base_url = "mock:" + existing(base, ep.base_url.substr(5), "mock fixture directory").string();
}

bool needs_embeddings(const std::vector<MetricSpec>& metrics) {
  return std::any_of(metrics.begin(), metrics.end(), [](const MetricSpec& m) { return m.metric != Metric::lens; });
}

bool needs_llm(const std::vector<MetricSpec>& metrics) {
  return std::any_of(metrics.begin(), metrics.end(), [](const MetricSpec& m) { return m.metric == Metric::lens; });
}

}  // namespace

RetryPolicy retry_policy_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("retry must be an object");
  RetryPolicy r;
  for (const auto& [key, value] : j.items()) {
    if (key == "max_retries")
      r.max_retries = value.get<int>();
    else if (key == "base_delay_ms")
      r.base_delay = std::chrono::milliseconds(value.get<long>());
    else if (key == "max_delay_ms")
      r.max_delay = std::chrono::milliseconds(value.get<long>());
    else if (key == "timeout_ms")
      r.timeout = std::chrono::milliseconds(value.get<long>());
    else
      throw ConfigError(fmt::format("unknown retry key '{}'", key));
  }
  if (r.max_retries < 0) throw ConfigError("retry max_retries must be >= 0");
  return r;
}

LlmEndpointConfig llm_endpoint_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("llm endpoint must be an object");
  LlmEndpointConfig ep;
  for (const auto& [key, value] : j.items()) {
    if (key == "base_url")
      ep.base_url = value.get<std::string>();
    else if (key == "model")
      ep.model = value.get<std::string>();
    else if (key == "max_in_flight")
      ep.max_in_flight = value.get<std::size_t>();
    else if (key == "retry")
      ep.retry = retry_policy_from_json(value);
    else if (key == "api_key_env")
      ep.api_key_env = value.get<std::string>();
    else
      throw ConfigError(fmt::format("unknown llm endpoint key '{}'", key));
  }
  if (ep.max_in_flight < 1) throw ConfigError("llm max_in_flight must be at least 1");
  return ep;
}

EmbeddingsEndpointConfig embeddings_endpoint_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("embeddings_endpoint must be an object");
  EmbeddingsEndpointConfig ep;
  for (const auto& [key, value] : j.items()) {
    if (key == "base_url")
      ep.base_url = value.get<std::string>();
    else if (key == "model")
      ep.model = value.get<std::string>();
    else if (key == "batch_size")
      ep.batch_size = value.get<std::size_t>();
    else if (key == "max_in_flight")
      ep.max_in_flight = value.get<std::size_t>();
    else if (key == "retry")
      ep.retry = retry_policy_from_json(value);
    else if (key == "api_key_env")
      ep.api_key_env = value.get<std::string>();
    else
      throw ConfigError(fmt::format("unknown embeddings_endpoint key '{}'", key));
  }
  if (ep.batch_size < 1) throw ConfigError("embeddings batch_size must be at least 1");
  return ep;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  bool have_real = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "datasets") {
        std::set<std::string> names;
        for (const auto& d : value) {
          cfg.datasets.push_back(dataset_entry(d, base_dir, true));
          if (!names.insert(cfg.datasets.back().name).second)
            throw ConfigError(fmt::format("duplicate dataset name '{}'", cfg.datasets.back().name));
        }
      } else if (key == "real_pool") {
        cfg.real_pool = dataset_entry(value, base_dir, false);
        if (cfg.real_pool.name.empty()) cfg.real_pool.name = "real";
        have_real = true;
      } else if (key == "metrics") {
        for (const auto& m : value) cfg.metrics.push_back(metric_spec_from_json(m));
      } else if (key == "seeds") {
        cfg.seeds = value.get<std::vector<std::int64_t>>();
      } else if (key == "m_r") {
        cfg.m_r = value.get<std::size_t>();
      } else if (key == "k") {
        cfg.k = value.get<std::size_t>();
      } else if (key == "performance") {
        cfg.performance = existing(base_dir, value.get<std::string>(), "performance table");
      } else if (key == "output") {
        for (const auto& [ok, ov] : value.items()) {
          if (ok == "json")
            cfg.output_json = resolved(base_dir, ov.get<std::string>());
          else if (ok == "markdown")
            cfg.output_markdown = resolved(base_dir, ov.get<std::string>());
          else
            throw ConfigError(fmt::format("unknown output key '{}'", ok));
        }
      } else if (key == "llm") {
        for (const auto& [lk, lv] : value.items()) {
          if (lk == "rubric")
            cfg.rubric_llm = llm_endpoint_from_json(lv);
          else if (lk == "scoring")
            cfg.scoring_llm = llm_endpoint_from_json(lv);
          else
            throw ConfigError(fmt::format("unknown llm key '{}' (expected rubric, scoring)", lk));
        }
        if (cfg.rubric_llm && !cfg.scoring_llm) cfg.scoring_llm = cfg.rubric_llm;
        if (cfg.scoring_llm && !cfg.rubric_llm) cfg.rubric_llm = cfg.scoring_llm;
        resolve_mock(*cfg.rubric_llm, base_dir);
        resolve_mock(*cfg.scoring_llm, base_dir);
      } else if (key == "embeddings_endpoint") {
        cfg.embeddings_endpoint = embeddings_endpoint_from_json(value);
      } else if (key == "workers") {
        cfg.workers = value.get<std::size_t>();
      } else {
        throw ConfigError(fmt::format("unknown config key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  if (!have_real) throw ConfigError("run config needs \"real_pool\"");
  if (cfg.datasets.empty()) throw ConfigError("run config needs at least one dataset");
  if (cfg.metrics.empty())
    for (auto m : {Metric::mmd2, Metric::mdm, Metric::pad, Metric::mauve}) cfg.metrics.push_back(MetricSpec{m});
  if (cfg.seeds.empty()) throw ConfigError("run config needs at least one seed");
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------

namespace {

struct Runner {
  RunConfig cfg;
  std::ostream& out;
  std::optional<std::string> llm_override;

  Dataset load(const DatasetEntry& e, SetKind kind, bool embeddings) const {
    Dataset ds;
    ds.records = load_records(e.records, record_format_from_path(e.records), kind, e.name);
    if (!embeddings) return ds;
    if (e.embeddings) {
      ds.embeddings = load_embeddings(*e.embeddings).aligned_to(ds.records);
    } else if (cfg.embeddings_endpoint) {
      auto transport = make_http_transport();
      ds.embeddings = embed_remote(ds.records, *cfg.embeddings_endpoint, *transport);
    } else {
      throw ConfigError(fmt::format("dataset '{}' has no embeddings file and no embeddings_endpoint is configured",
                                    ds.name()));
    }
    return ds;
  }

  const DatasetEntry& entry(const std::string& name) const {
    for (const auto& d : cfg.datasets)
      if (d.name == name) return d;
    std::vector<std::string> names;
    for (const auto& d : cfg.datasets) names.push_back(d.name);
    throw ConfigError(fmt::format("unknown dataset '{}' (available: {})", name, fmt::join(names, ", ")));
  }

  std::shared_ptr<LlmClient> client(const std::optional<LlmEndpointConfig>& ep) const {
    if (!ep && !llm_override) throw ConfigError("lens needs an LLM endpoint: set \"llm\" in the config or pass --llm");
    return make_llm_client(llm_override.value_or(""), ep.value_or(LlmEndpointConfig{}));
  }

  MetricSpec spec_for(const std::string& name) const {
    for (const auto& m : cfg.metrics)
      if (m.name() == name) return m;
    const Metric metric = metric_from_string(name);
    for (const auto& m : cfg.metrics)
      if (m.metric == metric) return m;
    return MetricSpec{metric};
  }

  int score(const std::string& dataset, const std::string& metric_name, std::optional<std::int64_t> seed_flag) {
    const MetricSpec spec = spec_for(metric_name);
    if (spec.metric == Metric::hybrid)
      throw ConfigError("hybrid is normalised across a candidate pool; use `rank` or `eval`");
    const std::int64_t seed = seed_flag.value_or(cfg.seeds.front());
    const bool emb = spec.metric != Metric::lens;
    const Dataset ds = load(entry(dataset), SetKind::synthetic, emb);
    const Dataset pool = load(cfg.real_pool, SetKind::real, emb);
    if (cfg.m_r < 1 || cfg.m_r > pool.records.size())
      throw ConfigError(fmt::format("m_r = {} must lie in [1, {}]", cfg.m_r, pool.records.size()));
    const Dataset real = subsample(pool, cfg.m_r, seed);
    ProxyScore s;
    if (spec.metric == Metric::lens) {
      auto rubric = client(cfg.rubric_llm);
      auto scoring = client(cfg.scoring_llm);
      LensConfig lc = spec.lens;
      lc.seed = seed;
      s = to_proxy_score(lens_score(ds.records, real.records, *rubric, *scoring, lc), lc);
    } else {
      s = compute_metric(spec, ds, real, seed);
    }
    if (spec.metric != Metric::mdm) s.meta["m_r"] = std::to_string(cfg.m_r);
    s.meta["seed"] = std::to_string(seed);
    s.meta["dataset"] = ds.name();
    out << canonical_json(to_json(s));
    return 0;
  }

  EvaluationReport evaluate(const std::vector<std::int64_t>& seeds) {
    const bool emb = needs_embeddings(cfg.metrics);
    std::vector<Dataset> datasets;
    for (const auto& e : cfg.datasets) datasets.push_back(load(e, SetKind::synthetic, emb));
    const Dataset pool = load(cfg.real_pool, SetKind::real, emb);
    std::optional<PerformanceTable> perf;
    if (cfg.performance) perf = load_performance_table(*cfg.performance);
    EvalConfig ec;
    ec.seeds = seeds;
    ec.m_r = cfg.m_r;
    ec.k = cfg.k;
    ec.metrics = cfg.metrics;
    ec.workers = cfg.workers;
    std::shared_ptr<LlmClient> rubric, scoring;
    if (needs_llm(cfg.metrics)) {
      rubric = client(cfg.rubric_llm);
      scoring = client(cfg.scoring_llm);
    }
    return multi_seed_eval(datasets, pool, perf, ec, LensClients{rubric.get(), scoring.get()});
  }

  int rank(std::optional<std::int64_t> seed_flag, bool as_json) {
    const auto report = evaluate({seed_flag.value_or(cfg.seeds.front())});
    if (as_json) {
      out << canonical_json(to_json(report));
      return report.partial ? 3 : 0;
    }
    for (const auto& m : report.metrics) {
      out << fmt::format("## {}\n\n| Rank | Dataset | SynQuE score | Raw |\n|---|---|---|---|\n", m.label);
      const auto& row = m.seeds.front();
      std::map<std::string, double> plain;
      for (const auto& [name, s] : row.scores) plain[name] = s.synque_score;
      std::size_t r = 0;
      for (const auto& name : rank_by_score(plain))
        out << fmt::format("| {} | {} | {:.6f} | {:.6f} |\n", ++r, name, row.scores.at(name).synque_score,
                           row.scores.at(name).raw);
      if (m.topk) {
        out << fmt::format("\nTop-{}: {} | mean {:.6f} | pool mean {:.6f} | improvement {:+.6f}\n", m.topk->k,
                           fmt::join(m.topk->selected, ", "), m.topk->topk_mean, m.topk->pool_mean,
                           m.topk->improvement);
        const auto show = [](const Correlation& c) { return c.value ? fmt::format("{:.6f}", *c.value) : "null"; };
        out << fmt::format("Spearman {} | Pearson {}\n", show(row.spearman), show(row.pearson));
      }
      for (const auto& e : m.errors) out << "error: " << e << "\n";
      out << "\n";
    }
    return report.partial ? 3 : 0;
  }

  int eval(const std::vector<std::int64_t>& seeds) {
    const auto report = evaluate(seeds.empty() ? cfg.seeds : seeds);
    const std::string body = canonical_json(to_json(report));
    if (cfg.output_json)
      write_file(*cfg.output_json, body);
    else
      out << body;
    if (cfg.output_markdown) write_file(*cfg.output_markdown, to_markdown(report));
    if (report.partial) spdlog::error("evaluation finished with partial results");
    return report.partial ? 3 : 0;
  }

  int rubric(const std::string& dataset, std::optional<std::int64_t> seed_flag, std::optional<std::size_t> points) {
    const std::int64_t seed = seed_flag.value_or(cfg.seeds.front());
    LensConfig lc = spec_for("lens").lens;
    if (points) lc.num_points = *points;
    lc.validate();
    const Dataset ds = load(entry(dataset), SetKind::synthetic, false);
    const Dataset pool = load(cfg.real_pool, SetKind::real, false);
    if (cfg.m_r < 1 || cfg.m_r > pool.records.size())
      throw ConfigError(fmt::format("m_r = {} must lie in [1, {}]", cfg.m_r, pool.records.size()));
    const RecordSet real = subsample(pool.records, cfg.m_r, seed);
    const std::size_t r = std::min({lc.rubric_samples.value_or(30), ds.records.size(), real.size()});
    auto llm = client(cfg.rubric_llm);
    const Rubric rub = compile_rubric(subsample(ds.records, r, seed), subsample(real, r, seed), *llm, lc.num_points,
                                      prompt_set(lc.prompts));
    out << canonical_json(to_json(rub));
    return 0;
  }
};

std::vector<std::int64_t> parse_seeds(const std::string& text) {
  std::vector<std::int64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--seeds expects comma-separated integers, got '{}'", text));
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  return seeds;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score and rank synthetic datasets by expected real-task utility.", "synque"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config_path, dataset, metric, llm, seeds_text, spec_path, out_dir, perf_path, json_out, md_out;
  std::optional<std::int64_t> seed;
  std::optional<std::size_t> m_r, k, num_points;
  bool rank_json = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run config JSON")->required();
    sub->add_option("--llm", llm, "LLM endpoint base URL or mock:<fixture-dir>");
    sub->add_option("--m-r", m_r, "real-pool subsample size");
  };

  auto* score = app.add_subcommand("score", "Compute one proxy for one dataset");
  add_common(score);
  score->add_option("--dataset", dataset)->required();
  score->add_option("--metric", metric, "mmd2|mdm|pad|mauve|lens or a metric label from the config")->required();
  score->add_option("--seed", seed);

  auto* rank = app.add_subcommand("rank", "Rank every dataset under every configured metric");
  add_common(rank);
  rank->add_option("--seed", seed);
  rank->add_option("--k", k, "top-k size");
  rank->add_option("--perf", perf_path, "performance table CSV (dataset,performance)");
  rank->add_flag("--json", rank_json, "print the report as canonical JSON");

  auto* eval = app.add_subcommand("eval", "Multi-seed evaluation with correlation and top-k reports");
  add_common(eval);
  eval->add_option("--seeds", seeds_text, "comma-separated seeds, e.g. 0,1,2,3,4");
  eval->add_option("--k", k, "top-k size");
  eval->add_option("--perf", perf_path, "performance table CSV (dataset,performance)");
  eval->add_option("--out-json", json_out, "report JSON path");
  eval->add_option("--out-md", md_out, "report markdown path");

  auto* rubric = app.add_subcommand("rubric", "Compile and print a LENS rubric");
  add_common(rubric);
  rubric->add_option("--dataset", dataset)->required();
  rubric->add_option("--seed", seed);
  rubric->add_option("--num-points", num_points);

  auto* scenario = app.add_subcommand("scenario", "Generate a planted-shift scenario");
  scenario->add_option("--spec", spec_path, "scenario spec JSON")->required();
  scenario->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::get("synque");
  if (!logger) logger = spdlog::stderr_color_mt("synque");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (scenario->parsed()) {
      const auto spec = scenario_spec_from_json(read_json_file(spec_path));
      const auto sc = generate(spec);
      write_scenario(sc, spec, out_dir);
      out << fmt::format("wrote {} candidates to {}\nplanted order: {}\n", sc.candidates.size(), out_dir,
                         fmt::join(sc.planted_order, ", "));
      return 0;
    }
    Runner runner{load_run_config(config_path), out, std::nullopt};
    if (!llm.empty()) {
      runner.llm_override = llm.starts_with("mock:") ? "mock:" + existing(fs::current_path(), llm.substr(5),
                                                                          "mock fixture directory").string()
                                                     : llm;
    }
    if (m_r) runner.cfg.m_r = *m_r;
    if (k) runner.cfg.k = *k;
    if (!perf_path.empty()) runner.cfg.performance = existing(fs::current_path(), perf_path, "performance table");
    if (!json_out.empty()) runner.cfg.output_json = json_out;
    if (!md_out.empty()) runner.cfg.output_markdown = md_out;

    if (score->parsed()) return runner.score(dataset, metric, seed);
    if (rank->parsed()) return runner.rank(seed, rank_json);
    if (eval->parsed()) return runner.eval(seeds_text.empty() ? std::vector<std::int64_t>{} : parse_seeds(seeds_text));
    if (rubric->parsed()) return runner.rubric(dataset, seed, num_points);
  } catch (const EndpointError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace synque
