#pragma once

#include "synque/ingest.hpp"
#include "synque/kernels.hpp"
#include "synque/lens.hpp"
#include "synque/llmclient.hpp"
#include "synque/repmetrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synque {

// Sample Pearson r. Throws std::invalid_argument on length mismatch or n < 2 and
// UndefinedCorrelation when either vector is constant.
double pearson(std::span<const double> a, std::span<const double> b);
// Pearson of average ranks; tied values share the mean of their rank range (1-based).
std::vector<double> average_ranks(std::span<const double> v);
double spearman(std::span<const double> a, std::span<const double> b);

struct PerformanceTable {
  std::map<std::string, double> entries;

  // Throws DataError naming the dataset when absent.
  double at(const std::string& name) const;
};

// CSV with header `dataset,performance`.
PerformanceTable load_performance_table(const std::filesystem::path& path);

struct TopKSection {
  std::size_t k = 0;
  std::vector<std::string> selected;  // best first
  std::vector<double> selected_scores;
  std::vector<double> selected_performance;
  double topk_mean = 0.0;
  double pool_mean = 0.0;
  double improvement = 0.0;  // topk_mean - pool_mean
};

// Ranks by synque_score descending, ties by name ascending.
TopKSection topk_table(const std::map<std::string, double>& scores, const PerformanceTable& perf, std::size_t k);
TopKSection topk_table(const std::map<std::string, ProxyScore>& scores, const PerformanceTable& perf, std::size_t k);

// Dataset names ordered best first under the same rule.
std::vector<std::string> rank_by_score(const std::map<std::string, double>& scores);

struct MetricSpec {
  Metric metric = Metric::mmd2;
  std::string label;  // report key; defaults to the metric name
  KernelSpec kernel;
  std::size_t k = 3;  // mdm cluster count
  PadConfig pad;
  MauveConfig mauve;
  LensConfig lens;
  double alpha = 0.5;  // hybrid blend weight on lens

  std::string name() const;
};

nlohmann::json to_json(const MetricSpec& spec);
// {"metric": "mmd2", "label": ..., "kernel": {...}, "k": 3, "pad": {...}, "mauve": {...}, "lens": {...}, "alpha": 0.5}
MetricSpec metric_spec_from_json(const nlohmann::json& j);

struct LensClients {
  LlmClient* rubric = nullptr;
  LlmClient* scoring = nullptr;
};

// One proxy on one dataset against one real subsample. lens and hybrid are not handled here.
ProxyScore compute_metric(const MetricSpec& spec, const Dataset& ds, const Dataset& real, std::int64_t seed);

struct EvalConfig {
  std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
  std::size_t m_r = 30;
  std::size_t k = 3;
  std::vector<MetricSpec> metrics;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

struct Correlation {
  std::optional<double> value;
  std::string reason;  // set when value is null
};

struct SeedRow {
  std::int64_t seed = 0;
  std::map<std::string, ProxyScore> scores;
  Correlation spearman;
  Correlation pearson;
};

struct Summary {
  std::optional<double> mean;
  std::optional<double> std;  // population formula
  std::size_t defined = 0;
  std::string reason;
};

struct MetricReport {
  std::string label;
  Metric metric = Metric::mmd2;
  std::vector<SeedRow> seeds;
  std::map<std::string, double> score_mean;
  std::map<std::string, double> score_std;
  Summary spearman;
  Summary pearson;
  std::optional<TopKSection> topk;
  bool partial = false;
  std::vector<std::string> errors;
};

struct EvaluationReport {
  std::vector<MetricReport> metrics;
  nlohmann::json settings;
  bool partial = false;
};

// Per seed: subsample U_r (shared by every proxy), score every dataset under every
// metric, correlate against perf. Top-k runs on seed-mean scores. Metric failures are
// recorded and flag the report partial instead of aborting it.
EvaluationReport multi_seed_eval(const std::vector<Dataset>& datasets, const Dataset& real_pool,
                                 const std::optional<PerformanceTable>& perf, const EvalConfig& cfg,
                                 LensClients llm = {});

Summary summarize(const std::vector<Correlation>& values);

nlohmann::json to_json(const EvaluationReport& report);
// Sorted keys, two-space indent, every non-integer number printed as %.6f, -0 printed as 0.
std::string canonical_json(const nlohmann::json& j);
std::string to_markdown(const EvaluationReport& report);

}  // namespace synque
