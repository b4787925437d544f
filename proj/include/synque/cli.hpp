#pragma once

#include "synque/embed_remote.hpp"
#include "synque/evalharness.hpp"
#include "synque/ingest.hpp"
#include "synque/llmclient.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace synque {

struct DatasetEntry {
  std::string name;
  std::filesystem::path records;
  std::optional<std::filesystem::path> embeddings;
};

/// One archivable run description. Relative paths resolve against the config file's
/// directory; every referenced path must exist when the config is loaded.
///   {"datasets": [{"name", "records", "embeddings"?}], "real_pool": {"records", "embeddings"?},
///    "metrics": ["mmd2" | {"metric": ..., ...}], "seeds": [...], "m_r": 30, "k": 3,
///    "performance": "perf.csv"?, "output": {"json"?, "markdown"?},
///    "llm": {"rubric": endpoint, "scoring": endpoint}?, "embeddings_endpoint": {...}?, "workers": 0}
/// An LLM endpoint is {"base_url", "model", "max_in_flight", "retry": {...}}; a base_url of
/// "mock:<dir>" selects the offline mock.
struct RunConfig {
  std::filesystem::path base_dir;
  std::vector<DatasetEntry> datasets;
  DatasetEntry real_pool;
  std::vector<MetricSpec> metrics;
  std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
  std::size_t m_r = 30;
  std::size_t k = 3;
  std::optional<std::filesystem::path> performance;
  std::optional<std::filesystem::path> output_json;
  std::optional<std::filesystem::path> output_markdown;
  std::optional<LlmEndpointConfig> rubric_llm;
  std::optional<LlmEndpointConfig> scoring_llm;
  std::optional<EmbeddingsEndpointConfig> embeddings_endpoint;
  std::size_t workers = 0;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

RetryPolicy retry_policy_from_json(const nlohmann::json& j);
LlmEndpointConfig llm_endpoint_from_json(const nlohmann::json& j);
EmbeddingsEndpointConfig embeddings_endpoint_from_json(const nlohmann::json& j);

// Exit codes: 0 success, 2 usage or config error, 3 runtime or endpoint error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace synque
