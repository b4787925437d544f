#include "synque/embed_remote.hpp"

#include "synque/errors.hpp"
#include "synque/parallel.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace synque {

using json = nlohmann::json;

EmbeddingMatrix embed_remote(const RecordSet& records, const EmbeddingsEndpointConfig& endpoint,
                             HttpTransport& transport, EmbedStats* stats) {
  if (endpoint.batch_size < 1) throw ConfigError("embeddings batch_size must be at least 1");
  if (records.empty()) throw DataError(fmt::format("record set '{}' is empty", records.name));
  const std::size_t n = records.size();
  const std::size_t batches = (n + endpoint.batch_size - 1) / endpoint.batch_size;
  const std::string url = endpoint.base_url + "/embeddings";
  Headers headers = auth_headers_from_env(endpoint.api_key_env);

  std::vector<std::vector<std::vector<double>>> rows(batches);
  std::atomic<int> retries{0};
  parallel_for(batches, endpoint.max_in_flight, [&](std::size_t b) {
    const std::size_t lo = b * endpoint.batch_size;
    const std::size_t hi = std::min(n, lo + endpoint.batch_size);
    json input = json::array();
    for (std::size_t i = lo; i < hi; ++i) input.push_back(records.records[i].payload);
    const json body{{"model", endpoint.model}, {"input", std::move(input)}};
    auto outcome = post_with_retry(transport, url, body.dump(), headers, endpoint.retry);
    retries += outcome.retries;

    json reply;
    try {
      reply = json::parse(outcome.response.body);
    } catch (const json::parse_error& e) {
      throw EndpointError(fmt::format("embeddings endpoint returned invalid JSON: {}", e.what()));
    }
    if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].size() != hi - lo)
      throw EndpointError(fmt::format("embeddings endpoint returned {} items for a batch of {}",
                                      reply.contains("data") ? reply["data"].size() : 0, hi - lo));
    auto& out = rows[b];
    out.resize(hi - lo);
    for (std::size_t k = 0; k < reply["data"].size(); ++k) {
      const auto& item = reply["data"][k];
      const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : k;
      if (index >= out.size() || !out[index].empty())
        throw EndpointError(fmt::format("embeddings endpoint returned bad index {}", index));
      out[index] = item.at("embedding").get<std::vector<double>>();
      if (out[index].empty()) throw EndpointError("embeddings endpoint returned an empty vector");
    }
  });

  const std::size_t dim = rows[0][0].size();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  ids.reserve(n);
  std::size_t r = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    for (const auto& vec : rows[b]) {
      if (vec.size() != dim)
        throw EndpointError(fmt::format("embedding dimension mismatch: batch {} has {}, expected {}",
                                        b, vec.size(), dim));
      for (std::size_t c = 0; c < dim; ++c) data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vec[c];
      ids.push_back(records.records[r].id);
      ++r;
    }
  }
  if (stats != nullptr) {
    stats->requests += batches;
    stats->retries += retries;
  }
  return EmbeddingMatrix(std::move(ids), std::move(data));
}

}  // namespace synque
