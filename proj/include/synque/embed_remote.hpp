#pragma once

#include "synque/http.hpp"
#include "synque/ingest.hpp"

#include <string>

namespace synque {

struct EmbeddingsEndpointConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1 ; requests go to <base_url>/embeddings
  std::string model;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::string api_key_env = "SYNQUE_EMBED_API_KEY";
};

struct EmbedStats {
  std::size_t requests = 0;
  int retries = 0;
};

/// Fetches one embedding row per record from an OpenAI-compatible embeddings endpoint.
/// Batches may be in flight concurrently; rows are assembled in record order.
EmbeddingMatrix embed_remote(const RecordSet& records, const EmbeddingsEndpointConfig& endpoint,
                             HttpTransport& transport, EmbedStats* stats = nullptr);

}  // namespace synque
