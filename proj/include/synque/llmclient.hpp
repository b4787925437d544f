#pragma once

#include "synque/http.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synque {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  double top_p = 0.95;
  int max_tokens = 512;
};

inline constexpr int kRubricMaxTokens = 512;
inline constexpr int kScoringMaxTokens = 64;

// OpenAI-compatible request body.
nlohmann::json to_json(const ChatRequest& req);
// FNV-1a 64 over the compact dump of to_json(req); keys are sorted so the hash is stable.
std::uint64_t request_hash(const ChatRequest& req);
std::string request_hash_hex(const ChatRequest& req);

enum class JudgementWord { very_unlikely = 0, unlikely = 1, unsure = 2, likely = 3, very_likely = 4 };

std::string_view to_string(JudgementWord word);

struct Judgement {
  JudgementWord word = JudgementWord::unsure;
  int grade = 2;
};

class UnparseableJudgement : public std::runtime_error {
 public:
  explicit UnparseableJudgement(std::string raw);
  const std::string& raw_text() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Case-insensitive search for the five judgement phrases on word boundaries. A JSON
/// object's "judgement" (or "judgment") field is consulted first. When several phrases
/// occur the longest wins, then the earliest.
Judgement parse_judgement(std::string_view text);

struct LlmEndpointConfig {
  std::string base_url;  // requests go to <base_url>/chat/completions
  std::string model;
  std::size_t max_in_flight = 8;
  RetryPolicy retry;
  std::string api_key_env = "SYNQUE_LLM_API_KEY";
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant text. Throws EndpointError on transport or format failure.
  virtual std::string chat(const ChatRequest& req) = 0;
  virtual std::string model() const = 0;
  virtual std::size_t max_in_flight() const = 0;

  int retries() const noexcept { return retries_.load(); }
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  std::atomic<int> retries_{0};
  std::atomic<std::size_t> calls_{0};
};

class HttpLlmClient final : public LlmClient {
 public:
  HttpLlmClient(LlmEndpointConfig endpoint, std::shared_ptr<HttpTransport> transport);
  std::string chat(const ChatRequest& req) override;
  std::string model() const override { return endpoint_.model; }
  std::size_t max_in_flight() const override { return endpoint_.max_in_flight; }

 private:
  LlmEndpointConfig endpoint_;
  std::shared_ptr<HttpTransport> transport_;
};

/// Offline client driven by <dir>/mock.json:
///   {"responses": {"<request hash hex>": "text", ...},
///    "rules": [{"contains": ["substring", ...], "matches": "regex"?, "response": "text"} |
///              {"contains": [...], "status": 503}, ...],
///    "default": "text",
///    "hash_judgement": true}
/// Lookup order: exact hash, first rule whose substrings all occur in the joined message
/// contents (and whose ECMAScript regex, if given, is found there), then "default". With "hash_judgement" set and nothing else matching, the
/// reply is the judgement phrase indexed by request_hash % 5. A rule carrying "status"
/// fails the call with that HTTP status.
class MockLlmClient final : public LlmClient {
 public:
  explicit MockLlmClient(const std::filesystem::path& fixture_dir, std::size_t max_in_flight = 8);
  MockLlmClient(nlohmann::json fixture, std::size_t max_in_flight = 8);
  std::string chat(const ChatRequest& req) override;
  std::string model() const override { return "mock"; }
  std::size_t max_in_flight() const override { return max_in_flight_; }

 private:
  struct Rule {
    std::vector<std::string> contains;
    std::optional<std::regex> matches;
    std::string response;
    int status = 0;
  };
  std::map<std::string, std::string> responses_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
  bool hash_judgement_ = false;
  std::size_t max_in_flight_;
};

// "mock:<dir>" (as selector or as endpoint.base_url) selects MockLlmClient; any other selector is the base URL
// overriding endpoint.base_url when non-empty.
std::shared_ptr<LlmClient> make_llm_client(const std::string& selector, LlmEndpointConfig endpoint);

}  // namespace synque
