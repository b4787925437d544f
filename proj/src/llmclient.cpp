#include "synque/llmclient.hpp"

#include "synque/errors.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace synque {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kPhrases = {"very unlikely", "unlikely", "unsure", "likely",
                                                      "very likely"};

// lowercase; '_' and '-' become spaces; whitespace runs collapse to one space
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool space = false;
  for (unsigned char c : text) {
    if (c == '_' || c == '-' || std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::optional<Judgement> find_phrase(std::string_view raw) {
  const std::string text = normalize(raw);
  std::optional<std::size_t> best;
  std::size_t best_pos = 0;
  for (std::size_t p = 0; p < kPhrases.size(); ++p) {
    const auto phrase = kPhrases[p];
    for (auto pos = text.find(phrase); pos != std::string::npos; pos = text.find(phrase, pos + 1)) {
      const std::size_t end = pos + phrase.size();
      if ((pos > 0 && word_char(text[pos - 1])) || (end < text.size() && word_char(text[end]))) continue;
      if (!best || phrase.size() > kPhrases[*best].size() ||
          (phrase.size() == kPhrases[*best].size() && pos < best_pos)) {
        best = p;
        best_pos = pos;
      }
      break;
    }
  }
  if (!best) return std::nullopt;
  return Judgement{static_cast<JudgementWord>(*best), static_cast<int>(*best)};
}

std::string joined_content(const ChatRequest& req) {
  std::string all;
  for (const auto& m : req.messages) {
    if (!all.empty()) all += '\n';
    all += m.content;
  }
  return all;
}

}  // namespace

nlohmann::json to_json(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", req.model},
          {"messages", std::move(messages)},
          {"temperature", req.temperature},
          {"top_p", req.top_p},
          {"max_tokens", req.max_tokens}};
}

std::uint64_t request_hash(const ChatRequest& req) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(req).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string request_hash_hex(const ChatRequest& req) { return fmt::format("{:016x}", request_hash(req)); }

std::string_view to_string(JudgementWord word) {
  static constexpr std::array<std::string_view, 5> names = {"very_unlikely", "unlikely", "unsure", "likely",
                                                            "very_likely"};
  return names[static_cast<std::size_t>(word)];
}

UnparseableJudgement::UnparseableJudgement(std::string raw)
    : std::runtime_error(fmt::format("unparseable judgement: '{}'", raw.substr(0, 200))), raw_(std::move(raw)) {}

Judgement parse_judgement(std::string_view text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    const json obj = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (obj.is_object()) {
      for (const char* key : {"judgement", "judgment"}) {
        auto it = obj.find(key);
        if (it != obj.end() && it->is_string())
          if (auto j = find_phrase(it->get_ref<const std::string&>())) return *j;
      }
    }
  }
  if (auto j = find_phrase(text)) return *j;
  throw UnparseableJudgement(std::string(text));
}

// ---------------------------------------------------------------------------

HttpLlmClient::HttpLlmClient(LlmEndpointConfig endpoint, std::shared_ptr<HttpTransport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
  if (endpoint_.base_url.empty()) throw ConfigError("llm endpoint base_url is empty");
}

std::string HttpLlmClient::chat(const ChatRequest& req) {
  ChatRequest sent = req;
  if (sent.model.empty()) sent.model = endpoint_.model;
  const std::string hash = request_hash_hex(sent);
  spdlog::info("chat request {} model={}", hash, sent.model);
  ++calls_;
  auto outcome = post_with_retry(*transport_, endpoint_.base_url + "/chat/completions", to_json(sent).dump(),
                                 auth_headers_from_env(endpoint_.api_key_env), endpoint_.retry);
  retries_ += outcome.retries;
  const json reply = json::parse(outcome.response.body, nullptr, false);
  if (reply.is_discarded()) throw EndpointError(fmt::format("chat request {}: response is not JSON", hash));
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw EndpointError(fmt::format("chat request {}: response has no choices[0].message.content", hash));
  }
}

// ---------------------------------------------------------------------------

MockLlmClient::MockLlmClient(const std::filesystem::path& fixture_dir, std::size_t max_in_flight)
    : MockLlmClient(
          [&] {
            const auto path = fixture_dir / "mock.json";
            std::ifstream in(path);
            if (!in) throw ConfigError(fmt::format("cannot open mock fixture {}", path.string()));
            std::stringstream buf;
            buf << in.rdbuf();
            try {
              return json::parse(buf.str());
            } catch (const json::parse_error& e) {
              throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
            }
          }(),
          max_in_flight) {}

MockLlmClient::MockLlmClient(nlohmann::json fixture, std::size_t max_in_flight) : max_in_flight_(max_in_flight) {
  if (!fixture.is_object()) throw ConfigError("mock fixture must be a JSON object");
  try {
    for (const auto& [key, value] : fixture.items()) {
      if (key == "responses") {
        for (const auto& [h, text] : value.items()) responses_[h] = text.get<std::string>();
      } else if (key == "rules") {
        for (const auto& r : value) {
          Rule rule;
          for (const auto& [rk, _] : r.items())
            if (rk != "contains" && rk != "matches" && rk != "response" && rk != "status")
              throw ConfigError(fmt::format("unknown mock rule key '{}'", rk));
          if (r.contains("contains")) rule.contains = r["contains"].get<std::vector<std::string>>();
          if (r.contains("matches")) {
            try {
              rule.matches.emplace(r["matches"].get<std::string>());
            } catch (const std::regex_error& e) {
              throw ConfigError(fmt::format("mock rule regex '{}': {}", r["matches"].get<std::string>(), e.what()));
            }
          }
          if (!r.contains("response") && !r.contains("status"))
            throw ConfigError("mock rule needs \"response\" or \"status\"");
          if (r.contains("status")) rule.status = r["status"].get<int>();
          if (r.contains("response")) rule.response = r["response"].get<std::string>();
          rules_.push_back(std::move(rule));
        }
      } else if (key == "default") {
        default_ = value.get<std::string>();
      } else if (key == "hash_judgement") {
        hash_judgement_ = value.get<bool>();
      } else {
        throw ConfigError(fmt::format("unknown mock fixture key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed mock fixture: {}", e.what()));
  }
}

std::string MockLlmClient::chat(const ChatRequest& req) {
  ++calls_;
  const std::string hash = request_hash_hex(req);
  spdlog::debug("mock chat request {}", hash);
  if (auto it = responses_.find(hash); it != responses_.end()) return it->second;
  const std::string content = joined_content(req);
  for (const auto& rule : rules_) {
    const bool all = std::all_of(rule.contains.begin(), rule.contains.end(),
                                 [&](const std::string& s) { return content.find(s) != std::string::npos; });
    if (!all || (rule.matches && !std::regex_search(content, *rule.matches))) continue;
    if (rule.status != 0)
      throw EndpointError(fmt::format("chat request {} failed: HTTP {}", hash, rule.status), rule.status);
    return rule.response;
  }
  if (default_) return *default_;
  if (hash_judgement_) return fmt::format("{{\"judgement\": \"{}\"}}", kPhrases[request_hash(req) % 5]);
  throw EndpointError(fmt::format("mock has no response for request {}", hash));
}

std::shared_ptr<LlmClient> make_llm_client(const std::string& selector, LlmEndpointConfig endpoint) {
  if (selector.empty() && endpoint.base_url.starts_with("mock:"))
    return std::make_shared<MockLlmClient>(std::filesystem::path(endpoint.base_url.substr(5)), endpoint.max_in_flight);
  if (selector.starts_with("mock:"))
    return std::make_shared<MockLlmClient>(std::filesystem::path(selector.substr(5)), endpoint.max_in_flight);
  if (!selector.empty()) endpoint.base_url = selector;
  return std::make_shared<HttpLlmClient>(std::move(endpoint), make_http_transport());
}

}  // namespace synque
