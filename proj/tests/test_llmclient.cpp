#include "synque/errors.hpp"
#include "synque/llmclient.hpp"

#include <doctest.h>

using namespace synque;

namespace {

ChatRequest request(std::string content, double temperature = 0.0) {
  ChatRequest r;
  r.model = "m";
  r.messages = {{"user", std::move(content)}};
  r.temperature = temperature;
  return r;
}

}  // namespace

TEST_CASE("judgement table") {
  const std::vector<std::pair<std::string, int>> table = {
      {"very likely", 4},
      {"Very Likely", 4},
      {"VERY_LIKELY", 4},
      {"very-likely", 4},
      {"likely", 3},
      {"Likely.", 3},
      {"unsure", 2},
      {"I am unsure about this", 2},
      {"unlikely", 1},
      {"Unlikely!", 1},
      {"very unlikely", 0},
      {"very   unlikely", 0},
      {R"({"judgement": "likely"})", 3},
      {R"({"judgment": "very unlikely"})", 0},
      {R"(Answer: {"judgement": "Very Likely"} done)", 4},
      {R"({"reason": "unlikely to be A", "judgement": "likely"})", 3},
      {"It is likely that A is right", 3},
      {"\"very likely\"", 4},
      {"The answer: unsure\n", 2},
      {"likely, but not very likely", 4},
  };
  for (const auto& [text, grade] : table) {
    CAPTURE(text);
    const auto j = parse_judgement(text);
    CHECK(j.grade == grade);
    CHECK(static_cast<int>(j.word) == grade);
  }
}

TEST_CASE("unparseable judgements carry the raw text") {
  for (std::string text : {"", "yes", "unlikelyhood", R"({"judgement": 3})", "probable"}) {
    CAPTURE(text);
    try {
      parse_judgement(text);
      FAIL("expected UnparseableJudgement");
    } catch (const UnparseableJudgement& e) {
      CHECK(e.raw_text() == text);
    }
  }
}

TEST_CASE("request hash is stable and sensitive to every field") {
  const auto a = request("hello"), b = request("hello");
  CHECK(request_hash(a) == request_hash(b));
  CHECK(request_hash_hex(a).size() == 16);
  CHECK(request_hash(a) != request_hash(request("hello", 0.5)));
  CHECK(request_hash(a) != request_hash(request("hello!")));
  auto c = a;
  c.max_tokens = kScoringMaxTokens;
  CHECK(request_hash(a) != request_hash(c));
  const auto body = to_json(a);
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["top_p"] == 0.95);
  CHECK(body["temperature"] == 0.0);
}

TEST_CASE("mock lookup order") {
  const auto exact = request("exact text");
  nlohmann::json fixture = {
      {"responses", {{request_hash_hex(exact), "from hash"}}},
      {"rules",
       nlohmann::json::array({{{"contains", {"exact"}}, {"response", "from rule"}},
                              {{"contains", {"alpha", "beta"}}, {"response", "both"}},
                              {{"contains", nlohmann::json::array()}, {"matches", "order: (A|B)$"}, {"response", "regex"}},
                              {{"contains", {"boom"}}, {"status", 503}}})},
      {"default", "fallback"}};
  MockLlmClient mock(fixture);
  CHECK(mock.chat(exact) == "from hash");
  CHECK(mock.chat(request("exact words")) == "from rule");
  CHECK(mock.chat(request("alpha and beta")) == "both");
  CHECK(mock.chat(request("alpha only")) == "fallback");
  CHECK(mock.chat(request("order: B")) == "regex");
  CHECK(mock.chat(request("order: C")) == "fallback");
  try {
    mock.chat(request("boom"));
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.status() == 503);
  }
  CHECK(mock.calls() == 7);
}

TEST_CASE("mock hash judgement is deterministic and parseable") {
  MockLlmClient mock(nlohmann::json{{"hash_judgement", true}});
  for (int i = 0; i < 20; ++i) {
    const auto r = request("sample " + std::to_string(i));
    const auto first = mock.chat(r);
    CHECK(mock.chat(r) == first);
    CHECK(parse_judgement(first).grade == static_cast<int>(request_hash(r) % 5));
  }
}

TEST_CASE("mock fixture validation") {
  CHECK_THROWS_AS(MockLlmClient(nlohmann::json{{"replies", {}}}), ConfigError);
  CHECK_THROWS_AS(MockLlmClient(nlohmann::json{{"rules", {{{"contains", {"x"}}}}}}), ConfigError);
  CHECK_THROWS_AS(MockLlmClient(nlohmann::json{{"rules", {{{"contains", {"x"}}, {"matches", "("}, {"response", "y"}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(MockLlmClient(std::filesystem::path("/nonexistent/dir")), ConfigError);
  MockLlmClient empty(nlohmann::json::object());
  CHECK_THROWS_AS(empty.chat(request("anything")), EndpointError);
}

TEST_CASE("client factory") {
  CHECK(std::dynamic_pointer_cast<MockLlmClient>(make_llm_client("mock:" SYNQUE_FIXTURES "/sentiment/mock", {})));
  LlmEndpointConfig cfg;
  CHECK_THROWS_AS(make_llm_client("", cfg), ConfigError);
  auto http = make_llm_client("http://127.0.0.1:9/v1", cfg);
  CHECK(http->max_in_flight() == 8);
}
