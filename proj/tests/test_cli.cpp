#include "synque/cli.hpp"
#include "synque/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <sstream>

using namespace synque;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "synque");
  args.insert(args.begin() + 1, {"--log-level", "off"});
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::string kSentiment = SYNQUE_FIXTURES "/sentiment";

// Writes a planted scenario (mean shifts 0, 1, 2, 4) and returns its directory.
std::filesystem::path scenario(const testutil::TempDir& dir, std::size_t n = 200) {
  json spec{{"dim", 4}, {"n_real", n}, {"seed", 3}, {"candidates", json::array()}};
  for (double m : {4.0, 0.0, 2.0, 1.0})
    spec["candidates"].push_back({{"name", fmt::format("shift{}", m)}, {"shift_kind", "mean_shift"}, {"magnitude", m}, {"n", n}});
  testutil::write_file(dir / "spec.json", spec.dump());
  const auto r = run({"scenario", "--spec", (dir / "spec.json").string(), "--out", (dir / "sc").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("planted order: shift0, shift1, shift2, shift4") != std::string::npos);
  return dir / "sc";
}

}  // namespace

TEST_CASE("score prints one canonical json object and is deterministic") {
  testutil::TempDir dir;
  const auto sc = scenario(dir, 60);
  const std::vector<std::string> args{"score", "--config", (sc / "config.json").string(), "--dataset", "shift1",
                                      "--metric", "mmd2", "--seed", "2"};
  const auto a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = json::parse(a.out);
  CHECK(j["metric"] == "mmd2");
  CHECK(j["synque_score"].get<double>() == -j["raw"].get<double>());
  CHECK(j["meta"]["seed"] == "2");
  CHECK(j["meta"]["dataset"] == "shift1");
  CHECK(j["meta"]["m_r"] == "30");
}

TEST_CASE("unknown metric exits 2 and lists the valid names") {
  testutil::TempDir dir;
  const auto sc = scenario(dir, 40);
  const auto r = run({"score", "-c", (sc / "config.json").string(), "--dataset", "shift1", "--metric", "bleu"});
  CHECK(r.code == 2);
  for (const char* name : {"mmd2", "mdm", "pad", "mauve", "lens", "hybrid"}) CHECK(r.err.find(name) != std::string::npos);
}

TEST_CASE("usage and config errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"score"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"rank", "-c", "/nonexistent/config.json"}).code == 2);
  testutil::TempDir dir;
  testutil::write_file(dir / "bad.json", R"({"datasets": [], "real_pool": {"records": "x.jsonl"}, "colour": 1})");
  CHECK(run({"rank", "-c", (dir / "bad.json").string()}).code == 2);
  const auto sc = scenario(dir, 40);
  CHECK(run({"score", "-c", (sc / "config.json").string(), "--dataset", "nope", "--metric", "mmd2"}).code == 2);
  CHECK(run({"eval", "-c", (sc / "config.json").string(), "--seeds", "0,x"}).code == 2);
  CHECK(run({"score", "-c", (sc / "config.json").string(), "--dataset", "shift1", "--metric", "hybrid"}).code == 2);
}

TEST_CASE("rank follows the planted order for mmd2 and shows top-k with a perf table") {
  testutil::TempDir dir;
  const auto sc = scenario(dir);
  const auto r = run({"rank", "-c", (sc / "config.json").string(), "--m-r", "200", "--k", "3"});
  REQUIRE(r.code == 0);
  const auto mmd = r.out.substr(r.out.find("## mmd2"));
  std::vector<std::size_t> pos;
  for (const char* name : {"| 1 | shift0 |", "| 2 | shift1 |", "| 3 | shift2 |", "| 4 | shift4 |"}) {
    pos.push_back(mmd.find(name));
    CHECK(pos.back() != std::string::npos);
  }
  CHECK(mmd.find("Top-3: shift0, shift1, shift2") != std::string::npos);
  CHECK(mmd.find("improvement +") != std::string::npos);

  const auto j = run({"rank", "-c", (sc / "config.json").string(), "--m-r", "200", "--json"});
  REQUIRE(j.code == 0);
  CHECK(json::parse(j.out)["metrics"]["mmd2"]["topk"]["k"] == 3);
}

TEST_CASE("rank without a performance table prints rankings only") {
  testutil::TempDir dir;
  const auto sc = scenario(dir, 60);
  auto cfg = json::parse(testutil::read_file(sc / "config.json"));
  cfg.erase("performance");
  testutil::write_file(sc / "noperf.json", cfg.dump());
  const auto r = run({"rank", "-c", (sc / "noperf.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("| 1 |") != std::string::npos);
  CHECK(r.out.find("Top-") == std::string::npos);
  CHECK(r.out.find("Spearman") == std::string::npos);
}

TEST_CASE("eval writes json and markdown; --seeds selects per-seed rows") {
  testutil::TempDir dir;
  const auto sc = scenario(dir, 60);
  const auto out_json = (dir / "r.json").string(), out_md = (dir / "r.md").string();
  const auto r = run({"eval", "-c", (sc / "config.json").string(), "--seeds", "0,1", "--out-json", out_json, "--out-md",
                      out_md});
  REQUIRE(r.code == 0);
  const auto report = json::parse(testutil::read_file(out_json));
  for (const auto& [label, m] : report["metrics"].items()) CHECK(m["per_seed"].size() == 2);
  CHECK(report["settings"]["seeds"] == json{0, 1});
  CHECK(testutil::read_file(out_md).find("| mdm |") != std::string::npos);
}

TEST_CASE("sentiment fixture with the mock LLM reproduces the golden report") {
  const auto a = run({"eval", "-c", kSentiment + "/config.json"});
  const auto b = run({"eval", "-c", kSentiment + "/config.json"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == testutil::read_file(kSentiment + "/golden_report.json"));
  const auto report = json::parse(a.out);
  CHECK(report["metrics"]["lens"]["spearman"]["mean"] == 1.0);
  CHECK(report["metrics"]["lens"]["per_seed"][0]["scores"]["no_ticker"]["meta"]["fallback_judgements"] == "4");
}

TEST_CASE("lens score and rubric subcommands run against the mock") {
  const auto s = run({"score", "-c", kSentiment + "/config.json", "--dataset", "faithful", "--metric", "lens"});
  REQUIRE(s.code == 0);
  const auto j = json::parse(s.out);
  CHECK(j["metric"] == "lens");
  CHECK(j["raw"].get<double>() > 0.0);
  const auto r = run({"rubric", "-c", kSentiment + "/config.json", "--dataset", "chatty", "--num-points", "3"});
  REQUIRE(r.code == 0);
  const auto rubric = json::parse(r.out);
  CHECK(rubric["commonalities"].size() == 3);
  CHECK(rubric["diff_syn_from_real"][0].get<std::string>().starts_with("Dataset B"));
  CHECK(rubric["diff_real_from_syn"][0] == "Dataset B always closes with a ticker symbol in parentheses.");
}

TEST_CASE("a failing endpoint flags the report partial and exits 3") {
  testutil::TempDir dir;
  auto mock = json::parse(testutil::read_file(kSentiment + "/mock/mock.json"));
  mock["rules"].insert(mock["rules"].begin(), json{{"contains", {"judged:\nOMG"}}, {"status", 503}});
  std::filesystem::create_directories(dir / "mock");
  testutil::write_file(dir / "mock" / "mock.json", mock.dump());
  const auto r = run({"eval", "-c", kSentiment + "/config.json", "--llm", "mock:" + (dir / "mock").string(), "--seeds", "0"});
  CHECK(r.code == 3);
  const auto report = json::parse(r.out);
  CHECK(report["partial"] == true);
  CHECK(report["metrics"]["lens"]["errors"][0].get<std::string>().find("chatty") != std::string::npos);
  CHECK(report["metrics"]["lens"]["per_seed"][0]["scores"].contains("faithful"));

  const auto s = run({"score", "-c", kSentiment + "/config.json", "--dataset", "chatty", "--metric", "lens", "--llm",
                      "mock:" + (dir / "mock").string()});
  CHECK(s.code == 3);
}
