#include "synque/errors.hpp"
#include "synque/ingest.hpp"
#include "synque/scenariogen.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <set>

using namespace synque;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("jsonl records keep file order") {
  TempDir dir;
  write_file(dir / "a.jsonl", "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\",\"text\":\"two\"}\n{\"id\":\"c\",\"text\":\"three\"}\n");
  const auto set = load_records(dir / "a.jsonl", RecordFormat::jsonl, SetKind::real, "pool");
  REQUIRE(set.size() == 3);
  CHECK(set.records[0].id == "a");
  CHECK(set.records[1].id == "b");
  CHECK(set.records[2].id == "c");
  CHECK(set.kind == SetKind::real);
  CHECK(set.name == "pool");
}

TEST_CASE("duplicate ids are rejected by name") {
  TempDir dir;
  write_file(dir / "d.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  try {
    load_records(dir / "d.jsonl", RecordFormat::jsonl, SetKind::real);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("\"a\"") != std::string::npos);
  }
}

TEST_CASE("empty file, blank payload and parse errors") {
  TempDir dir;
  write_file(dir / "empty.jsonl", "");
  CHECK_THROWS_AS(load_records(dir / "empty.jsonl", RecordFormat::jsonl, SetKind::real), DataError);
  write_file(dir / "blank.jsonl", "{\"id\":\"a\",\"text\":\"   \"}\n");
  CHECK_THROWS_AS(load_records(dir / "blank.jsonl", RecordFormat::jsonl, SetKind::real), DataError);
  write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{not json\n");
  try {
    load_records(dir / "bad.jsonl", RecordFormat::jsonl, SetKind::real);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_records(dir / "missing.jsonl", RecordFormat::jsonl, SetKind::real), DataError);
}

TEST_CASE("csv records round-trip through save and load") {
  TempDir dir;
  RecordSet set{"s", {{"x1", "plain"}, {"x2", "has, comma and \"quotes\"\nand a newline"}}, SetKind::synthetic};
  save_records(dir / "s.csv", set, RecordFormat::csv);
  const auto back = load_records(dir / "s.csv", RecordFormat::csv, SetKind::synthetic, "s");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.records[i].id == set.records[i].id);
    CHECK(back.records[i].payload == set.records[i].payload);
  }
  write_file(dir / "h.csv", "id,text\nr1,hello\nr2,world\n");
  CHECK(load_records(dir / "h.csv", RecordFormat::csv, SetKind::real).size() == 2);
  write_file(dir / "nohdr.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(load_records(dir / "nohdr.csv", RecordFormat::csv, SetKind::real), DataError);
  CHECK(record_format_from_path("x.csv") == RecordFormat::csv);
  CHECK(record_format_from_path("x.jsonl") == RecordFormat::jsonl);
}

TEST_CASE("embeddings: shape, NaN, ragged, duplicates") {
  TempDir dir;
  write_file(dir / "e.jsonl", "{\"id\":\"a\",\"embedding\":[1,2,3,4]}\n{\"id\":\"b\",\"embedding\":[5,6,7,8]}\n");
  const auto E = load_embeddings(dir / "e.jsonl");
  CHECK(E.rows() == 2);
  CHECK(E.dim() == 4);
  CHECK(E.data()(1, 2) == 7.0);
  write_file(dir / "nan.jsonl", "{\"id\":\"a\",\"embedding\":[1,NaN]}\n");
  CHECK_THROWS_AS(load_embeddings(dir / "nan.jsonl"), DataError);
  write_file(dir / "nan2.jsonl", "{\"id\":\"a\",\"embedding\":[1,\"NaN\"]}\n");
  CHECK_THROWS_AS(load_embeddings(dir / "nan2.jsonl"), DataError);
  write_file(dir / "rag.jsonl", "{\"id\":\"a\",\"embedding\":[1,2]}\n{\"id\":\"b\",\"embedding\":[1,2,3]}\n");
  CHECK_THROWS_AS(load_embeddings(dir / "rag.jsonl"), DataError);
  write_file(dir / "dup.jsonl", "{\"id\":\"a\",\"embedding\":[1]}\n{\"id\":\"a\",\"embedding\":[2]}\n");
  CHECK_THROWS_AS(load_embeddings(dir / "dup.jsonl"), DataError);
  Eigen::MatrixXd bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(EmbeddingMatrix({"a"}, bad), DataError);
}

TEST_CASE("scenario embeddings round-trip bitwise") {
  TempDir dir;
  ScenarioSpec spec;
  spec.dim = 8;
  spec.n_real = 1000;
  const auto sc = generate(spec);
  save_embeddings(dir / "real.jsonl", sc.real.embeddings);
  const auto back = load_embeddings(dir / "real.jsonl");
  REQUIRE(back.rows() == 1000);
  REQUIRE(back.dim() == 8);
  CHECK(back.ids() == sc.real.embeddings.ids());
  CHECK(std::memcmp(back.data().data(), sc.real.embeddings.data().data(), sizeof(double) * 8000) == 0);
}

TEST_CASE("embeddings align to record order by id") {
  const auto E = testutil::matrix({{1}, {2}, {3}}, "r");
  RecordSet set{"s", {{"r2", "c"}, {"r0", "a"}, {"r1", "b"}}, SetKind::synthetic};
  const auto A = E.aligned_to(set);
  CHECK(A.ids() == std::vector<std::string>{"r2", "r0", "r1"});
  CHECK(A.data()(0, 0) == 3.0);
  RecordSet missing{"s", {{"zz", "c"}}, SetKind::synthetic};
  CHECK_THROWS_AS(E.aligned_to(missing), DataError);
}

TEST_CASE("subsample: permutation, determinism, injectivity, bounds") {
  RecordSet set{"s", {}, SetKind::real};
  for (int i = 0; i < 20; ++i) set.records.push_back({fmt::format("id{}", i), fmt::format("t{}", i)});
  const auto all = subsample(set, 20, 3);
  std::set<std::string> ids;
  for (const auto& r : all.records) ids.insert(r.id);
  CHECK(ids.size() == 20);
  const auto a = subsample(set, 7, 1), b = subsample(set, 7, 1);
  REQUIRE(a.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(a.records[i].id == b.records[i].id);
  std::set<std::string> uniq;
  for (const auto& r : a.records) uniq.insert(r.id);
  CHECK(uniq.size() == 7);
  CHECK_THROWS_AS(subsample(set, 21, 0), std::invalid_argument);
}

TEST_CASE("subsample pair frequencies are uniform within 3 sigma") {
  const int draws = 10000;
  std::map<std::pair<std::size_t, std::size_t>, int> freq;
  for (int s = 0; s < draws; ++s) {
    auto idx = subsample_indices(4, 2, s);
    if (idx[0] > idx[1]) std::swap(idx[0], idx[1]);
    ++freq[{idx[0], idx[1]}];
  }
  CHECK(freq.size() == 6);
  const double p = 1.0 / 6.0, sigma = std::sqrt(draws * p * (1 - p));
  for (const auto& [pair, count] : freq) CHECK(std::abs(count - draws * p) <= 3 * sigma);
}
