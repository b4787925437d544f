#include "synque/errors.hpp"
#include "synque/evalharness.hpp"
#include "synque/scenariogen.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>

using namespace synque;
using json = nlohmann::json;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  for (auto& x : v) x = ties ? static_cast<double>(rng.below(4)) : rng.normal();
  return v;
}

PerformanceTable perf_of(std::map<std::string, double> m) { return PerformanceTable{std::move(m)}; }

Scenario planted(std::int64_t seed, std::size_t n = 200) {
  ScenarioSpec spec;
  spec.dim = 4;
  spec.n_real = n;
  spec.seed = seed;
  for (double m : {0.0, 0.5, 1.0, 2.0, 4.0})
    spec.candidates.push_back({fmt::format("d{}", m), ShiftKind::mean_shift, m, n});
  return generate(spec);
}

PerformanceTable planted_perf(const Scenario& sc) {
  PerformanceTable perf;
  for (const auto& [name, d] : sc.distortion) perf.entries[name] = -d;
  return perf;
}

MetricSpec metric(Metric m) {
  MetricSpec s;
  s.metric = m;
  return s;
}

}  // namespace

TEST_CASE("correlation worked examples") {
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  CHECK(pearson(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(spearman(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  const std::vector<double> c{3, 5, 7}, d{-1, -2, -3};
  CHECK(pearson(a, c) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(a, d) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(spearman(a, a) == 1.0);
  CHECK(spearman(a, d) == -1.0);
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("correlation errors") {
  const std::vector<double> a{1, 2, 3}, flat{2, 2, 2};
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(a, flat), UndefinedCorrelation);
  CHECK_THROWS_AS(spearman(flat, flat), UndefinedCorrelation);
}

TEST_CASE("pearson and spearman match brute-force definitions on 100 random vectors") {
  Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(30);
    const bool ties = t % 3 == 0;
    auto a = random_vector(rng, n, ties), b = random_vector(rng, n, ties);
    a[0] = -1.0;
    a[1] = 7.0;
    b[0] = 9.0;
    b[1] = -3.0;
    CHECK(std::abs(pearson(a, b) - oracle::pearson(a, b)) <= 1e-12);
    CHECK(std::abs(spearman(a, b) - oracle::spearman(a, b)) <= 1e-12);
  }
}

TEST_CASE("correlation symmetry and invariances") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_vector(rng, 12, false), b = random_vector(rng, 12, false);
    CHECK(std::abs(pearson(a, b) - pearson(b, a)) <= 1e-12);
    CHECK(std::abs(spearman(a, b) - spearman(b, a)) <= 1e-12);
    std::vector<double> affine, mono;
    for (double x : a) {
      affine.push_back(3.5 * x - 2.0);
      mono.push_back(std::exp(x) + x * x * x);
    }
    CHECK(std::abs(pearson(affine, b) - pearson(a, b)) <= 1e-9);
    CHECK(std::abs(spearman(mono, b) - spearman(a, b)) <= 1e-9);
    const double r = pearson(a, b);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("top-k worked example") {
  const std::map<std::string, double> scores{{"a", 0.9}, {"b", 0.5}, {"c", 0.1}, {"d", 0.7}};
  const auto perf = perf_of({{"a", 30}, {"b", 20}, {"c", 10}, {"d", 40}});
  const auto t = topk_table(scores, perf, 3);
  CHECK(t.selected == std::vector<std::string>{"a", "d", "b"});
  CHECK(t.topk_mean == 30.0);
  CHECK(t.pool_mean == 25.0);
  CHECK(t.improvement == 5.0);
  CHECK(topk_table(scores, perf, 4).improvement == 0.0);
  CHECK_THROWS_AS(topk_table(scores, perf, 5), std::invalid_argument);
  CHECK_THROWS_AS(topk_table(scores, perf_of({{"a", 1}}), 2), DataError);
}

TEST_CASE("top-k ties break by dataset name") {
  const std::map<std::string, double> scores{{"zeta", 1.0}, {"alpha", 1.0}, {"mid", 0.5}};
  const auto t = topk_table(scores, perf_of({{"zeta", 1}, {"alpha", 2}, {"mid", 3}}), 1);
  CHECK(t.selected == std::vector<std::string>{"alpha"});
  CHECK(rank_by_score(scores) == std::vector<std::string>{"alpha", "zeta", "mid"});
}

TEST_CASE("top-k matches exhaustive selection on pools of at most 6 datasets") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(6);
    std::map<std::string, double> scores;
    PerformanceTable perf;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string name(1, static_cast<char>('a' + rng.below(26)));
      scores[name + std::to_string(i)] = static_cast<double>(rng.below(5));
      perf.entries[name + std::to_string(i)] = rng.normal();
    }
    for (std::size_t k = 1; k <= scores.size(); ++k) {
      const auto table = topk_table(scores, perf, k);
      auto selected = table.selected;
      std::sort(selected.begin(), selected.end());
      CHECK(selected == oracle::best_subset(scores, k));
      double pool = 0;
      for (const auto& [_, p] : perf.entries) pool += p;
      CHECK(table.improvement == table.topk_mean - table.pool_mean);
      CHECK(std::abs(table.pool_mean - pool / static_cast<double>(scores.size())) <= 1e-12);

      std::map<std::string, double> transformed;
      for (const auto& [name, s] : scores) transformed[name] = std::exp(2.0 * s) - 4.0;
      CHECK(topk_table(transformed, perf, k).selected == table.selected);
    }
  }
}

TEST_CASE("performance table loading") {
  testutil::TempDir dir;
  testutil::write_file(dir / "perf.csv", "dataset,performance\nb,0.5\na,-1.25\n");
  const auto perf = load_performance_table(dir / "perf.csv");
  CHECK(perf.at("a") == -1.25);
  try {
    perf.at("zz");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  testutil::write_file(dir / "dup.csv", "dataset,performance\na,1\na,2\n");
  CHECK_THROWS_AS(load_performance_table(dir / "dup.csv"), DataError);
  testutil::write_file(dir / "bad.csv", "dataset,performance\na,high\n");
  CHECK_THROWS_AS(load_performance_table(dir / "bad.csv"), DataError);
  testutil::write_file(dir / "hdr.csv", "name,score\na,1\n");
  CHECK_THROWS_AS(load_performance_table(dir / "hdr.csv"), DataError);
}

TEST_CASE("metric spec json") {
  const auto a = metric_spec_from_json(json("mdm"));
  CHECK(a.metric == Metric::mdm);
  CHECK(a.name() == "mdm");
  const auto b = metric_spec_from_json(json::parse(R"({"metric":"mmd2","label":"mmd2_linear","kernel":{"family":"linear"}})"));
  CHECK(b.name() == "mmd2_linear");
  CHECK(b.kernel.family == KernelFamily::linear);
  CHECK(metric_spec_from_json(to_json(b)).name() == "mmd2_linear");
  CHECK_THROWS_AS(metric_spec_from_json(json("bleu")), ConfigError);
  CHECK_THROWS_AS(metric_spec_from_json(json::parse(R"({"metric":"mdm","depth":2})")), ConfigError);
}

TEST_CASE("single dataset pool reports null correlations with a reason") {
  const auto sc = planted(1, 60);
  EvalConfig cfg;
  cfg.metrics = {metric(Metric::mmd2)};
  const auto report = multi_seed_eval({sc.candidates[0]}, sc.real, planted_perf(sc), cfg);
  const auto& m = report.metrics[0];
  CHECK(!m.spearman.mean);
  CHECK(!m.pearson.mean);
  CHECK(!m.spearman.reason.empty());
  const auto j = to_json(report);
  CHECK(j["metrics"]["mmd2"]["spearman"]["mean"].is_null());
  CHECK(j["metrics"]["mmd2"]["per_seed"][0]["spearman"]["reason"] == "fewer than two datasets");
}

TEST_CASE("planted pool: mmd2 seed-mean spearman is 1 and top-k picks the least shifted") {
  const auto sc = planted(5);
  EvalConfig cfg;
  cfg.m_r = 200;
  cfg.metrics = {metric(Metric::mmd2), metric(Metric::mauve)};
  const auto report = multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg);
  CHECK(*report.metrics[0].spearman.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.metrics[0].topk->selected == std::vector<std::string>{"d0", "d0.5", "d1"});
  CHECK(!report.partial);
}

TEST_CASE("report means equal per-seed means and identical seeds give identical rows") {
  const auto sc = planted(2, 80);
  EvalConfig cfg;
  cfg.seeds = {3, 3, 8};
  cfg.m_r = 30;
  cfg.metrics = {metric(Metric::mmd2), metric(Metric::pad), metric(Metric::mdm)};
  const auto report = multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg);
  for (const auto& m : report.metrics) {
    for (const auto& [name, _] : m.seeds[0].scores) CHECK(m.seeds[0].scores.at(name).raw == m.seeds[1].scores.at(name).raw);
    CHECK(m.seeds[0].spearman.value == m.seeds[1].spearman.value);
    double mean = 0;
    for (const auto& row : m.seeds) mean += *row.spearman.value;
    CHECK(std::abs(*m.spearman.mean - mean / 3.0) <= 1e-12);
    for (const auto& [name, value] : m.score_mean) {
      double s = 0;
      for (const auto& row : m.seeds) s += row.scores.at(name).synque_score;
      CHECK(std::abs(value - s / 3.0) <= 1e-12);
    }
    CHECK(m.seeds[0].scores.at("d0").meta.at("seed") == "3");
  }
  CHECK(report.metrics[0].seeds[0].scores.at("d0").meta.at("m_r") == "30");
  CHECK(report.metrics[2].seeds[0].scores.at("d0").meta.count("m_r") == 0);
}

TEST_CASE("evaluation is deterministic across worker counts and canonical json is stable") {
  const auto sc = planted(4, 60);
  EvalConfig cfg;
  cfg.seeds = {0, 1};
  cfg.metrics = {metric(Metric::mmd2), metric(Metric::mdm), metric(Metric::pad), metric(Metric::mauve)};
  cfg.workers = 1;
  const auto one = canonical_json(to_json(multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg)));
  cfg.workers = 8;
  const auto many = canonical_json(to_json(multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg)));
  CHECK(one == many);
  CHECK(canonical_json(json::parse(R"({"b":-0.0,"a":[1,2.5]})")) ==
        "{\n  \"a\": [\n    1,\n    2.500000\n  ],\n  \"b\": 0.000000\n}\n");
}

TEST_CASE("metric failures mark the report partial; data errors abort") {
  const auto sc = planted(6, 40);
  EvalConfig cfg;
  cfg.seeds = {0};
  MetricSpec bad = metric(Metric::mdm);
  bad.k = 1000;
  cfg.metrics = {metric(Metric::mmd2), bad};
  const auto report = multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg);
  CHECK(report.partial);
  CHECK(!report.metrics[0].partial);
  CHECK(report.metrics[1].partial);
  CHECK(report.metrics[1].errors.size() == 5);
  CHECK(!report.metrics[1].topk);
  CHECK(to_markdown(report).find("Partial results") != std::string::npos);

  cfg.metrics = {metric(Metric::mmd2)};
  CHECK_THROWS_AS(multi_seed_eval(sc.candidates, sc.real, perf_of({{"d0", 1}}), cfg), DataError);
  cfg.m_r = 1000;
  CHECK_THROWS_AS(multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg), ConfigError);
  cfg.m_r = 30;
  cfg.metrics = {metric(Metric::hybrid)};
  CHECK_THROWS_AS(multi_seed_eval(sc.candidates, sc.real, planted_perf(sc), cfg), ConfigError);
}

TEST_CASE("summaries use the population standard deviation") {
  const auto s = summarize({{0.5, ""}, {1.0, ""}, {std::nullopt, "constant"}});
  CHECK(*s.mean == 0.75);
  CHECK(*s.std == 0.25);
  CHECK(s.defined == 2);
  CHECK(s.reason.find("constant") != std::string::npos);
}
