#include "synque/lens.hpp"

#include "prompt_data.hpp"
#include "synque/errors.hpp"
#include "synque/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace synque {

using json = nlohmann::json;

namespace {

constexpr std::string_view kListClarification =
    "\n\nReturn only a JSON list of strings, for example [\"point one\", \"point two\"].";
constexpr std::string_view kJudgementClarification =
    "\n\nAnswer with exactly one of \"very unlikely\", \"unlikely\", \"unsure\", \"likely\", \"very likely\" "
    "as {\"judgement\": \"...\"}.";

struct Counters {
  std::atomic<std::size_t> fallback{0}, clarify{0}, rubric_retry{0}, calls{0};

  void flush(LensDiagnostics* diag) const {
    if (!diag) return;
    diag->fallback_judgements += fallback;
    diag->clarification_retries += clarify;
    diag->rubric_retries += rubric_retry;
    diag->llm_calls += calls;
  }
};

ChatRequest make_request(const LlmClient& llm, std::string prompt, int max_tokens) {
  ChatRequest req;
  req.model = llm.model();
  req.messages.push_back({"user", std::move(prompt)});
  req.max_tokens = max_tokens;
  return req;
}

std::optional<std::vector<std::string>> parse_list(const std::string& text) {
  const auto open = text.find('[');
  const auto close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  const json j = json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (!j.is_array() || j.empty()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) return std::nullopt;
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<std::string> ask_for_list(LlmClient& llm, const std::string& prompt, std::size_t num_points,
                                      Counters& counters, std::string_view what) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string text = attempt == 0 ? prompt : prompt + std::string(kListClarification);
    ++counters.calls;
    const std::string reply = llm.chat(make_request(llm, std::move(text), kRubricMaxTokens));
    if (auto list = parse_list(reply)) {
      if (list->size() > num_points) list->resize(num_points);
      return *list;
    }
    if (attempt == 0) {
      ++counters.rubric_retry;
      spdlog::warn("rubric {}: reply is not a JSON list of strings, retrying", what);
    }
  }
  throw EndpointError(fmt::format("rubric {}: LLM output is not a JSON list of strings after one retry", what));
}

int grade(const Record& x, const Rubric& rubric, PredictedLabel label, RubricOrder order, LlmClient& llm,
          const PromptSet& prompts, Counters& counters) {
  const std::string prompt = render_scorer_prompt(x, rubric, label, order, prompts);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string text = attempt == 0 ? prompt : prompt + std::string(kJudgementClarification);
    ++counters.calls;
    const std::string reply = llm.chat(make_request(llm, std::move(text), kScoringMaxTokens));
    try {
      return parse_judgement(reply).grade;
    } catch (const UnparseableJudgement&) {
      if (attempt == 0) ++counters.clarify;
    }
  }
  ++counters.fallback;
  spdlog::warn("sample '{}' ({}): judgement unparseable after retry, graded unsure", x.id,
               kPermNames[perm_of(label, order)]);
  return 2;
}

std::string_view to_string(LensVariant v) { return v == LensVariant::debiased ? "debiased" : "biased"; }

}  // namespace

void Rubric::validate() const {
  if (num_points < 1) throw ConfigError("rubric num_points must be at least 1");
  const auto check = [&](const std::vector<std::string>& list, std::string_view name) {
    if (list.empty() || list.size() > num_points)
      throw DataError(fmt::format("rubric list '{}' must hold 1..{} points, has {}", name, num_points, list.size()));
  };
  check(commonalities, "commonalities");
  check(diff_syn_from_real, "diff_syn_from_real");
  check(diff_real_from_syn, "diff_real_from_syn");
}

nlohmann::json to_json(const Rubric& rubric) {
  return {{"commonalities", rubric.commonalities},
          {"diff_syn_from_real", rubric.diff_syn_from_real},
          {"diff_real_from_syn", rubric.diff_real_from_syn},
          {"num_points", rubric.num_points}};
}

Rubric rubric_from_json(const nlohmann::json& j) {
  Rubric r;
  try {
    r.commonalities = j.at("commonalities").get<std::vector<std::string>>();
    r.diff_syn_from_real = j.at("diff_syn_from_real").get<std::vector<std::string>>();
    r.diff_real_from_syn = j.at("diff_real_from_syn").get<std::vector<std::string>>();
    r.num_points = j.value("num_points", std::max({r.commonalities.size(), r.diff_syn_from_real.size(),
                                                   r.diff_real_from_syn.size()}));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed rubric: {}", e.what()));
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------

const PromptSet& prompt_set(std::string_view name) {
  static const std::map<std::string, PromptSet, std::less<>> sets = [] {
    std::map<std::string, PromptSet, std::less<>> out;
    for (std::size_t i = 0; i < detail::kPromptSetCount; ++i) {
      const std::string set = detail::kPromptSets[i];
      out[set] = PromptSet{set, std::string(detail::embedded_prompt(set, "rubric_common")),
                           std::string(detail::embedded_prompt(set, "rubric_diff")),
                           std::string(detail::embedded_prompt(set, "scorer"))};
    }
    return out;
  }();
  auto it = sets.find(name);
  if (it == sets.end())
    throw ConfigError(fmt::format("unknown prompt set '{}' (available: {})", name,
                                  fmt::join(prompt_set_names(), ", ")));
  return it->second;
}

std::vector<std::string> prompt_set_names() {
  std::vector<std::string> out(detail::kPromptSets, detail::kPromptSets + detail::kPromptSetCount);
  std::sort(out.begin(), out.end());
  return out;
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (true) {
    const auto open = tpl.find("${", pos);
    if (open == std::string_view::npos) break;
    const auto close = tpl.find('}', open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(tpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw std::invalid_argument(fmt::format("template placeholder '${{{}}}' has no value", name));
    out.append(tpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(tpl.substr(pos));
  return out;
}

std::string format_samples(const RecordSet& set) {
  std::string out;
  for (const auto& r : set.records) {
    if (!out.empty()) out += '\n';
    out += "- ";
    out += r.payload;
  }
  return out;
}

std::string format_points(const std::vector<std::string>& points) { return json(points).dump(); }

// ---------------------------------------------------------------------------

void LensConfig::validate() const {
  if (num_points < 1) throw ConfigError("lens num_points must be at least 1");
  if (!(epsilon > 0.0)) throw ConfigError("lens epsilon must be positive");
  if (rubric_samples && *rubric_samples < 1) throw ConfigError("lens rubric_samples must be at least 1");
  if (scoring_cap < 1) throw ConfigError("lens scoring_cap must be at least 1");
  prompt_set(prompts);
}

nlohmann::json to_json(const LensConfig& cfg) {
  json j{{"num_points", cfg.num_points},
         {"epsilon", cfg.epsilon},
         {"scoring_cap", cfg.scoring_cap},
         {"seed", cfg.seed},
         {"prompts", cfg.prompts},
         {"variant", std::string(to_string(cfg.variant))}};
  j["rubric_samples"] = cfg.rubric_samples ? json(*cfg.rubric_samples) : json("auto");
  return j;
}

LensConfig lens_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("lens config must be a JSON object");
  LensConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_points") {
        cfg.num_points = value.get<std::size_t>();
      } else if (key == "epsilon") {
        cfg.epsilon = value.get<double>();
      } else if (key == "rubric_samples") {
        if (value.is_string() && value.get<std::string>() == "auto")
          cfg.rubric_samples.reset();
        else
          cfg.rubric_samples = value.get<std::size_t>();
      } else if (key == "scoring_cap") {
        cfg.scoring_cap = value.get<std::size_t>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::int64_t>();
      } else if (key == "prompts") {
        cfg.prompts = value.get<std::string>();
      } else if (key == "variant") {
        const auto v = value.get<std::string>();
        if (v == "debiased")
          cfg.variant = LensVariant::debiased;
        else if (v == "biased")
          cfg.variant = LensVariant::biased;
        else
          throw ConfigError(fmt::format("lens variant must be 'debiased' or 'biased', got '{}'", v));
      } else {
        throw ConfigError(fmt::format("unknown lens key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("lens config: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const LensResult& result) {
  json grades = json::array();
  for (std::size_t i = 0; i < result.grid.grades.size(); ++i) {
    json row{{"id", result.sample_ids.at(i)}, {"p_hat", result.per_sample.at(i)}};
    for (std::size_t p = 0; p < 4; ++p) row[std::string(kPermNames[p])] = result.grid.grades[i][p];
    grades.push_back(std::move(row));
  }
  json baselines = json::object();
  for (std::size_t p = 0; p < 4; ++p) baselines[std::string(kPermNames[p])] = result.grid.baselines[p];
  return {{"dataset", result.dataset},
          {"variant", std::string(to_string(result.variant))},
          {"score", result.score},
          {"epsilon", result.grid.epsilon},
          {"baselines", std::move(baselines)},
          {"samples", std::move(grades)},
          {"rubric", to_json(result.rubric)},
          {"diagnostics",
           {{"fallback_judgements", result.diagnostics.fallback_judgements},
            {"clarification_retries", result.diagnostics.clarification_retries},
            {"rubric_retries", result.diagnostics.rubric_retries},
            {"llm_calls", result.diagnostics.llm_calls}}}};
}

// ---------------------------------------------------------------------------

Rubric compile_rubric(const RecordSet& Us, const RecordSet& Ur, LlmClient& llm, std::size_t num_points,
                      const PromptSet& prompts, LensDiagnostics* diag) {
  if (Us.empty() || Ur.empty()) throw DataError("rubric compilation needs non-empty real and synthetic samples");
  if (Us.size() != Ur.size())
    throw DataError(fmt::format("rubric compilation needs equal sample counts, got {} synthetic and {} real",
                                Us.size(), Ur.size()));
  if (num_points < 1) throw ConfigError("rubric num_points must be at least 1");
  Counters counters;
  const std::string real = format_samples(Ur), syn = format_samples(Us), num = std::to_string(num_points);

  Rubric rubric;
  rubric.num_points = num_points;
  rubric.commonalities = ask_for_list(
      llm, render_template(prompts.rubric_common, {{"num", num}, {"A", real}, {"B", syn}, {"feedback", "similar to"}}),
      num_points, counters, "commonalities");
  const std::string similar = format_points(rubric.commonalities);
  const auto diff_prompt = [&](const std::string& a, const std::string& b) {
    return render_template(prompts.rubric_diff, {{"num", num},
                                                 {"feedback", "different from"},
                                                 {"similar_points", similar},
                                                 {"A", a},
                                                 {"B", b}});
  };
  rubric.diff_syn_from_real = ask_for_list(llm, diff_prompt(real, syn), num_points, counters, "C_sr");
  rubric.diff_real_from_syn = ask_for_list(llm, diff_prompt(syn, real), num_points, counters, "C_rs");
  counters.flush(diag);
  return rubric;
}

std::string render_scorer_prompt(const Record& x, const Rubric& rubric, PredictedLabel label, RubricOrder order,
                                 const PromptSet& prompts) {
  // Under C_sr dataset A is the real pool; under C_rs the roles are swapped.
  const bool real_is_a = order == RubricOrder::sr;
  const bool predict_a = (label == PredictedLabel::real) == real_is_a;
  const auto& diffs = order == RubricOrder::sr ? rubric.diff_syn_from_real : rubric.diff_real_from_syn;
  return render_template(prompts.scorer, {{"prediction", predict_a ? "A" : "B"},
                                          {"similar_characteristics", format_points(rubric.commonalities)},
                                          {"differences", format_points(diffs)},
                                          {"example", x.payload}});
}

int score_permutation(const Record& x, const Rubric& rubric, PredictedLabel label, RubricOrder order,
                      LlmClient& llm, const PromptSet& prompts, LensDiagnostics* diag) {
  rubric.validate();
  Counters counters;
  const int g = grade(x, rubric, label, order, llm, prompts, counters);
  counters.flush(diag);
  return g;
}

namespace {

std::vector<std::array<double, 4>> grade_all(const RecordSet& set, const Rubric& rubric, LlmClient& llm,
                                             const PromptSet& prompts, Counters& counters) {
  std::vector<std::array<double, 4>> grid(set.size());
  parallel_for(set.size() * 4, llm.max_in_flight(), [&](std::size_t t) {
    const std::size_t i = t / 4, p = t % 4;
    const auto order = p < 2 ? RubricOrder::sr : RubricOrder::rs;
    const auto label = p % 2 == 0 ? PredictedLabel::real : PredictedLabel::synthetic;
    grid[i][p] = grade(set.records[i], rubric, label, order, llm, prompts, counters);
  });
  return grid;
}

}  // namespace

ScoreGrid compute_baselines(const RecordSet& Ur, const Rubric& rubric, LlmClient& llm, const PromptSet& prompts,
                            double epsilon, LensDiagnostics* diag) {
  if (Ur.empty()) throw DataError("baselines need at least one real sample");
  if (!(epsilon > 0.0)) throw ConfigError("lens epsilon must be positive");
  rubric.validate();
  Counters counters;
  const auto grades = grade_all(Ur, rubric, llm, prompts, counters);
  counters.flush(diag);
  ScoreGrid grid;
  grid.epsilon = epsilon;
  for (std::size_t p = 0; p < 4; ++p) {
    double sum = 0.0;
    for (const auto& row : grades) sum += row[p];
    grid.baselines[p] = sum / static_cast<double>(grades.size());
  }
  return grid;
}

std::vector<double> debias(const ScoreGrid& grid) {
  if (!(grid.epsilon > 0.0)) throw std::invalid_argument("debias: epsilon must be positive");
  const double eps = grid.epsilon;
  std::vector<double> out;
  out.reserve(grid.grades.size());
  for (const auto& g : grid.grades) {
    std::array<double, 4> h{};
    for (std::size_t p = 0; p < 4; ++p) h[p] = g[p] / std::max(eps, grid.baselines[p]);
    const double p_sr = h[real_sr] / (h[real_sr] + h[syn_sr] + eps);
    const double p_rs = h[real_rs] / (h[real_rs] + h[syn_rs] + eps);
    out.push_back(0.5 * (p_sr + p_rs));
  }
  return out;
}

LensResult lens_score(const RecordSet& Ds, const RecordSet& Ur, LlmClient& rubric_llm, LlmClient& scoring_llm,
                      const LensConfig& cfg) {
  cfg.validate();
  if (Ds.empty()) throw DataError(fmt::format("synthetic set '{}' is empty", Ds.name));
  if (Ur.empty()) throw DataError("real pool is empty");
  const auto& prompts = prompt_set(cfg.prompts);

  LensResult result;
  result.dataset = Ds.name;
  result.variant = cfg.variant;

  const std::size_t r = std::min({cfg.rubric_samples.value_or(30), Ds.size(), Ur.size()});
  result.rubric = compile_rubric(subsample(Ds, r, cfg.seed), subsample(Ur, r, cfg.seed), rubric_llm,
                                 cfg.num_points, prompts, &result.diagnostics);

  result.grid = compute_baselines(Ur, result.rubric, scoring_llm, prompts, cfg.epsilon, &result.diagnostics);
  const RecordSet scored = Ds.size() > cfg.scoring_cap ? subsample(Ds, cfg.scoring_cap, cfg.seed + 1) : Ds;
  Counters counters;
  result.grid.grades = grade_all(scored, result.rubric, scoring_llm, prompts, counters);
  counters.flush(&result.diagnostics);
  for (const auto& rec : scored.records) result.sample_ids.push_back(rec.id);

  if (cfg.variant == LensVariant::debiased) {
    result.per_sample = debias(result.grid);
  } else {
    for (const auto& g : result.grid.grades) result.per_sample.push_back(g[real_sr] / 4.0);
  }
  result.score = std::accumulate(result.per_sample.begin(), result.per_sample.end(), 0.0) /
                 static_cast<double>(result.per_sample.size());
  return result;
}

ProxyScore to_proxy_score(const LensResult& result, const LensConfig& cfg) {
  return make_score(Metric::lens, result.score,
                    {{"variant", std::string(to_string(cfg.variant))},
                     {"prompts", cfg.prompts},
                     {"num_points", std::to_string(cfg.num_points)},
                     {"epsilon", fmt::format("{}", cfg.epsilon)},
                     {"seed", std::to_string(cfg.seed)},
                     {"n_scored", std::to_string(result.per_sample.size())},
                     {"fallback_judgements", std::to_string(result.diagnostics.fallback_judgements)}});
}

}  // namespace synque
