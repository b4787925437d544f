#pragma once

#include "synque/ingest.hpp"
#include "synque/llmclient.hpp"
#include "synque/repmetrics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synque {

struct Rubric {
  std::vector<std::string> commonalities;       // C
  std::vector<std::string> diff_syn_from_real;  // C_sr: how synthetic differs from real
  std::vector<std::string> diff_real_from_syn;  // C_rs: how real differs from synthetic
  std::size_t num_points = 10;

  void validate() const;
};

nlohmann::json to_json(const Rubric& rubric);
Rubric rubric_from_json(const nlohmann::json& j);

enum class PredictedLabel { real, synthetic };
enum class RubricOrder { sr, rs };

// Grid column order.
enum Perm : std::size_t { real_sr = 0, syn_sr = 1, real_rs = 2, syn_rs = 3 };
inline constexpr std::array<std::string_view, 4> kPermNames = {"real|C_sr", "syn|C_sr", "real|C_rs", "syn|C_rs"};
constexpr Perm perm_of(PredictedLabel label, RubricOrder order) {
  return static_cast<Perm>((order == RubricOrder::rs ? 2 : 0) + (label == PredictedLabel::synthetic ? 1 : 0));
}

// ---------------------------------------------------------------------------
// Prompt templates

struct PromptSet {
  std::string name;
  std::string rubric_common;  // ${num} ${A} ${B} [${feedback}]
  std::string rubric_diff;    // ${num} ${feedback} ${similar_points} ${A} ${B}
  std::string scorer;         // ${prediction} ${similar_characteristics} ${differences} ${example}
};

// Shipped sets: "generic", "sentiment", "text2sql".
const PromptSet& prompt_set(std::string_view name);
std::vector<std::string> prompt_set_names();

// Replaces every ${name}; substituted text is not rescanned. Unknown names throw
// std::invalid_argument.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

std::string format_samples(const RecordSet& set);
std::string format_points(const std::vector<std::string>& points);

// ---------------------------------------------------------------------------

enum class LensVariant { debiased, biased };

struct LensConfig {
  std::size_t num_points = 10;
  double epsilon = 1e-6;
  std::optional<std::size_t> rubric_samples;  // nullopt = min(|Ds|, |Ur|, 30)
  std::size_t scoring_cap = 1000;             // synthetic samples scored; seeded subsample above it
  std::int64_t seed = 0;
  std::string prompts = "generic";
  LensVariant variant = LensVariant::debiased;

  void validate() const;
};

nlohmann::json to_json(const LensConfig& cfg);
LensConfig lens_config_from_json(const nlohmann::json& j);

struct LensDiagnostics {
  std::size_t fallback_judgements = 0;    // still unparseable after the clarification retry; graded 2
  std::size_t clarification_retries = 0;
  std::size_t rubric_retries = 0;
  std::size_t llm_calls = 0;
};

struct ScoreGrid {
  std::vector<std::array<double, 4>> grades;  // per synthetic sample, columns in Perm order
  std::array<double, 4> baselines{};          // z per permutation
  double epsilon = 1e-6;
};

struct LensResult {
  std::string dataset;
  LensVariant variant = LensVariant::debiased;
  double score = 0.0;
  std::vector<std::string> sample_ids;
  std::vector<double> per_sample;
  LensDiagnostics diagnostics;
  Rubric rubric;
  ScoreGrid grid;
};

nlohmann::json to_json(const LensResult& result);

// Three calls: C with A = real, B = synthetic; C_sr likewise; C_rs with A = synthetic,
// B = real. Each reply is parsed as a JSON list of strings, retried once, then truncated.
Rubric compile_rubric(const RecordSet& Us, const RecordSet& Ur, LlmClient& llm, std::size_t num_points,
                      const PromptSet& prompts, LensDiagnostics* diag = nullptr);

std::string render_scorer_prompt(const Record& x, const Rubric& rubric, PredictedLabel label, RubricOrder order,
                                 const PromptSet& prompts);

// Grade 0..4; an unparseable reply gets one clarification retry, then counts as 2.
int score_permutation(const Record& x, const Rubric& rubric, PredictedLabel label, RubricOrder order,
                      LlmClient& llm, const PromptSet& prompts, LensDiagnostics* diag = nullptr);

// z[perm] = mean grade of the real samples; grades are left empty.
ScoreGrid compute_baselines(const RecordSet& Ur, const Rubric& rubric, LlmClient& llm, const PromptSet& prompts,
                            double epsilon, LensDiagnostics* diag = nullptr);

// h = g / max(eps, z); p_o = h_r / (h_r + h_s + eps); p-hat = (p_sr + p_rs) / 2.
std::vector<double> debias(const ScoreGrid& grid);

LensResult lens_score(const RecordSet& Ds, const RecordSet& Ur, LlmClient& rubric_llm, LlmClient& scoring_llm,
                      const LensConfig& cfg);

ProxyScore to_proxy_score(const LensResult& result, const LensConfig& cfg);

}  // namespace synque
