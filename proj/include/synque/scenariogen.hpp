#pragma once

#include "synque/ingest.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace synque {

enum class ShiftKind { mean_shift, scale, mode_drop };

std::string_view to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(std::string_view name);

struct CandidateSpec {
  std::string name;
  ShiftKind kind = ShiftKind::mean_shift;
  // mean_shift: offset along e1; scale: coordinate multiplier; mode_drop: fraction of the
  // x1 > 0 half rejected. The untouched distribution is magnitude 0, except scale where it is 1.
  double magnitude = 0.0;
  std::size_t n = 500;
};

struct ScenarioSpec {
  std::size_t dim = 8;
  std::size_t n_real = 500;
  std::vector<CandidateSpec> candidates;
  std::int64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_spec_from_json(const nlohmann::json& j);

// Distance of a candidate from the real distribution: magnitude for mean_shift and
// mode_drop, |ln magnitude| for scale.
double distortion(const CandidateSpec& c);

struct Scenario {
  Dataset real;
  std::vector<Dataset> candidates;          // spec order
  std::vector<std::string> planted_order;   // best first: ascending distortion, ties by name
  std::map<std::string, double> distortion;
};

/// Real rows are standard Gaussian draws from Rng(seed, 0); candidate i draws from
/// Rng(seed, i + 1). Coordinates are generated in row-major order through Rng::normal().
/// Payloads read "point <k>: x1=+0.1234 x2=-1.0000 ..." with four decimals.
Scenario generate(const ScenarioSpec& spec);

/// Writes real.{records,embeddings}.jsonl, <name>.{records,embeddings}.jsonl,
/// performance.csv (performance = -distortion), planted_order.json, spec.json and a run
/// config.json wired to those files.
void write_scenario(const Scenario& scenario, const ScenarioSpec& spec, const std::filesystem::path& dir);

}  // namespace synque
