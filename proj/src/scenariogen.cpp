#include "synque/scenariogen.hpp"

#include "synque/errors.hpp"
#include "synque/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace synque {

using json = nlohmann::json;

std::string_view to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::mean_shift: return "mean_shift";
    case ShiftKind::scale: return "scale";
    case ShiftKind::mode_drop: return "mode_drop";
  }
  return "?";
}

ShiftKind shift_kind_from_string(std::string_view name) {
  if (name == "mean_shift") return ShiftKind::mean_shift;
  if (name == "scale") return ShiftKind::scale;
  if (name == "mode_drop") return ShiftKind::mode_drop;
  throw ConfigError(fmt::format("unknown shift_kind '{}' (valid: mean_shift, scale, mode_drop)", name));
}

void ScenarioSpec::validate() const {
  if (dim < 1) throw ConfigError("scenario dim must be at least 1");
  if (n_real < 1) throw ConfigError("scenario n_real must be at least 1");
  std::set<std::string> names{"real"};
  for (const auto& c : candidates) {
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
      throw ConfigError(fmt::format("candidate name '{}' is not a plain file stem", c.name));
    if (!names.insert(c.name).second) throw ConfigError(fmt::format("candidate name '{}' is not unique", c.name));
    if (c.n < 1) throw ConfigError(fmt::format("candidate '{}' needs n >= 1", c.name));
    if (!(c.magnitude >= 0.0) || !std::isfinite(c.magnitude))
      throw ConfigError(fmt::format("candidate '{}' magnitude must be finite and >= 0", c.name));
    if (c.kind == ShiftKind::scale && c.magnitude == 0.0)
      throw ConfigError(fmt::format("candidate '{}': scale magnitude must be positive", c.name));
    if (c.kind == ShiftKind::mode_drop && c.magnitude > 1.0)
      throw ConfigError(fmt::format("candidate '{}': mode_drop magnitude is a fraction in [0, 1]", c.name));
  }
}

nlohmann::json to_json(const ScenarioSpec& spec) {
  json cands = json::array();
  for (const auto& c : spec.candidates)
    cands.push_back({{"name", c.name}, {"shift_kind", std::string(to_string(c.kind))}, {"magnitude", c.magnitude},
                     {"n", c.n}});
  return {{"dim", spec.dim}, {"n_real", spec.n_real}, {"seed", spec.seed}, {"candidates", std::move(cands)}};
}

ScenarioSpec scenario_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario spec must be a JSON object");
  ScenarioSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "dim") {
        spec.dim = value.get<std::size_t>();
      } else if (key == "n_real") {
        spec.n_real = value.get<std::size_t>();
      } else if (key == "seed") {
        spec.seed = value.get<std::int64_t>();
      } else if (key == "candidates") {
        for (const auto& c : value) {
          CandidateSpec cand;
          for (const auto& [ck, cv] : c.items()) {
            if (ck == "name")
              cand.name = cv.get<std::string>();
            else if (ck == "shift_kind")
              cand.kind = shift_kind_from_string(cv.get<std::string>());
            else if (ck == "magnitude")
              cand.magnitude = cv.get<double>();
            else if (ck == "n")
              cand.n = cv.get<std::size_t>();
            else
              throw ConfigError(fmt::format("unknown candidate key '{}'", ck));
          }
          spec.candidates.push_back(std::move(cand));
        }
      } else {
        throw ConfigError(fmt::format("unknown scenario key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario spec: {}", e.what()));
  }
  spec.validate();
  return spec;
}

double distortion(const CandidateSpec& c) {
  return c.kind == ShiftKind::scale ? std::abs(std::log(c.magnitude)) : c.magnitude;
}

namespace {

Dataset make_dataset(const std::string& name, SetKind kind, const Eigen::MatrixXd& X) {
  Dataset ds;
  ds.records.name = name;
  ds.records.kind = kind;
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::string id = fmt::format("{}-{:05d}", name, i);
    std::string text = fmt::format("point {}:", i);
    for (Eigen::Index c = 0; c < X.cols(); ++c) text += fmt::format(" x{}={:+.4f}", c + 1, X(i, c));
    ds.records.records.push_back({id, std::move(text)});
    ids.push_back(std::move(id));
  }
  ds.embeddings = EmbeddingMatrix(std::move(ids), X);
  return ds;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
}

}  // namespace

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto seed = static_cast<std::uint64_t>(spec.seed);
  Scenario out;

  Rng real_rng(seed, 0);
  Eigen::MatrixXd R(static_cast<Eigen::Index>(spec.n_real), d);
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    for (Eigen::Index c = 0; c < d; ++c) R(i, c) = real_rng.normal();
  out.real = make_dataset("real", SetKind::real, R);

  for (std::size_t k = 0; k < spec.candidates.size(); ++k) {
    const auto& cand = spec.candidates[k];
    Rng rng(seed, k + 1);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(cand.n), d);
    Eigen::RowVectorXd row(d);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (;;) {
        for (Eigen::Index c = 0; c < d; ++c) row(c) = rng.normal();
        if (cand.kind != ShiftKind::mode_drop || row(0) <= 0.0) break;
        // rejection on the x1 > 0 component; magnitude 1 removes it entirely
        if (cand.magnitude == 0.0 || rng.uniform() >= cand.magnitude) break;
      }
      if (cand.kind == ShiftKind::mean_shift) row(0) += cand.magnitude;
      if (cand.kind == ShiftKind::scale) row *= cand.magnitude;
      X.row(i) = row;
    }
    out.candidates.push_back(make_dataset(cand.name, SetKind::synthetic, X));
    out.distortion[cand.name] = distortion(cand);
    out.planted_order.push_back(cand.name);
  }
  std::stable_sort(out.planted_order.begin(), out.planted_order.end(), [&](const auto& a, const auto& b) {
    const double da = out.distortion.at(a), db = out.distortion.at(b);
    return da != db ? da < db : a < b;
  });
  return out;
}

void write_scenario(const Scenario& scenario, const ScenarioSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write_ds = [&](const Dataset& ds) {
    save_records(dir / (ds.name() + ".records.jsonl"), ds.records);
    save_embeddings(dir / (ds.name() + ".embeddings.jsonl"), ds.embeddings);
  };
  write_ds(scenario.real);
  json datasets = json::array();
  std::string perf = "dataset,performance\n";
  for (const auto& ds : scenario.candidates) {
    write_ds(ds);
    datasets.push_back({{"name", ds.name()},
                        {"records", ds.name() + ".records.jsonl"},
                        {"embeddings", ds.name() + ".embeddings.jsonl"}});
    perf += fmt::format("{},{}\n", ds.name(), -scenario.distortion.at(ds.name()) + 0.0);
  }
  write_text(dir / "performance.csv", perf);
  write_text(dir / "planted_order.json", json(scenario.planted_order).dump(2) + "\n");
  write_text(dir / "spec.json", to_json(spec).dump(2) + "\n");
  const json config{{"datasets", std::move(datasets)},
                    {"real_pool", {{"records", "real.records.jsonl"}, {"embeddings", "real.embeddings.jsonl"}}},
                    {"metrics", {"mmd2", "mdm", "pad", "mauve"}},
                    {"seeds", {0, 1, 2, 3, 4}},
                    {"m_r", std::min<std::size_t>(30, spec.n_real)},
                    {"k", std::min<std::size_t>(3, std::max<std::size_t>(1, spec.candidates.size()))},
                    {"performance", "performance.csv"},
                    {"output", {{"json", "report.json"}, {"markdown", "report.md"}}}};
  write_text(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace synque
