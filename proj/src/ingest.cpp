#include "synque/ingest.hpp"

#include "synque/errors.hpp"
#include "synque/rng.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace synque {

using json = nlohmann::json;

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string id_from_json(const json& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw DataError(fmt::format("{}: \"id\" must be a string", where));
}

std::vector<Record> read_jsonl_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Record> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (is_blank(line)) continue;
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("{}: invalid JSON ({})", where, e.what()));
    }
    if (!row.is_object() || !row.contains("id") || !row.contains("text") ||
        !row["text"].is_string())
      throw DataError(fmt::format("{}: expected {{\"id\": ..., \"text\": ...}}", where));
    out.push_back({id_from_json(row["id"], where), row["text"].get<std::string>()});
  }
  return out;
}

// RFC 4180: quoted fields may contain separators, doubled quotes and newlines.
struct CsvReader {
  std::istream& in;
  std::string source;
  std::size_t line = 1;

  // Returns false at end of input. `start_line` receives the line the row began on.
  bool next_row(std::vector<std::string>& fields, std::size_t& start_line) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    start_line = line;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (;;) {
      const int c = in.get();
      if (c == std::char_traits<char>::eof()) {
        if (quoted) throw DataError(fmt::format("{}:{}: unterminated quoted field", source, start_line));
        fields.push_back(std::move(field));
        return true;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in.peek() == '"') {
            in.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++line;
          field.push_back(ch);
        }
        continue;
      }
      switch (ch) {
        case '"':
          if (!field.empty() || was_quoted)
            throw DataError(fmt::format("{}:{}: stray quote in field", source, line));
          quoted = was_quoted = true;
          break;
        case ',':
          fields.push_back(std::move(field));
          field.clear();
          was_quoted = false;
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          fields.push_back(std::move(field));
          return true;
        default:
          field.push_back(ch);
      }
    }
  }
};

std::vector<Record> read_csv_records(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) return {};
  const auto& header = rows.front().fields;
  auto column = [&](const char* name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError(fmt::format("{}:1: header must contain \"id\" and \"text\" columns", path.string()));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column("id");
  const std::size_t text_col = column("text");

  std::vector<Record> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].fields.size() != header.size())
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), rows[r].line,
                                  header.size(), rows[r].fields.size()));
    out.push_back({rows[r].fields[id_col], rows[r].fields[text_col]});
  }
  return out;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  CsvReader reader{in, path.string()};
  std::vector<CsvRow> rows;
  CsvRow row;
  while (reader.next_row(row.fields, row.line)) {
    if (row.fields.size() == 1 && row.fields[0].empty()) continue;
    rows.push_back(row);
  }
  return rows;
}

void RecordSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second)
      throw DataError(fmt::format("record set '{}': duplicate id \"{}\"", name, r.id));
    if (is_blank(r.payload))
      throw DataError(fmt::format("record set '{}': record \"{}\" has an empty payload", name, r.id));
  }
}

RecordSet RecordSet::select(std::span<const std::size_t> indices) const {
  RecordSet out{name, {}, kind};
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, Eigen::MatrixXd data)
    : ids_(std::move(ids)), data_(std::move(data)) {
  if (static_cast<Eigen::Index>(ids_.size()) != data_.rows())
    throw DataError(fmt::format("embedding matrix: {} ids for {} rows", ids_.size(), data_.rows()));
  if (data_.cols() < 1) throw DataError("embedding matrix: dimension must be positive");
  if (!data_.allFinite()) throw DataError("embedding matrix: non-finite entry");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_)
    if (!seen.insert(id).second)
      throw DataError(fmt::format("embedding matrix: duplicate id \"{}\"", id));
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::size_t> indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), dim());
  std::vector<std::string> out_ids;
  out_ids.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = data_.row(static_cast<Eigen::Index>(indices[r]));
    out_ids.push_back(ids_.at(indices[r]));
  }
  return EmbeddingMatrix(std::move(out_ids), std::move(out));
}

EmbeddingMatrix EmbeddingMatrix::aligned_to(const RecordSet& set) const {
  std::unordered_map<std::string, std::size_t> row_of;
  row_of.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) row_of.emplace(ids_[i], i);
  std::vector<std::size_t> order;
  order.reserve(set.size());
  for (const auto& r : set.records) {
    const auto it = row_of.find(r.id);
    if (it == row_of.end())
      throw DataError(fmt::format("record set '{}': no embedding for id \"{}\"", set.name, r.id));
    order.push_back(it->second);
  }
  return select(order);
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  if (embeddings.rows() == 0) return {records.select(indices), {}};
  return {records.select(indices), embeddings.select(indices)};
}

RecordFormat record_format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? RecordFormat::csv : RecordFormat::jsonl;
}

RecordSet load_records(const std::filesystem::path& path, RecordFormat format, SetKind kind,
                       std::string name) {
  RecordSet set;
  set.name = name.empty() ? path.stem().string() : std::move(name);
  set.kind = kind;
  set.records = format == RecordFormat::csv ? read_csv_records(path) : read_jsonl_records(path);
  if (set.records.empty()) throw DataError(fmt::format("{}: no records", path.string()));
  set.validate();
  return set;
}

void save_records(const std::filesystem::path& path, const RecordSet& set, RecordFormat format) {
  auto out = open_output(path);
  if (format == RecordFormat::csv) {
    out << "id,text\n";
    for (const auto& r : set.records) out << csv_quote(r.id) << ',' << csv_quote(r.payload) << '\n';
  } else {
    for (const auto& r : set.records) out << json{{"id", r.id}, {"text", r.payload}}.dump() << '\n';
  }
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    strip_cr(line);
    if (is_blank(line)) continue;
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("{}: invalid JSON ({})", where, e.what()));
    }
    if (!row.is_object() || !row.contains("id") || !row.contains("embedding") ||
        !row["embedding"].is_array())
      throw DataError(fmt::format("{}: expected {{\"id\": ..., \"embedding\": [...]}}", where));
    const auto& vec = row["embedding"];
    if (vec.empty()) throw DataError(fmt::format("{}: empty embedding", where));
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim)
      throw DataError(fmt::format("{}: ragged dimension {} (expected {})", where, vec.size(), dim));
    for (const auto& v : vec) {
      // JSON has no NaN/Inf literals; writers that emit "NaN" strings fail here.
      if (!v.is_number()) throw DataError(fmt::format("{}: non-finite or non-numeric entry", where));
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError(fmt::format("{}: non-finite entry", where));
      values.push_back(x);
    }
    ids.push_back(id_from_json(row["id"], where));
  }
  if (ids.empty()) throw DataError(fmt::format("{}: no embeddings", path.string()));
  Eigen::MatrixXd data(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c)
      data(r, c) = values[static_cast<std::size_t>(r) * dim + static_cast<std::size_t>(c)];
  try {
    return EmbeddingMatrix(std::move(ids), std::move(data));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
  auto out = open_output(path);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    json vec = json::array();
    for (Eigen::Index c = 0; c < matrix.dim(); ++c) vec.push_back(matrix.data()(r, c));
    out << json{{"id", matrix.ids()[static_cast<std::size_t>(r)]}, {"embedding", std::move(vec)}}.dump()
        << '\n';
  }
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t m, std::int64_t seed) {
  if (m > n) throw std::invalid_argument(fmt::format("subsample of {} from a set of {}", m, n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(static_cast<std::uint64_t>(seed));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

RecordSet subsample(const RecordSet& set, std::size_t m, std::int64_t seed) {
  return set.select(subsample_indices(set.size(), m, seed));
}

Dataset subsample(const Dataset& set, std::size_t m, std::int64_t seed) {
  return set.select(subsample_indices(set.records.size(), m, seed));
}

}  // namespace synque
