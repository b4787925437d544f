#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synque {

enum class SetKind { real, synthetic };
enum class RecordFormat { jsonl, csv };

struct Record {
  std::string id;
  std::string payload;
};

/// An ordered collection of raw samples: one synthetic dataset or the real pool.
/// Labels are never housed here; no proxy is allowed to read them.
struct RecordSet {
  std::string name;
  std::vector<Record> records;
  SetKind kind = SetKind::synthetic;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  // Throws DataError on duplicate ids or blank payloads.
  void validate() const;
  RecordSet select(std::span<const std::size_t> indices) const;
};

/// Row-aligned dense vectors for a RecordSet. Row i belongs to ids()[i].
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Validates: ids.size() == rows, unique ids, finite entries, at least one column.
  EmbeddingMatrix(std::vector<std::string> ids, Eigen::MatrixXd data);

  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }

  EmbeddingMatrix select(std::span<const std::size_t> indices) const;
  // Reorders rows to follow the record order of `set`; every record must have a row.
  EmbeddingMatrix aligned_to(const RecordSet& set) const;

 private:
  std::vector<std::string> ids_;
  Eigen::MatrixXd data_;
};

/// Records plus their embeddings, kept in the same row order.
struct Dataset {
  RecordSet records;
  EmbeddingMatrix embeddings;

  const std::string& name() const { return records.name; }
  Dataset select(std::span<const std::size_t> indices) const;
};

RecordSet load_records(const std::filesystem::path& path, RecordFormat format, SetKind kind,
                       std::string name = {});
RecordFormat record_format_from_path(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const RecordSet& set,
                  RecordFormat format = RecordFormat::jsonl);

// RFC 4180 reader; blank lines are skipped, the header (if any) is the first row.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix);

// Uniform sample of m indices out of n without replacement (partial Fisher-Yates over Rng).
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t m, std::int64_t seed);
RecordSet subsample(const RecordSet& set, std::size_t m, std::int64_t seed);
Dataset subsample(const Dataset& set, std::size_t m, std::int64_t seed);

}  // namespace synque
