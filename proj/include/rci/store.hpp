#pragma once
// Query-independent column vectors for the representation model, persisted in
// an index keyed by the model's content hash.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rci/classifiers.hpp"
#include "rci/scorer.hpp"
#include "rci/serialize.hpp"
#include "rci/table.hpp"

namespace rci {

using Fingerprint = std::array<std::uint8_t, 32>;

// SHA-256 of the model's checkpoint bytes.
Fingerprint model_fingerprint(const ClassifierModel& model);
std::string fingerprint_hex(const Fingerprint& fp);

struct IndexedTable {
  std::string table_id;
  SerializationMode mode = SerializationMode::kDelimited;
  int n_cols = 0;
  int n_rows = 0;               // rows materialized (0 unless requested)
  std::vector<float> columns;   // n_cols x d, row-major
  std::vector<float> rows;      // n_rows x d, row-major
};

// File layout: magic "RCIX", version byte, 32-byte model fingerprint, d_model
// (u32), table count (u32), directory of (id, column count, row count, mode
// byte, byte offset), then the vectors as little-endian float32.
class EmbeddingIndex {
 public:
  static constexpr std::uint8_t kVersion = 1;

  EmbeddingIndex() = default;
  EmbeddingIndex(Fingerprint fingerprint, int d_model, std::vector<IndexedTable> tables);

  const Fingerprint& fingerprint() const noexcept { return fingerprint_; }
  int d_model() const noexcept { return d_model_; }
  const std::vector<IndexedTable>& tables() const noexcept { return tables_; }
  std::size_t vector_count() const noexcept;

  // Throws NotFoundError.
  const IndexedTable& table(const std::string& id) const;
  bool contains(const std::string& id) const { return by_id_.count(id) > 0; }
  std::span<const float> column_vector(const IndexedTable& t, int col) const;

  std::vector<std::uint8_t> to_bytes() const;
  static EmbeddingIndex from_bytes(std::span<const std::uint8_t> bytes);
  // Writes a temporary file and renames it into place.
  void save(const std::string& path) const;
  static EmbeddingIndex load(const std::string& path);

 private:
  Fingerprint fingerprint_{};
  int d_model_ = 0;
  std::vector<IndexedTable> tables_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct MaterializeOptions {
  SerializationMode mode = SerializationMode::kDelimited;
  bool include_rows = false;
};

// CLS vector of every column sequence (and optionally row sequence) of every
// table. Throws ValidationError for an empty collection or a non
// representation model.
EmbeddingIndex materialize(const std::vector<Table>& tables, const ClassifierModel& column_model,
                           const MaterializeOptions& options = {});

// Column probabilities from cached vectors: one encoder call for the question.
// Throws StaleIndexError when the index was built from another model and
// NotFoundError for an unknown table id. `fingerprint` skips rehashing the
// model when supplied.
std::vector<double> query_with_store(std::string_view question, const std::string& table_id,
                                     const EmbeddingIndex& index, const ClassifierModel& model,
                                     const std::optional<Fingerprint>& fingerprint = {});

// Rows online through the bundle's row model, columns from the index.
class IndexedScorer : public TableScorer {
 public:
  // Throws StaleIndexError if the index does not belong to bundle.column.
  IndexedScorer(const RciModelBundle& bundle, const EmbeddingIndex& index);
  AxisProbs score(std::string_view question, const Table& table) const override;

 private:
  const RciModelBundle& bundle_;
  const EmbeddingIndex& index_;
  Fingerprint fingerprint_;
};

}  // namespace rci
