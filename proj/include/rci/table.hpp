#pragma once
// Table and QA-instance data model, dataset ingestion, weak supervision
// and row downsampling.
//
// All indices in this module are 1-based, including the ones that appear in
// dataset files.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rci {

struct CellCoord {
  int row = 1;
  int col = 1;

  auto operator<=>(const CellCoord&) const = default;
};

class Table {
 public:
  Table() = default;
  // Throws ValidationError if the grid is empty or ragged.
  Table(std::string id, std::vector<std::string> header,
        std::vector<std::vector<std::string>> rows);

  const std::string& id() const noexcept { return id_; }
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept {
    return rows_;
  }

  int num_rows() const noexcept { return static_cast<int>(rows_.size()); }
  int num_cols() const noexcept { return static_cast<int>(header_.size()); }

  // 1-based accessors; throw std::out_of_range.
  const std::string& header_at(int col) const;
  const std::string& cell(int row, int col) const;
  const std::string& cell(CellCoord c) const { return cell(c.row, c.col); }
  bool contains(CellCoord c) const noexcept {
    return c.row >= 1 && c.row <= num_rows() && c.col >= 1 &&
           c.col <= num_cols();
  }

  bool operator==(const Table&) const = default;

 private:
  std::string id_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

enum class AggType : std::uint8_t { kLookup, kMax, kMin, kCount, kSum, kAverage };
inline constexpr int kNumAggTypes = 6;

std::string_view agg_name(AggType t);
// Throws ValidationError on an unknown label.
AggType parse_agg(std::string_view name);

struct QAInstance {
  std::string qid;
  std::string question;
  std::string table_id;
  std::vector<std::string> answers;
  std::optional<AggType> agg;
  std::optional<std::set<CellCoord>> targets;
};

struct RowColTargets {
  std::set<int> rows;
  std::set<int> cols;
};

enum class TableFormat { kJsonl, kCsv };

// Tables file. For jsonl: one {id, header, rows} record per line (blank lines
// skipped). For csv: a single table whose first record is the header and
// whose id is the file stem.
std::vector<Table> parse_table_file(const std::filesystem::path& path,
                                    TableFormat format);
std::vector<Table> parse_tables_jsonl(std::string_view text);
Table parse_table_csv(std::string_view text, std::string id);

// Questions file: one {qid, table_id, question, answers, agg?, targets?}
// record per line.
std::vector<QAInstance> parse_questions_file(const std::filesystem::path& path);
std::vector<QAInstance> parse_questions_jsonl(std::string_view text);

std::string table_to_jsonl(const Table& t);
std::string question_to_jsonl(const QAInstance& q);

// Checks that every target of `q` lies inside `t`; throws ValidationError.
void validate_instance(const QAInstance& q, const Table& t);

struct MatchOptions {
  bool case_fold = true;
  bool trim = true;
};

std::string normalize_answer(std::string_view text, const MatchOptions& opts = {});

// Every cell whose normalized text equals a normalized answer, in row-major
// order. Returns an empty set when nothing matches.
std::set<CellCoord> weak_supervise(const std::vector<std::string>& answers,
                                   const Table& table,
                                   const MatchOptions& opts = {});

// Row and column projections of a non-empty target set.
RowColTargets derive_targets(const std::set<CellCoord>& targets);

// Keeps every row in `keep` plus a seeded uniform sample of the others so the
// result has min(m, max_rows) rows in their original order. Row indices of
// the result are renumbered; `kept_rows` (if given) receives the original
// index of each output row.
Table downsample_rows(const Table& table, const std::set<int>& keep,
                      int max_rows, std::uint64_t seed,
                      std::vector<int>* kept_rows = nullptr);

}  // namespace rci
