#pragma once
// Question-type classification and threshold-based aggregation over cell
// confidences.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rci/classifiers.hpp"
#include "rci/rci.hpp"
#include "rci/table.hpp"

namespace rci {

inline constexpr double kDefaultTau = 0.5;

using AggDistribution = std::array<double, kNumAggTypes>;

// Softmax over the six aggregation types for (question, header), where the
// header is serialized with the column header delimiter.
AggDistribution classify_question(std::string_view question,
                                  const std::vector<std::string>& header,
                                  const ClassifierModel& model);

AggType most_likely(const AggDistribution& dist);

struct SelectedCell {
  CellCoord cell;
  std::string text;
  double score = 0;
};

struct AggAnswer {
  enum class Kind { kCellList, kNumber };
  Kind kind = Kind::kCellList;
  AggType agg = AggType::kLookup;
  // Lookup: the answer. Otherwise: every selected cell, ranked.
  std::vector<SelectedCell> cells;
  double value = 0;
  // Number of selected cells that parsed as numbers (sum/average/max/min).
  int parsed_count = 0;
  // max/min: the cell holding the extremum.
  std::optional<SelectedCell> source;
  bool fallback = false;  // selection was empty and the top cell was used
};

// Accepts an optional leading sign and one decimal point after removing
// surrounding whitespace and symbols (currency, percent, ...) and thousands
// separators. Anything else is not a number.
std::optional<double> parse_number(std::string_view text);

// Cells with score >= tau, ranked. Log-sum grids are compared in probability
// space.
std::vector<SelectedCell> select_cells(const CellScoreGrid& grid, const Table& table, double tau);

// Throws ValidationError for a grid that does not match `table` or tau outside
// [0, 1]; UnanswerableError when a numeric aggregate has no parsable cell.
AggAnswer execute_aggregation(const CellScoreGrid& grid, const Table& table, AggType agg,
                              double tau = kDefaultTau);

}  // namespace rci
