#pragma once
// Row-column intersection: per-cell scores from independent row and column
// probabilities, cell ranking and heatmaps.

#include <string>
#include <utility>
#include <vector>

#include "rci/table.hpp"

namespace rci {

enum class CombineRule { kProduct, kLogSum };

inline constexpr double kLogFloor = 1e-12;

struct CellScoreGrid {
  std::string table_id;
  std::vector<double> row_probs;
  std::vector<double> col_probs;
  std::vector<std::vector<double>> cell_scores;  // m x n
  CombineRule rule = CombineRule::kProduct;

  int rows() const noexcept { return static_cast<int>(row_probs.size()); }
  int cols() const noexcept { return static_cast<int>(col_probs.size()); }
  double score(CellCoord c) const { return cell_scores[c.row - 1][c.col - 1]; }
};

// Product rule: p_row * p_col. Log-sum rule: log(max(p_row, floor)) +
// log(max(p_col, floor)). Throws ValidationError for probabilities outside
// [0, 1] or empty inputs.
CellScoreGrid combine_scores(const std::vector<double>& row_probs,
                             const std::vector<double>& col_probs,
                             CombineRule rule = CombineRule::kProduct, std::string table_id = {});

// Same, additionally checking the grid dimensions against `table`.
CellScoreGrid combine_scores(const Table& table, const std::vector<double>& row_probs,
                             const std::vector<double>& col_probs,
                             CombineRule rule = CombineRule::kProduct);

struct RankedCell {
  CellCoord cell;
  double score = 0;
};

// Descending score, ties by (row, col) ascending; at most min(k, m*n) cells.
std::vector<RankedCell> rank_cells(const CellScoreGrid& grid, int k);

struct Heatmap {
  std::string table_id;
  std::vector<std::vector<double>> intensities;
  CellCoord argmax;
};

// Intensities are scores divided by the maximum score (all zeros when the
// maximum is not positive). Log-sum grids are exponentiated first.
Heatmap build_heatmap(const CellScoreGrid& grid);

}  // namespace rci
