#include "rci/rci.hpp"

#include <algorithm>
#include <cmath>

#include "rci/errors.hpp"

namespace rci {

namespace {

void check_probs(const std::vector<double>& p, const char* field) {
  if (p.empty()) throw ValidationError(std::string(field) + " must be non-empty", field);
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError(std::string(field) + " contains " + std::to_string(v) +
                                ", outside [0, 1]",
                            field);
    }
  }
}

// Strict weak order: higher score first, then row-major.
bool ranks_before(double sa, CellCoord a, double sb, CellCoord b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace

CellScoreGrid combine_scores(const std::vector<double>& row_probs,
                             const std::vector<double>& col_probs, CombineRule rule,
                             std::string table_id) {
  check_probs(row_probs, "row_probs");
  check_probs(col_probs, "col_probs");
  CellScoreGrid g;
  g.table_id = std::move(table_id);
  g.row_probs = row_probs;
  g.col_probs = col_probs;
  g.rule = rule;
  g.cell_scores.assign(row_probs.size(), std::vector<double>(col_probs.size()));
  for (std::size_t i = 0; i < row_probs.size(); ++i) {
    for (std::size_t j = 0; j < col_probs.size(); ++j) {
      g.cell_scores[i][j] = rule == CombineRule::kProduct
                                ? row_probs[i] * col_probs[j]
                                : std::log(std::max(row_probs[i], kLogFloor)) +
                                      std::log(std::max(col_probs[j], kLogFloor));
    }
  }
  return g;
}

CellScoreGrid combine_scores(const Table& table, const std::vector<double>& row_probs,
                             const std::vector<double>& col_probs, CombineRule rule) {
  if (static_cast<int>(row_probs.size()) != table.num_rows() ||
      static_cast<int>(col_probs.size()) != table.num_cols()) {
    throw ValidationError("probability vectors are " + std::to_string(row_probs.size()) + "x" +
                              std::to_string(col_probs.size()) + " but table '" + table.id() +
                              "' is " + std::to_string(table.num_rows()) + "x" +
                              std::to_string(table.num_cols()),
                          "grid");
  }
  return combine_scores(row_probs, col_probs, rule, table.id());
}

std::vector<RankedCell> rank_cells(const CellScoreGrid& grid, int k) {
  if (k < 1) throw ValidationError("k must be at least 1", "k");
  std::vector<RankedCell> cells;
  cells.reserve(static_cast<std::size_t>(grid.rows()) * grid.cols());
  for (int i = 1; i <= grid.rows(); ++i) {
    for (int j = 1; j <= grid.cols(); ++j) cells.push_back({{i, j}, grid.cell_scores[i - 1][j - 1]});
  }
  const std::size_t keep = std::min(cells.size(), static_cast<std::size_t>(k));
  auto cmp = [](const RankedCell& a, const RankedCell& b) {
    return ranks_before(a.score, a.cell, b.score, b.cell);
  };
  std::partial_sort(cells.begin(), cells.begin() + keep, cells.end(), cmp);
  cells.resize(keep);
  return cells;
}

Heatmap build_heatmap(const CellScoreGrid& grid) {
  Heatmap h;
  h.table_id = grid.table_id;
  h.intensities = grid.cell_scores;
  if (grid.rule == CombineRule::kLogSum) {
    for (auto& row : h.intensities) {
      for (auto& v : row) v = std::exp(v);
    }
  }
  double mx = 0.0;
  CellCoord arg{1, 1};
  double best = -INFINITY;
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const double s = grid.cell_scores[i][j];
      if (ranks_before(s, {i + 1, j + 1}, best, arg)) {
        best = s;
        arg = {i + 1, j + 1};
      }
      mx = std::max(mx, h.intensities[i][j]);
    }
  }
  for (auto& row : h.intensities) {
    for (auto& v : row) v = mx > 0.0 ? v / mx : 0.0;
  }
  h.argmax = arg;
  return h;
}

}  // namespace rci
