#include "rci/scorer.hpp"

namespace rci {

AxisProbs BundleScorer::score(std::string_view question, const Table& table) const {
  return {score_rows(bundle_, question, table), score_columns(bundle_, question, table)};
}

void OracleScorer::add(const std::string& table_id, const std::string& question,
                       std::set<CellCoord> gold) {
  gold_[{table_id, question}] = std::move(gold);
}

AxisProbs OracleScorer::score(std::string_view question, const Table& table) const {
  AxisProbs out{std::vector<double>(table.num_rows(), low_),
                std::vector<double>(table.num_cols(), low_)};
  auto it = gold_.find(std::make_pair(table.id(), std::string(question)));
  if (it == gold_.end()) return out;
  for (const auto& c : it->second) {
    if (!table.contains(c)) continue;
    out.rows[c.row - 1] = high_;
    out.cols[c.col - 1] = high_;
  }
  return out;
}

}  // namespace rci
