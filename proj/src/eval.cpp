#include "rci/eval.hpp"

#include <fstream>

#include <json.hpp>

#include "rci/classifiers.hpp"
#include "rci/errors.hpp"

namespace rci {

EvalReport evaluate_ranking(const std::vector<RankingResult>& results, int k) {
  if (results.empty()) throw ValidationError("no ranking results to evaluate", "results");
  if (k < 1) throw ValidationError("k must be positive", "k");
  EvalReport report;
  report.k = k;
  double rr_sum = 0;
  int hits = 0;
  for (const auto& r : results) {
    std::set<CellCoord> seen;
    for (const auto& c : r.predicted) {
      if (!seen.insert(c).second) {
        throw ValidationError("question " + r.qid + " has duplicate predictions", "predicted");
      }
    }
    QuestionRecord rec;
    rec.qid = r.qid;
    const std::size_t depth = std::min(r.predicted.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i) {
      const double s = i < r.scores.size() ? r.scores[i] : 0.0;
      rec.topk.push_back({r.predicted[i], s});
      if (rec.rank == 0 && r.gold.count(r.predicted[i])) rec.rank = static_cast<int>(i) + 1;
    }
    rec.reciprocal_rank = rec.rank > 0 ? 1.0 / rec.rank : 0.0;
    if (!r.predicted.empty()) {
      const CellCoord top = r.predicted.front();
      for (const auto& g : r.gold) {
        rec.row_ok = rec.row_ok || g.row == top.row;
        rec.col_ok = rec.col_ok || g.col == top.col;
      }
    }
    rr_sum += rec.reciprocal_rank;
    hits += rec.rank == 1 ? 1 : 0;
    report.row_accuracy += rec.row_ok ? 1 : 0;
    report.col_accuracy += rec.col_ok ? 1 : 0;
    report.records.push_back(std::move(rec));
  }
  const double n = static_cast<double>(results.size());
  report.mrr = rr_sum / n;
  report.hit_at_1 = hits / n;
  report.row_accuracy /= n;
  report.col_accuracy /= n;
  return report;
}

RowColAccuracy decompose_errors(const std::vector<RankingResult>& results) {
  RowColAccuracy acc;
  if (results.empty()) return acc;
  for (const auto& r : results) {
    if (r.predicted.empty()) continue;
    const CellCoord top = r.predicted.front();
    bool row_ok = false, col_ok = false;
    for (const auto& g : r.gold) {
      row_ok = row_ok || g.row == top.row;
      col_ok = col_ok || g.col == top.col;
    }
    acc.row += row_ok ? 1 : 0;
    acc.col += col_ok ? 1 : 0;
  }
  acc.row /= static_cast<double>(results.size());
  acc.col /= static_cast<double>(results.size());
  return acc;
}

EvalReport evaluate_dataset(const TableScorer& scorer, const Dataset& data, int k,
                            CombineRule rule) {
  std::vector<RankingResult> results;
  for (const auto& q : data.questions()) {
    const Table& t = data.table(q.table_id);
    auto gold = resolve_targets(q, t);
    if (gold.empty()) continue;
    const AxisProbs probs = scorer.score(q.question, t);
    const auto grid = combine_scores(t, probs.rows, probs.cols, rule);
    RankingResult r;
    r.qid = q.qid;
    r.gold = std::move(gold);
    for (const auto& rc : rank_cells(grid, k)) {
      r.predicted.push_back(rc.cell);
      r.scores.push_back(rc.score);
    }
    results.push_back(std::move(r));
  }
  return evaluate_ranking(results, k);
}

std::string report_to_json(const EvalReport& report, int indent) {
  using nlohmann::json;
  json records = json::array();
  for (const auto& r : report.records) {
    json topk = json::array();
    for (const auto& c : r.topk) {
      topk.push_back({{"row", c.cell.row}, {"col", c.cell.col}, {"score", c.score}});
    }
    records.push_back({{"qid", r.qid},
                       {"topk", std::move(topk)},
                       {"rank", r.rank},
                       {"reciprocal_rank", r.reciprocal_rank},
                       {"row_ok", r.row_ok},
                       {"col_ok", r.col_ok}});
  }
  json j = {{"summary",
             {{"k", report.k},
              {"questions", report.records.size()},
              {"mrr", report.mrr},
              {"hit_at_1", report.hit_at_1},
              {"row_accuracy", report.row_accuracy},
              {"col_accuracy", report.col_accuracy}}},
            {"records", std::move(records)}};
  return j.dump(indent);
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << report_to_json(report) << '\n';
}

AblationReport run_format_ablation(const ScorerFactory& scorer_for_mode, const Dataset& data,
                                   int k) {
  AblationReport out;
  out.delimited = evaluate_dataset(*scorer_for_mode(SerializationMode::kDelimited), data, k);
  out.plain = evaluate_dataset(*scorer_for_mode(SerializationMode::kPlain), data, k);
  return out;
}

}  // namespace rci
