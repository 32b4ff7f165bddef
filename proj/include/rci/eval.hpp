#pragma once
// Ranking metrics, row/column error decomposition, the evaluation and
// formatting-ablation harness, and the synthetic corpus generator.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rci/dataset.hpp"
#include "rci/rci.hpp"
#include "rci/scorer.hpp"
#include "rci/serialize.hpp"

namespace rci {

inline constexpr int kDefaultTopK = 10;

struct RankingResult {
  std::string qid;
  std::vector<CellCoord> predicted;  // best first, duplicate free
  std::set<CellCoord> gold;
  std::vector<double> scores;  // optional, aligned with `predicted`
};

struct QuestionRecord {
  std::string qid;
  std::vector<RankedCell> topk;
  int rank = 0;  // 1-based rank of the first gold cell within the top k; 0 = infinite
  double reciprocal_rank = 0;
  bool row_ok = false;
  bool col_ok = false;
};

struct EvalReport {
  int k = kDefaultTopK;
  double mrr = 0;
  double hit_at_1 = 0;
  double row_accuracy = 0;
  double col_accuracy = 0;
  std::vector<QuestionRecord> records;
};

// Reciprocal rank of the first gold prediction within the top k (0 when
// absent). Hit@1 counts gold at rank 1. Throws ValidationError on empty input
// or duplicate predictions.
EvalReport evaluate_ranking(const std::vector<RankingResult>& results, int k = kDefaultTopK);

struct RowColAccuracy {
  double row = 0;
  double col = 0;
};

// Fraction of results whose top-1 row (column) is a gold row (column).
// Results without predictions count as wrong on both axes.
RowColAccuracy decompose_errors(const std::vector<RankingResult>& results);

// Scores every answerable question of `data` with `scorer`, ranks the cells and
// evaluates. Records keep the top-k cells with scores.
EvalReport evaluate_dataset(const TableScorer& scorer, const Dataset& data, int k = kDefaultTopK,
                            CombineRule rule = CombineRule::kProduct);

std::string report_to_json(const EvalReport& report, int indent = 2);
void save_report(const EvalReport& report, const std::filesystem::path& path);

struct AblationReport {
  EvalReport delimited;
  EvalReport plain;
  double hit_at_1_delta() const { return delimited.hit_at_1 - plain.hit_at_1; }
  double mrr_delta() const { return delimited.mrr - plain.mrr; }
};

using ScorerFactory = std::function<std::unique_ptr<TableScorer>(SerializationMode)>;

// Evaluates the scorer built for each serialization mode on the same data.
AblationReport run_format_ablation(const ScorerFactory& scorer_for_mode, const Dataset& data,
                                   int k = kDefaultTopK);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct GeneratorConfig {
  int train = 2000;
  int dev = 500;
  int test = 500;
  int min_rows = 5;
  int max_rows = 8;
  int min_cols = 4;
  int max_cols = 6;
  // Fraction of lookup questions that select rows by a (column, value)
  // condition instead of by the row's name.
  double conditional_fraction = 0.35;
  // Fraction of instances that are aggregation questions (max, min, count,
  // sum, average); the rest are lookups.
  double aggregation_fraction = 0.0;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Seeded and deterministic. Every question carries `targets`; aggregation
// questions also carry `agg`. Answers are the texts of the target cells, so
// weak supervision recovers a superset of the targets.
SyntheticCorpus generate_synthetic_corpus(const GeneratorConfig& config);

// Writes {split}.tables.jsonl and {split}.questions.jsonl for each split.
void save_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace rci
