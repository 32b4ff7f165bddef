#include "rci/aggregate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "rci/errors.hpp"
#include "rci/serialize.hpp"

namespace rci {

AggDistribution classify_question(std::string_view question,
                                  const std::vector<std::string>& header,
                                  const ClassifierModel& model) {
  if (model.head.classes() != kNumAggTypes) {
    throw ValidationError("question classifier must have " + std::to_string(kNumAggTypes) +
                              " classes",
                          "model");
  }
  const RowVec<float> p = interaction_distribution(model, question, serialize_header(header));
  AggDistribution out{};
  for (int k = 0; k < kNumAggTypes; ++k) out[k] = p(k);
  return out;
}

AggType most_likely(const AggDistribution& dist) {
  return static_cast<AggType>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

std::optional<double> parse_number(std::string_view text) {
  auto is_core = [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
  };
  std::size_t b = 0;
  while (b < text.size() && !is_core(text[b])) ++b;
  std::size_t e = text.size();
  while (e > b && !std::isdigit(static_cast<unsigned char>(text[e - 1])) && text[e - 1] != '.') --e;
  // Anything stripped must be a symbol or space, never a letter or digit.
  for (std::size_t i = 0; i < b; ++i) {
    if (std::isalnum(static_cast<unsigned char>(text[i]))) return std::nullopt;
  }
  for (std::size_t i = e; i < text.size(); ++i) {
    if (std::isalnum(static_cast<unsigned char>(text[i]))) return std::nullopt;
  }
  std::string core;
  for (std::size_t i = b; i < e; ++i) {
    if (text[i] != ',') core.push_back(text[i]);
  }
  std::size_t i = 0;
  if (i < core.size() && (core[i] == '+' || core[i] == '-')) ++i;
  int digits = 0, dots = 0;
  for (; i < core.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(core[i]))) {
      ++digits;
    } else if (core[i] == '.' && dots == 0) {
      ++dots;
    } else {
      return std::nullopt;
    }
  }
  if (digits == 0) return std::nullopt;
  return std::strtod(core.c_str(), nullptr);
}

std::vector<SelectedCell> select_cells(const CellScoreGrid& grid, const Table& table,
                                       double tau) {
  std::vector<SelectedCell> out;
  for (const auto& rc : rank_cells(grid, grid.rows() * grid.cols())) {
    const double p = grid.rule == CombineRule::kLogSum ? std::exp(rc.score) : rc.score;
    if (p >= tau) out.push_back({rc.cell, table.cell(rc.cell), rc.score});
  }
  return out;
}

AggAnswer execute_aggregation(const CellScoreGrid& grid, const Table& table, AggType agg,
                              double tau) {
  if (grid.rows() != table.num_rows() || grid.cols() != table.num_cols()) {
    throw ValidationError("score grid does not match table '" + table.id() + "'", "grid");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0, 1]", "tau");

  AggAnswer ans;
  ans.agg = agg;
  ans.cells = select_cells(grid, table, tau);
  if (agg == AggType::kCount) {
    ans.kind = AggAnswer::Kind::kNumber;
    ans.value = static_cast<double>(ans.cells.size());
    return ans;
  }
  if (ans.cells.empty()) {
    const auto top = rank_cells(grid, 1).front();
    ans.cells.push_back({top.cell, table.cell(top.cell), top.score});
    ans.fallback = true;
  }
  if (agg == AggType::kLookup) return ans;

  ans.kind = AggAnswer::Kind::kNumber;
  double sum = 0;
  std::optional<double> best;
  for (const auto& c : ans.cells) {
    const auto v = parse_number(c.text);
    if (!v) continue;
    ++ans.parsed_count;
    sum += *v;
    const bool better = !best || (agg == AggType::kMax ? *v > *best : *v < *best);
    if ((agg == AggType::kMax || agg == AggType::kMin) && better) {
      best = v;
      ans.source = c;
    }
  }
  if (ans.parsed_count == 0) {
    throw UnanswerableError(std::string(agg_name(agg)) + ": none of the " +
                            std::to_string(ans.cells.size()) + " selected cells is numeric");
  }
  switch (agg) {
    case AggType::kSum:
      ans.value = sum;
      break;
    case AggType::kAverage:
      ans.value = sum / ans.parsed_count;
      break;
    default:
      ans.value = *best;
  }
  return ans;
}

}  // namespace rci
