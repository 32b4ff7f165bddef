#pragma once
// Row/column probability sources consumed by the evaluation harness and the
// service. Implementations are immutable after construction.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rci/classifiers.hpp"
#include "rci/table.hpp"

namespace rci {

struct AxisProbs {
  std::vector<double> rows;
  std::vector<double> cols;
};

class TableScorer {
 public:
  virtual ~TableScorer() = default;
  virtual AxisProbs score(std::string_view question, const Table& table) const = 0;
};

// Scores rows and columns with a trained bundle, online.
class BundleScorer : public TableScorer {
 public:
  explicit BundleScorer(const RciModelBundle& bundle) : bundle_(bundle) {}
  AxisProbs score(std::string_view question, const Table& table) const override;

 private:
  const RciModelBundle& bundle_;
};

// Knows the gold cells of each (table id, question) and scores target rows
// and columns `high`, everything else `low`. Unknown questions score `low`.
class OracleScorer : public TableScorer {
 public:
  explicit OracleScorer(double high = 0.9, double low = 0.1) : high_(high), low_(low) {}
  void add(const std::string& table_id, const std::string& question, std::set<CellCoord> gold);
  AxisProbs score(std::string_view question, const Table& table) const override;

 private:
  double high_, low_;
  std::map<std::pair<std::string, std::string>, std::set<CellCoord>, std::less<>> gold_;
};

}  // namespace rci
