#include <doctest.h>

#include "fixtures.hpp"
#include "rci/aggregate.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"

using namespace rci;

namespace {

Table numbers() {
  return Table("nums", {"Team", "Wins", "Goals"},
               {{"Cubs", "3", "1,200"}, {"Rovers", "5", "$40"}, {"Falcons", "2", "n/a"},
                {"Pilots", "4", "-7.5%"}});
}

// Row i selected iff row_sel[i]; column 2 selected.
CellScoreGrid pick_rows(const std::vector<int>& rows_on, int n_rows, int col, int n_cols) {
  std::vector<double> r(n_rows, 0.1), c(n_cols, 0.1);
  for (int i : rows_on) r[i - 1] = 0.9;
  c[col - 1] = 0.9;
  return combine_scores(r, c);
}

}  // namespace

TEST_CASE("number parsing") {
  CHECK(parse_number("3") == 3.0);
  CHECK(parse_number(" 1,234 ") == 1234.0);
  CHECK(parse_number("$40") == 40.0);
  CHECK(parse_number("-7.5%") == -7.5);
  CHECK(parse_number("+2.") == 2.0);
  CHECK(parse_number("(12)") == 12.0);
  CHECK_FALSE(parse_number("n/a").has_value());
  CHECK_FALSE(parse_number("").has_value());
  CHECK_FALSE(parse_number("1.2.3").has_value());
  CHECK_FALSE(parse_number("12 kg").has_value());
  CHECK_FALSE(parse_number("v2").has_value());
  CHECK_FALSE(parse_number("-").has_value());
}

TEST_CASE("sum and average") {
  const Table t = numbers();
  const auto g = pick_rows({1, 2}, 4, 2, 3);
  const auto sum = execute_aggregation(g, t, AggType::kSum, 0.5);
  CHECK(sum.kind == AggAnswer::Kind::kNumber);
  CHECK(sum.value == 8.0);
  CHECK(sum.parsed_count == 2);
  const auto avg_grid = pick_rows({3, 4}, 4, 2, 3);
  const auto avg = execute_aggregation(avg_grid, t, AggType::kAverage, 0.5);
  CHECK(avg.value == 3.0);
  const auto avg2 = execute_aggregation(g, t, AggType::kAverage, 0.5);
  CHECK(sum.value == doctest::Approx(avg2.value * avg2.parsed_count).epsilon(1e-9));
}

TEST_CASE("max and min return numbers with their source cell") {
  const Table t = numbers();
  const auto g = pick_rows({1, 2, 3, 4}, 4, 3, 3);
  const auto mx = execute_aggregation(g, t, AggType::kMax, 0.5);
  CHECK(mx.value == 1200.0);
  REQUIRE(mx.source.has_value());
  CHECK(mx.source->cell == CellCoord{1, 3});
  CHECK(mx.parsed_count == 3);
  const auto mn = execute_aggregation(g, t, AggType::kMin, 0.5);
  CHECK(mn.value == -7.5);
  CHECK(mn.source->text == "-7.5%");
}

TEST_CASE("count") {
  const Table t = numbers();
  const auto g = pick_rows({1, 2, 4}, 4, 1, 3);
  CHECK(execute_aggregation(g, t, AggType::kCount, 0.5).value == 3.0);
  const auto none = execute_aggregation(g, t, AggType::kCount, 0.95);
  CHECK(none.value == 0.0);
  CHECK(none.cells.empty());
  CHECK_FALSE(none.fallback);
}

TEST_CASE("lookup") {
  const Table t("two", {"A", "B"}, {{"a1", "b1"}, {"a2", "b2"}});
  const auto g = combine_scores({0.9, 0.1}, {0.2, 0.8});
  const auto ans = execute_aggregation(g, t, AggType::kLookup, 0.5);
  CHECK(ans.kind == AggAnswer::Kind::kCellList);
  REQUIRE(ans.cells.size() == 1);
  CHECK(ans.cells[0].cell == CellCoord{1, 2});
  CHECK(ans.cells[0].text == "b1");
  CHECK_FALSE(ans.fallback);

  const auto fb = execute_aggregation(g, t, AggType::kLookup, 0.9);
  REQUIRE(fb.cells.size() == 1);
  CHECK(fb.fallback);
  CHECK(fb.cells[0].cell == CellCoord{1, 2});
}

TEST_CASE("unanswerable and invalid aggregation") {
  const Table t = numbers();
  const auto g = pick_rows({3}, 4, 3, 3);
  CHECK_THROWS_AS(execute_aggregation(g, t, AggType::kSum, 0.5), UnanswerableError);
  CHECK_THROWS_AS(execute_aggregation(g, t, AggType::kMax, 0.5), UnanswerableError);
  CHECK_THROWS_AS(execute_aggregation(g, t, AggType::kSum, 1.5), ValidationError);
  CHECK_THROWS_AS(execute_aggregation(combine_scores({0.5}, {0.5}), t, AggType::kSum, 0.5),
                  ValidationError);
  const auto fb = execute_aggregation(pick_rows({1}, 4, 2, 3), t, AggType::kSum, 0.99);
  CHECK(fb.fallback);
  CHECK(fb.value == 3.0);
}

TEST_CASE("selection is monotone in tau") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    std::vector<std::vector<std::string>> rows(m, std::vector<std::string>(n, "1"));
    const Table t("r", std::vector<std::string>(n, "h"), rows);
    std::vector<double> r(m), c(n);
    for (auto& x : r) x = uniform_unit(rng);
    for (auto& x : c) x = uniform_unit(rng);
    const auto g = combine_scores(r, c);
    std::set<CellCoord> prev;
    bool first = true;
    for (int s = 0; s <= 20; ++s) {
      const double tau = s / 20.0;
      std::set<CellCoord> cur;
      for (const auto& sc : select_cells(g, t, tau)) cur.insert(sc.cell);
      if (!first) CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      const auto count = execute_aggregation(g, t, AggType::kCount, tau);
      CHECK(count.value == static_cast<double>(cur.size()));
      if (!cur.empty()) {
        CHECK(execute_aggregation(g, t, AggType::kLookup, tau).cells.size() == cur.size());
      }
      prev = cur;
      first = false;
    }
  }
}
