#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"
#include "rci/rci.hpp"

using namespace rci;

namespace {

// Independent brute force: full sort of every cell by (-score, row, col).
std::vector<RankedCell> brute_rank(const std::vector<double>& rows, const std::vector<double>& cols) {
  std::vector<RankedCell> all;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      all.push_back({{static_cast<int>(i) + 1, static_cast<int>(j) + 1}, rows[i] * cols[j]});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const RankedCell& a, const RankedCell& b) { return a.score > b.score; });
  return all;
}

int first_argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best + 1;
}

std::vector<double> lattice_vector(Rng& rng, int n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(uniform_index(rng, 11)) / 10.0;
  return v;
}

}  // namespace

TEST_CASE("outer product combination") {
  const auto g = combine_scores({0.9, 0.1}, {0.2, 0.8});
  REQUIRE(g.rows() == 2);
  REQUIRE(g.cols() == 2);
  CHECK(g.cell_scores[0][0] == 0.9 * 0.2);
  CHECK(g.cell_scores[0][1] == 0.9 * 0.8);
  CHECK(g.cell_scores[1][0] == 0.1 * 0.2);
  CHECK(g.cell_scores[1][1] == 0.1 * 0.8);
  CHECK(g.cell_scores[0][1] == doctest::Approx(0.72));
  CHECK(g.cell_scores[1][0] == doctest::Approx(0.02));

  const std::vector<double> cols = {0.3, 0.0, 1.0, 0.45};
  const auto id = combine_scores({1.0}, cols);
  CHECK(id.cell_scores[0] == cols);
}

TEST_CASE("combination validation") {
  CHECK_THROWS_AS(combine_scores({1.2}, {0.5}), ValidationError);
  CHECK_THROWS_AS(combine_scores({0.5}, {-0.1}), ValidationError);
  CHECK_THROWS_AS(combine_scores({}, {0.5}), ValidationError);
  CHECK_THROWS_AS(combine_scores({std::nan("")}, {0.5}), ValidationError);
  const Table t = test::congress_table();
  CHECK_THROWS_AS(combine_scores(t, {0.1, 0.2}, {0.1, 0.2, 0.3, 0.4, 0.5}), ValidationError);
  CHECK(combine_scores(t, std::vector<double>(5, 0.5), std::vector<double>(5, 0.5)).table_id ==
        "congress");
}

TEST_CASE("log-sum rule agrees with product on the argmax") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    std::vector<double> r(m), c(n);
    for (auto& x : r) x = 0.01 + 0.99 * uniform_unit(rng);
    for (auto& x : c) x = 0.01 + 0.99 * uniform_unit(rng);
    const auto p = rank_cells(combine_scores(r, c), 1);
    const auto l = rank_cells(combine_scores(r, c, CombineRule::kLogSum), 1);
    CHECK(p[0].cell == l[0].cell);
  }
  const auto g = combine_scores({0.0}, {0.5}, CombineRule::kLogSum);
  CHECK(g.cell_scores[0][0] == doctest::Approx(std::log(1e-12) + std::log(0.5)));
}

TEST_CASE("ranking") {
  const auto g = combine_scores({0.9, 0.1}, {0.2, 0.8});
  const auto top = rank_cells(g, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].cell == CellCoord{1, 2});
  CHECK(top[0].score == doctest::Approx(0.72));

  const auto uniform = combine_scores({0.5, 0.5}, {0.5, 0.5, 0.5});
  const auto three = rank_cells(uniform, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].cell == CellCoord{1, 1});
  CHECK(three[1].cell == CellCoord{1, 2});
  CHECK(three[2].cell == CellCoord{1, 3});

  CHECK(rank_cells(g, 100).size() == 4);
  CHECK_THROWS_AS(rank_cells(g, 0), ValidationError);
}

TEST_CASE("ranking matches brute force on the probability lattice") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    const auto r = lattice_vector(rng, m);
    const auto c = lattice_vector(rng, n);
    const auto grid = combine_scores(r, c);
    const int k = 1 + static_cast<int>(uniform_index(rng, m * n + 2));
    const auto got = rank_cells(grid, k);
    const auto want = brute_rank(r, c);
    REQUIRE(got.size() == std::min<std::size_t>(k, want.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].cell == want[i].cell);
      CHECK(got[i].score == want[i].score);
    }
    std::set<CellCoord> seen;
    for (const auto& rc : got) seen.insert(rc.cell);
    CHECK(seen.size() == got.size());
    // Distinct positive maxima pin the top cell to the axis argmaxes.
    const double rmax = *std::max_element(r.begin(), r.end());
    const double cmax = *std::max_element(c.begin(), c.end());
    if (rmax > 0 && cmax > 0) {
      CHECK(got[0].cell == CellCoord{first_argmax(r), first_argmax(c)});
    }
  }
}

TEST_CASE("heatmap") {
  const auto h = build_heatmap(combine_scores({0.9, 0.1}, {0.2, 0.8}));
  CHECK(h.intensities[0][0] == doctest::Approx(0.25));
  CHECK(h.intensities[0][1] == 1.0);
  CHECK(h.intensities[1][0] == doctest::Approx(0.02 / 0.72));
  CHECK(h.intensities[1][1] == doctest::Approx(0.08 / 0.72));
  CHECK(h.argmax == CellCoord{1, 2});

  const auto zero = build_heatmap(combine_scores({0.0, 0.0}, {0.3, 0.0}));
  for (const auto& row : zero.intensities) {
    for (double v : row) CHECK(v == 0.0);
  }
  CHECK(zero.argmax == CellCoord{1, 1});

  const auto single = build_heatmap(combine_scores({0.3}, {0.2}));
  CHECK(single.intensities == std::vector<std::vector<double>>{{1.0}});

  const auto logsum = build_heatmap(combine_scores({0.9, 0.1}, {0.2, 0.8}, CombineRule::kLogSum));
  CHECK(logsum.argmax == CellCoord{1, 2});
  CHECK(logsum.intensities[0][0] == doctest::Approx(0.25));
}

TEST_CASE("heatmap preserves ranking order") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto r = lattice_vector(rng, 1 + static_cast<int>(uniform_index(rng, 6)));
    const auto c = lattice_vector(rng, 1 + static_cast<int>(uniform_index(rng, 6)));
    const auto grid = combine_scores(r, c);
    const auto h = build_heatmap(grid);
    const auto ranked = rank_cells(grid, static_cast<int>(r.size() * c.size()));
    CHECK(h.argmax == ranked[0].cell);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      const auto a = ranked[i - 1].cell;
      const auto b = ranked[i].cell;
      CHECK(h.intensities[a.row - 1][a.col - 1] >= h.intensities[b.row - 1][b.col - 1]);
    }
  }
}
