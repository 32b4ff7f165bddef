#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rci/aggregate.hpp"
#include "rci/classifiers.hpp"
#include "rci/dataset.hpp"
#include "rci/errors.hpp"
#include "rci/eval.hpp"
#include "rci/rci.hpp"
#include "rci/scorer.hpp"
#include "rci/serialize.hpp"
#include "rci/service.hpp"
#include "rci/table.hpp"

namespace py = pybind11;
using namespace rci;

namespace {

using Cell = std::pair<int, int>;

std::set<Cell> to_pairs(const std::set<CellCoord>& s) {
  std::set<Cell> out;
  for (const auto& c : s) out.insert({c.row, c.col});
  return out;
}

CombineRule parse_rule(const std::string& rule) {
  if (rule == "product") return CombineRule::kProduct;
  if (rule == "logsum") return CombineRule::kLogSum;
  throw ValidationError("unknown combine rule '" + rule + "'", "rule");
}

CellScoreGrid grid_of(const std::vector<double>& rows, const std::vector<double>& cols,
                      const std::string& rule) {
  return combine_scores(rows, cols, parse_rule(rule));
}

py::list ranked(const std::vector<RankedCell>& cells) {
  py::list out;
  for (const auto& c : cells) out.append(py::make_tuple(c.cell.row, c.cell.col, c.score));
  return out;
}

py::dict answer_dict(const AggAnswer& a) {
  py::dict d;
  d["agg"] = std::string(agg_name(a.agg));
  d["kind"] = a.kind == AggAnswer::Kind::kNumber ? "number" : "cells";
  d["value"] = a.value;
  d["fallback"] = a.fallback;
  py::list cells;
  for (const auto& c : a.cells) cells.append(py::make_tuple(c.cell.row, c.cell.col, c.text));
  d["cells"] = cells;
  return d;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

// Models trained or loaded from Python; owns the bundle a scorer refers to.
struct PyBundle {
  std::shared_ptr<RciModelBundle> bundle;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Row-column intersection table QA core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_KeyError);

  py::class_<Table>(m, "Table")
      .def(py::init<std::string, std::vector<std::string>, std::vector<std::vector<std::string>>>(),
           py::arg("id"), py::arg("header"), py::arg("rows"))
      .def_property_readonly("id", &Table::id)
      .def_property_readonly("header", &Table::header)
      .def_property_readonly("rows", &Table::rows)
      .def_property_readonly("num_rows", &Table::num_rows)
      .def_property_readonly("num_cols", &Table::num_cols)
      .def("cell", py::overload_cast<int, int>(&Table::cell, py::const_), py::arg("row"),
           py::arg("col"))
      .def("__repr__", [](const Table& t) {
        return "<Table '" + t.id() + "' " + std::to_string(t.num_rows()) + "x" +
               std::to_string(t.num_cols()) + ">";
      });

  m.def("load_tables", [](const std::string& path) {
    const auto fmt =
        std::filesystem::path(path).extension() == ".csv" ? TableFormat::kCsv : TableFormat::kJsonl;
    return parse_table_file(path, fmt);
  });

  m.def(
      "serialize_row",
      [](const Table& t, int row, const std::string& mode) {
        return serialize_row(t, row, parse_mode(mode));
      },
      py::arg("table"), py::arg("row"), py::arg("mode") = "delimited");
  m.def(
      "serialize_column",
      [](const Table& t, int col, const std::string& mode) {
        return serialize_column(t, col, parse_mode(mode));
      },
      py::arg("table"), py::arg("col"), py::arg("mode") = "delimited");

  m.def(
      "weak_supervise",
      [](const std::vector<std::string>& answers, const Table& t) {
        return to_pairs(weak_supervise(answers, t));
      },
      py::arg("answers"), py::arg("table"));
  m.def("derive_targets", [](const std::set<Cell>& cells) {
    std::set<CellCoord> s;
    for (const auto& [r, c] : cells) s.insert({r, c});
    const auto t = derive_targets(s);
    return py::make_tuple(t.rows, t.cols);
  });

  m.def(
      "rank_cells",
      [](const std::vector<double>& rows, const std::vector<double>& cols, int k,
         const std::string& rule) { return ranked(rank_cells(grid_of(rows, cols, rule), k)); },
      py::arg("row_probs"), py::arg("col_probs"), py::arg("k") = kDefaultTopK,
      py::arg("rule") = "product");
  m.def(
      "heatmap",
      [](const std::vector<double>& rows, const std::vector<double>& cols,
         const std::string& rule) { return build_heatmap(grid_of(rows, cols, rule)).intensities; },
      py::arg("row_probs"), py::arg("col_probs"), py::arg("rule") = "product");

  m.def(
      "aggregate",
      [](const Table& t, const std::vector<double>& rows, const std::vector<double>& cols,
         const std::string& agg, double tau) {
        return answer_dict(
            execute_aggregation(combine_scores(t, rows, cols), t, parse_agg(agg), tau));
      },
      py::arg("table"), py::arg("row_probs"), py::arg("col_probs"), py::arg("agg"),
      py::arg("tau") = kDefaultTau);
  m.def("parse_number", [](const std::string& s) { return parse_number(s); });

  m.def(
      "evaluate_ranking",
      [](const std::vector<std::pair<std::vector<Cell>, std::set<Cell>>>& items, int k) {
        std::vector<RankingResult> results;
        for (std::size_t i = 0; i < items.size(); ++i) {
          RankingResult r;
          r.qid = std::to_string(i);
          for (const auto& [row, col] : items[i].first) r.predicted.push_back({row, col});
          for (const auto& [row, col] : items[i].second) r.gold.insert({row, col});
          results.push_back(std::move(r));
        }
        const auto rep = evaluate_ranking(results, k);
        py::dict d;
        d["mrr"] = rep.mrr;
        d["hit_at_1"] = rep.hit_at_1;
        d["row_accuracy"] = rep.row_accuracy;
        d["col_accuracy"] = rep.col_accuracy;
        return d;
      },
      py::arg("items"), py::arg("k") = kDefaultTopK);

  m.def(
      "generate_corpus",
      [](const std::string& out_dir, std::uint64_t seed, int train, int dev, int test) {
        GeneratorConfig g;
        g.seed = seed;
        g.train = train;
        g.dev = dev;
        g.test = test;
        save_corpus(generate_synthetic_corpus(g), out_dir);
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("train") = 2000, py::arg("dev") = 500,
      py::arg("test") = 500);

  py::class_<PyBundle>(m, "Bundle")
      .def_static("load",
                  [](const std::string& path) {
                    return PyBundle{std::make_shared<RciModelBundle>(load_bundle(path))};
                  })
      .def("save", [](const PyBundle& b, const std::string& path) { save_bundle(*b.bundle, path); })
      .def_property_readonly("format",
                             [](const PyBundle& b) { return std::string(mode_name(b.bundle->format)); })
      .def("score_rows",
           [](const PyBundle& b, const std::string& q, const Table& t) {
             return score_rows(*b.bundle, q, t);
           })
      .def("score_columns",
           [](const PyBundle& b, const std::string& q, const Table& t) {
             return score_columns(*b.bundle, q, t);
           })
      .def(
          "evaluate",
          [](const PyBundle& b, const std::string& tables, const std::string& questions, int k) {
            const Dataset data(parse_table_file(tables, TableFormat::kJsonl),
                               parse_questions_file(questions));
            EvalReport rep;
            {
              py::gil_scoped_release release;
              rep = evaluate_dataset(BundleScorer(*b.bundle), data, k);
            }
            const auto j = nlohmann::json::parse(report_to_json(rep));
            return json_to_py(j["summary"]);
          },
          py::arg("tables"), py::arg("questions"), py::arg("k") = kDefaultTopK)
      .def(
          "answer",
          [](const PyBundle& b, const Table& t, const std::string& question, int k, double tau) {
            AskRequest req;
            req.table_id = t.id();
            req.question = question;
            req.k = k;
            req.tau = tau;
            ModelSet models;
            models.bundle = b.bundle;
            return json_to_py(answer_question(req, t, models).to_json());
          },
          py::arg("table"), py::arg("question"), py::arg("k") = kDefaultTopK,
          py::arg("tau") = kDefaultTau);

  m.def(
      "train",
      [](const std::string& tables, const std::string& questions, int d_model, int epochs,
         double budget_seconds, const std::string& format, std::uint64_t seed) {
        const Dataset data(parse_table_file(tables, TableFormat::kJsonl),
                           parse_questions_file(questions));
        TrainConfig cfg;
        cfg.encoder.d_model = d_model;
        cfg.encoder.d_ff = 2 * d_model;
        cfg.encoder.max_len = 64;
        cfg.encoder.seed = seed;
        cfg.seed = seed;
        cfg.epochs = epochs;
        cfg.time_budget_seconds = budget_seconds;
        cfg.format = parse_mode(format);
        py::gil_scoped_release release;
        auto r = train_rci(data, nullptr, cfg);
        return PyBundle{std::make_shared<RciModelBundle>(std::move(r.final_bundle))};
      },
      py::arg("tables"), py::arg("questions"), py::arg("d_model") = 32, py::arg("epochs") = 1,
      py::arg("budget_seconds") = 0.0, py::arg("format") = "delimited", py::arg("seed") = 1);

  py::class_<RciService>(m, "Service")
      .def(py::init([](std::optional<PyBundle> b) {
             ModelSet models;
             if (b) models.bundle = b->bundle;
             return std::make_unique<RciService>(models);
           }),
           py::arg("bundle") = py::none())
      .def("add_table", [](RciService& s, const Table& t) { return s.add_table(t); })
      .def("handle", [](RciService& s, const std::string& method, const std::string& path,
                        const std::string& body) {
        const auto r = s.handle(method, path, body);
        return py::make_tuple(r.status, json_to_py(r.body));
      });
}
