// rci: train, evaluate and serve row-column intersection models.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "rci/aggregate.hpp"
#include "rci/classifiers.hpp"
#include "rci/dataset.hpp"
#include "rci/errors.hpp"
#include "rci/eval.hpp"
#include "rci/scorer.hpp"
#include "rci/service.hpp"
#include "rci/store.hpp"

namespace fs = std::filesystem;
using namespace rci;

namespace {

std::vector<Table> load_tables(const std::string& path) {
  const auto fmt = fs::path(path).extension() == ".csv" ? TableFormat::kCsv : TableFormat::kJsonl;
  return parse_table_file(path, fmt);
}

Dataset load_dataset(const std::string& tables, const std::string& questions) {
  return Dataset(load_tables(tables), parse_questions_file(questions));
}

struct Common {
  std::string tables, questions, model, mode = "interaction", format = "delimited";
  std::string index, agg_model;
  int k = kDefaultTopK;
  double tau = kDefaultTau;
  std::uint64_t seed = 1;
};

void add_mode(CLI::App* app, Common& c) {
  app->add_option("--mode", c.mode, "column classifier")
      ->check(CLI::IsMember({"interaction", "representation"}));
}

void add_format(CLI::App* app, Common& c) {
  app->add_option("--format", c.format, "sequence serialization")
      ->check(CLI::IsMember({"delimited", "plain"}));
}

ModelSet load_models(const Common& c) {
  ModelSet m;
  m.bundle = std::make_shared<RciModelBundle>(load_bundle(c.model));
  if (!c.index.empty()) m.index = std::make_shared<EmbeddingIndex>(EmbeddingIndex::load(c.index));
  if (!c.agg_model.empty()) {
    m.question_classifier = std::make_shared<ModelQuestionClassifier>(
        std::make_shared<ClassifierModel>(load_classifier(c.agg_model)));
  }
  return m;
}

void log_entry(const TrainLogEntry& e) {
  if (e.dev_accuracy >= 0) {
    std::fprintf(stderr, "%s epoch %d step %ld loss %.4f dev %.4f %.1fs\n", e.model.c_str(),
                 e.epoch, e.step, e.loss, e.dev_accuracy, e.seconds);
  } else {
    std::fprintf(stderr, "%s epoch %d step %ld loss %.4f %.1fs\n", e.model.c_str(), e.epoch,
                 e.step, e.loss, e.seconds);
  }
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Row-column intersection table QA"};
  app.require_subcommand(1);
  Common c;

  // generate
  auto* gen = app.add_subcommand("generate", "write the synthetic lookup corpus");
  std::string out_dir;
  GeneratorConfig gcfg;
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", gcfg.seed);
  gen->add_option("--train", gcfg.train);
  gen->add_option("--dev", gcfg.dev);
  gen->add_option("--test", gcfg.test);
  gen->add_option("--aggregation-fraction", gcfg.aggregation_fraction);

  // train
  auto* train = app.add_subcommand("train", "train row and column classifiers");
  TrainConfig tcfg;
  tcfg.encoder.d_model = 64;
  tcfg.encoder.d_ff = 128;
  tcfg.encoder.max_len = 64;
  std::string dev_tables, dev_questions;
  train->add_option("--tables", c.tables)->required()->check(CLI::ExistingFile);
  train->add_option("--questions", c.questions)->required()->check(CLI::ExistingFile);
  train->add_option("--dev-tables", dev_tables)->check(CLI::ExistingFile);
  train->add_option("--dev-questions", dev_questions)->check(CLI::ExistingFile);
  train->add_option("--model", c.model, "bundle output path")->required();
  train->add_option("--agg-model", c.agg_model, "also train the question-type classifier");
  add_mode(train, c);
  add_format(train, c);
  train->add_option("--seed", c.seed);
  train->add_option("--epochs", tcfg.epochs);
  train->add_option("--batch-size", tcfg.batch_size);
  train->add_option("--lr", tcfg.adam.lr);
  train->add_option("--budget", tcfg.time_budget_seconds, "seconds per model");
  train->add_option("--d-model", tcfg.encoder.d_model);
  train->add_option("--layers", tcfg.encoder.n_layers);
  train->add_option("--heads", tcfg.encoder.n_heads);
  train->add_option("--d-ff", tcfg.encoder.d_ff);
  train->add_option("--max-len", tcfg.encoder.max_len);

  // eval
  auto* eval = app.add_subcommand("eval", "rank cells for every question and report MRR/Hit@1");
  std::string report_path;
  eval->add_option("--tables", c.tables)->required()->check(CLI::ExistingFile);
  eval->add_option("--questions", c.questions)->required()->check(CLI::ExistingFile);
  eval->add_option("--model", c.model)->required()->check(CLI::ExistingFile);
  eval->add_option("--index", c.index)->check(CLI::ExistingFile);
  eval->add_option("--k", c.k)->check(CLI::PositiveNumber);
  eval->add_option("--report", report_path, "per-question report (json)");
  add_mode(eval, c);

  // answer
  auto* answer = app.add_subcommand("answer", "answer one question over one table");
  std::string table_id, question;
  answer->add_option("--tables", c.tables)->required()->check(CLI::ExistingFile);
  answer->add_option("--table-id", table_id, "defaults to the first table");
  answer->add_option("--question", question)->required();
  answer->add_option("--model", c.model)->required()->check(CLI::ExistingFile);
  answer->add_option("--agg-model", c.agg_model)->check(CLI::ExistingFile);
  answer->add_option("--index", c.index)->check(CLI::ExistingFile);
  answer->add_option("--k", c.k)->check(CLI::PositiveNumber);
  answer->add_option("--tau", c.tau)->check(CLI::Range(0.0, 1.0));
  add_mode(answer, c);

  // index
  auto* index = app.add_subcommand("index", "materialize column vectors for the representation model");
  bool with_rows = false;
  index->add_option("--tables", c.tables)->required()->check(CLI::ExistingFile);
  index->add_option("--model", c.model)->required()->check(CLI::ExistingFile);
  index->add_option("--out", c.index)->required();
  index->add_flag("--rows", with_rows, "also store row vectors");
  add_format(index, c);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP question answering service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--tables", c.tables)->check(CLI::ExistingFile);
  serve->add_option("--model", c.model)->required()->check(CLI::ExistingFile);
  serve->add_option("--agg-model", c.agg_model)->check(CLI::ExistingFile);
  serve->add_option("--index", c.index)->check(CLI::ExistingFile);
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const auto corpus = generate_synthetic_corpus(gcfg);
      save_corpus(corpus, out_dir);
      std::printf("wrote %zu/%zu/%zu instances to %s\n", corpus.train.questions().size(),
                  corpus.dev.questions().size(), corpus.test.questions().size(),
                  out_dir.c_str());
    } else if (*train) {
      const Dataset data = load_dataset(c.tables, c.questions);
      std::optional<Dataset> dev;
      if (!dev_tables.empty() && !dev_questions.empty()) {
        dev = load_dataset(dev_tables, dev_questions);
      }
      tcfg.format = parse_mode(c.format);
      tcfg.column_kind = parse_kind(c.mode);
      tcfg.seed = c.seed;
      tcfg.encoder.seed = c.seed;
      const auto r = train_rci(data, dev ? &*dev : nullptr, tcfg, log_entry);
      save_bundle(r.best_bundle, c.model);
      std::printf("saved %s (skipped %d)\n", c.model.c_str(), r.skipped);
      if (!c.agg_model.empty()) {
        const auto q = train_question_classifier(data, dev ? &*dev : nullptr, tcfg, log_entry);
        save_classifier(q.model, c.agg_model);
        std::printf("saved %s\n", c.agg_model.c_str());
      }
    } else if (*eval) {
      const Dataset data = load_dataset(c.tables, c.questions);
      const RciModelBundle bundle = load_bundle(c.model);
      std::unique_ptr<TableScorer> scorer;
      std::optional<EmbeddingIndex> idx;
      if (c.mode == "representation" && !c.index.empty()) {
        idx = EmbeddingIndex::load(c.index);
        scorer = std::make_unique<IndexedScorer>(bundle, *idx);
      } else {
        scorer = std::make_unique<BundleScorer>(bundle);
      }
      const auto report = evaluate_dataset(*scorer, data, c.k);
      if (!report_path.empty()) save_report(report, report_path);
      std::printf("questions %zu  mrr %.4f  hit@1 %.4f  row %.4f  col %.4f\n",
                  report.records.size(), report.mrr, report.hit_at_1, report.row_accuracy,
                  report.col_accuracy);
    } else if (*answer) {
      const auto tables = load_tables(c.tables);
      if (tables.empty()) throw ValidationError("no tables in " + c.tables, "tables");
      const Table* t = &tables.front();
      if (!table_id.empty()) {
        t = nullptr;
        for (const auto& x : tables) {
          if (x.id() == table_id) t = &x;
        }
        if (!t) throw NotFoundError("table '" + table_id + "' not found");
      }
      AskRequest req;
      req.table_id = t->id();
      req.question = question;
      req.mode = parse_kind(c.mode);
      req.k = c.k;
      req.tau = c.tau;
      const auto resp = answer_question(req, *t, load_models(c));
      std::cout << resp.to_json().dump(2) << '\n';
    } else if (*index) {
      const auto tables = load_tables(c.tables);
      const RciModelBundle bundle = load_bundle(c.model);
      MaterializeOptions opt;
      opt.mode = parse_mode(c.format);
      opt.include_rows = with_rows;
      const auto idx = materialize(tables, bundle.column, opt);
      idx.save(c.index);
      std::printf("indexed %zu tables, %zu vectors, model %s\n", idx.tables().size(),
                  idx.vector_count(), fingerprint_hex(idx.fingerprint()).substr(0, 16).c_str());
    } else if (*serve) {
      RciService service(load_models(c));
      if (!c.tables.empty()) {
        for (auto& t : load_tables(c.tables)) service.add_table(std::move(t));
      }
      HttpServer server(service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "serving %zu tables on %s:%d\n", service.table_count(), host.c_str(),
                   port);
      if (!server.listen(host, port)) {
        std::fprintf(stderr, "cannot bind %s:%d\n", host.c_str(), port);
        return 1;
      }
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
