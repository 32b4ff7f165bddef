#include <doctest.h>

#include <thread>

#include "rci/errors.hpp"
#include "rci/eval.hpp"
#include "rci/service.hpp"

#include <httplib.h>

using namespace rci;
using nlohmann::json;

namespace {

nlohmann::json strip_timing(nlohmann::json j) {
  j.erase("timing");
  return j;
}

struct Fixture {
  RciService service;
  std::shared_ptr<OracleScorer> oracle = std::make_shared<OracleScorer>();
  std::vector<QAInstance> questions;
  std::vector<Table> tables;

  explicit Fixture(int n_tables) {
    GeneratorConfig g;
    g.train = n_tables;
    g.dev = 1;
    g.test = 1;
    g.seed = 21;
    const auto corpus = generate_synthetic_corpus(g);
    for (const auto& q : corpus.train.questions()) {
      const Table& t = corpus.train.table(q.table_id);
      service.add_table(t);
      tables.push_back(t);
      oracle->add(t.id(), q.question, *q.targets);
      questions.push_back(q);
    }
    ModelSet models;
    models.scorer = oracle;
    service.swap_models(models);
  }
};

}  // namespace

TEST_CASE("oracle pipeline on a 2x2 table") {
  RciService service;
  service.add_table(Table("small", {"A", "B"}, {{"a1", "b1"}, {"a2", "b2"}}));
  auto oracle = std::make_shared<OracleScorer>();
  oracle->add("small", "which b for a1", {{1, 2}});
  ModelSet models;
  models.scorer = oracle;
  service.swap_models(models);
  AskRequest req;
  req.table_id = "small";
  req.question = "which b for a1";
  const auto resp = service.ask(req);
  REQUIRE_FALSE(resp.topk.empty());
  CHECK(resp.topk[0].cell == CellCoord{1, 2});
  CHECK(resp.topk[0].text == "b1");
  CHECK(resp.heatmap.argmax == CellCoord{1, 2});
  REQUIRE(resp.answer.has_value());
  CHECK(resp.answer->kind == AggAnswer::Kind::kCellList);
  const auto j = resp.to_json();
  CHECK(j["answer"]["kind"] == "cell_list");
  CHECK_FALSE(j["answer"].contains("value"));
  CHECK(j["heatmap"]["argmax"] == json::array({1, 2}));
}

TEST_CASE("oracle pipeline on twenty fixture tables") {
  Fixture f(20);
  CHECK(f.service.table_count() == 20);
  for (const auto& q : f.questions) {
    AskRequest req;
    req.table_id = q.table_id;
    req.question = q.question;
    req.k = 5;
    const auto resp = f.service.ask(req);
    REQUIRE_FALSE(resp.topk.empty());
    CHECK(q.targets->count(resp.topk[0].cell) == 1);
    CHECK(resp.heatmap.argmax == resp.topk[0].cell);
    const auto grid = combine_scores(resp.row_probs, resp.col_probs);
    const double max = resp.topk[0].score;
    for (int i = 0; i < grid.rows(); ++i) {
      for (int j = 0; j < grid.cols(); ++j) {
        CHECK(resp.heatmap.intensities[i][j] == doctest::Approx(grid.cell_scores[i][j] / max));
      }
    }
    for (const auto& c : resp.topk) CHECK(c.score == grid.score(c.cell));
  }
}

TEST_CASE("aggregation answers and unanswerable questions") {
  RciService service;
  service.add_table(Table("w", {"Team", "Wins"}, {{"Cubs", "3"}, {"Rovers", "5"}, {"Pilots", "x"}}));
  auto oracle = std::make_shared<OracleScorer>();
  oracle->add("w", "total wins", {{1, 2}, {2, 2}});
  oracle->add("w", "wins of pilots", {{3, 2}});
  ModelSet models;
  models.scorer = oracle;
  models.question_classifier = std::make_shared<FixedQuestionClassifier>(AggType::kSum);
  service.swap_models(models);
  AskRequest req{"w", "total wins", ClassifierKind::kInteraction, 10, 0.5};
  const auto resp = service.ask(req);
  CHECK(resp.predicted_agg == AggType::kSum);
  REQUIRE(resp.answer.has_value());
  CHECK(resp.answer->value == 8.0);
  CHECK(resp.to_json()["answer"]["value"] == 8.0);

  req.question = "wins of pilots";
  const auto bad = service.ask(req);
  CHECK_FALSE(bad.answer.has_value());
  CHECK_FALSE(bad.answer_error.empty());
  CHECK(bad.to_json()["answer"]["kind"] == "unanswerable");
}

TEST_CASE("request validation and errors") {
  Fixture f(2);
  const auto& q = f.questions[0];
  auto post = [&](const json& body) { return f.service.handle("POST", "/ask", body.dump()); };
  auto r = post({{"table_id", q.table_id}, {"question", q.question}});
  CHECK(r.status == 200);
  r = post({{"question", q.question}});
  CHECK(r.status == 400);
  CHECK(r.body["field"] == "table_id");
  r = post({{"table_id", q.table_id}, {"question", q.question}, {"k", 0}});
  CHECK(r.status == 400);
  CHECK(r.body["field"] == "k");
  r = post({{"table_id", q.table_id}, {"question", q.question}, {"tau", 1.5}});
  CHECK(r.body["field"] == "tau");
  r = post({{"table_id", q.table_id}, {"question", q.question}, {"mode", "fancy"}});
  CHECK(r.body["field"] == "mode");
  r = post({{"table_id", q.table_id}, {"question", "   "}});
  CHECK(r.body["field"] == "question");
  r = f.service.handle("POST", "/ask", "{broken");
  CHECK(r.status == 400);
  CHECK(r.body["code"] == "validation_error");
  r = post({{"table_id", "nope"}, {"question", "x"}});
  CHECK(r.status == 404);
  CHECK(f.service.handle("GET", "/missing", "").status == 404);

  RciService empty;
  empty.add_table(f.tables[0]);
  r = empty.handle("POST", "/ask", json{{"table_id", q.table_id}, {"question", "x"}}.dump());
  CHECK(r.status == 503);
  CHECK(r.body["code"] == "service_unavailable");
}

TEST_CASE("table endpoints") {
  RciService service;
  const json table = json::parse(R"({"header":["A","B"],"rows":[["1","2"]]})");
  auto r = service.handle("POST", "/tables", table.dump());
  REQUIRE(r.status == 200);
  const std::string id = r.body["id"];
  CHECK(service.handle("POST", "/tables", table.dump()).body["id"] == id);
  r = service.handle("GET", "/tables/" + id, "");
  CHECK(r.status == 200);
  CHECK(r.body["rows"] == table["rows"]);

  json named = table;
  named["id"] = "fixed";
  CHECK(service.handle("POST", "/tables", named.dump()).body["id"] == "fixed");
  named["rows"] = json::parse(R"([["3","4"]])");
  r = service.handle("POST", "/tables", named.dump());
  CHECK(r.status == 400);
  CHECK(r.body["field"] == "id");
  r = service.handle("POST", "/tables", R"({"header":["A","B"],"rows":[["1"]]})");
  CHECK(r.status == 400);
  CHECK(service.handle("GET", "/tables/unknown", "").status == 404);

  r = service.handle("GET", "/health", "");
  CHECK(r.status == 200);
  CHECK(r.body["models_loaded"] == false);
  CHECK(r.body["tables"] == 2);
}

TEST_CASE("responses are deterministic and concurrent reads agree") {
  Fixture f(5);
  const auto& q = f.questions[2];
  const std::string body = json{{"table_id", q.table_id}, {"question", q.question}}.dump();
  const auto first = strip_timing(f.service.handle("POST", "/ask", body).body);
  CHECK(first == strip_timing(f.service.handle("POST", "/ask", body).body));
  std::vector<json> out(8);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { out[i] = strip_timing(f.service.handle("POST", "/ask", body).body); });
  }
  for (auto& t : threads) t.join();
  for (const auto& o : out) CHECK(o == first);
}

TEST_CASE("model swap replaces the whole set") {
  Fixture f(1);
  const auto before = f.service.models();
  ModelSet next;
  next.scorer = std::make_shared<OracleScorer>(0.8, 0.2);
  f.service.swap_models(next);
  CHECK(before->scorer == f.oracle);
  CHECK(f.service.models()->scorer != f.oracle);
}

TEST_CASE("representation mode falls back without an index") {
  EncoderConfig c;
  c.tokenizer.bucket_count = 256;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 64;
  auto bundle = std::make_shared<RciModelBundle>(
      RciModelBundle{ClassifierModel::create(ClassifierKind::kInteraction, c),
                     ClassifierModel::create(ClassifierKind::kRepresentation, c),
                     SerializationMode::kDelimited});
  RciService service;
  const Table t("t", {"A", "B"}, {{"x", "y"}, {"z", "w"}});
  service.add_table(t);
  ModelSet models;
  models.bundle = bundle;
  service.swap_models(models);
  AskRequest req{"t", "what is b", ClassifierKind::kRepresentation, 3, std::nullopt};
  const auto online = service.ask(req);
  CHECK(online.index_fallback);

  models.index = std::make_shared<EmbeddingIndex>(materialize({t}, bundle->column));
  service.swap_models(models);
  const auto cached = service.ask(req);
  CHECK_FALSE(cached.index_fallback);
  CHECK(cached.col_probs == online.col_probs);

  req.mode = ClassifierKind::kInteraction;
  CHECK(service.ask(req).col_probs.size() == 2);
  auto inter_only = std::make_shared<RciModelBundle>(*bundle);
  inter_only->column = ClassifierModel::create(ClassifierKind::kInteraction, c);
  models.bundle = inter_only;
  models.index = nullptr;
  service.swap_models(models);
  req.mode = ClassifierKind::kRepresentation;
  const auto r = service.handle("POST", "/ask", json{{"table_id", "t"}, {"question", "q"}, {"mode", "representation"}}.dump());
  CHECK(r.status == 400);
  CHECK(r.body["field"] == "mode");
}

TEST_CASE("http transport") {
  Fixture f(1);
  HttpServer server(f.service);
  const int port = server.bind_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  const auto& q = f.questions[0];
  auto ask = client.Post("/ask", json{{"table_id", q.table_id}, {"question", q.question}}.dump(),
                         "application/json");
  REQUIRE(ask);
  CHECK(ask->status == 200);
  const auto j = json::parse(ask->body);
  CHECK(q.targets->count({j["topk"][0]["row"].get<int>(), j["topk"][0]["col"].get<int>()}) == 1);
  auto missing = client.Get("/tables/none");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  server.stop();
  th.join();
}
