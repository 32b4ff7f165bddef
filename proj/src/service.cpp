#include "rci/service.hpp"

#include <chrono>

#include <httplib.h>

#include "rci/errors.hpp"
#include "rci/tokenizer.hpp"

namespace rci {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

json error_body(std::string_view code, std::string_view message, std::string_view field = {}) {
  json j = {{"code", code}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  return j;
}

json cell_json(const CellCoord& c, double score, const std::string& text) {
  return {{"row", c.row}, {"col", c.col}, {"score", score}, {"text", text}};
}

}  // namespace

AskRequest AskRequest::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("request body must be an object", "body");
  AskRequest r;
  auto str = [&](const char* name, bool required) -> std::optional<std::string> {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) throw ValidationError(std::string("missing field '") + name + "'", name);
      return std::nullopt;
    }
    if (!it->is_string()) throw ValidationError(std::string("'") + name + "' must be a string", name);
    return it->get<std::string>();
  };
  r.table_id = *str("table_id", true);
  r.question = *str("question", true);
  if (r.question.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("'question' must be non-empty", "question");
  }
  if (auto m = str("mode", false)) {
    try {
      r.mode = parse_kind(*m);
    } catch (const ValidationError&) {
      throw ValidationError("'mode' must be interaction or representation", "mode");
    }
  }
  if (auto it = j.find("k"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 1 || it->get<long long>() > 1000000) {
      throw ValidationError("'k' must be a positive integer", "k");
    }
    r.k = it->get<int>();
  }
  if (auto it = j.find("tau"); it != j.end() && !it->is_null()) {
    if (!it->is_number() || !(it->get<double>() >= 0.0 && it->get<double>() <= 1.0)) {
      throw ValidationError("'tau' must be a number in [0, 1]", "tau");
    }
    r.tau = it->get<double>();
  }
  return r;
}

json heatmap_to_json(const Heatmap& h, const std::vector<TopCell>& topk) {
  json top = json::array();
  for (const auto& c : topk) {
    top.push_back({{"row", c.cell.row}, {"col", c.cell.col}, {"score", c.score}});
  }
  return {{"table_id", h.table_id},
          {"intensities", h.intensities},
          {"argmax", {h.argmax.row, h.argmax.col}},
          {"topk", std::move(top)}};
}

json AskResponse::to_json() const {
  json dist = json::object();
  for (int k = 0; k < kNumAggTypes; ++k) {
    dist[std::string(agg_name(static_cast<AggType>(k)))] = agg_distribution[k];
  }
  json top = json::array();
  for (const auto& c : topk) top.push_back(cell_json(c.cell, c.score, c.text));
  json j = {{"table_id", table_id},
            {"question", question},
            {"mode", kind_name(mode)},
            {"agg", {{"predicted", agg_name(predicted_agg)}, {"distribution", std::move(dist)}}},
            {"row_probs", row_probs},
            {"col_probs", col_probs},
            {"topk", std::move(top)},
            {"heatmap", heatmap_to_json(heatmap, topk)},
            {"tau", tau},
            {"index_fallback", index_fallback},
            {"timing",
             {{"encode_ms", timing.encode_ms},
              {"score_ms", timing.score_ms},
              {"combine_ms", timing.combine_ms}}}};
  if (answer) {
    json cells = json::array();
    for (const auto& c : answer->cells) cells.push_back(cell_json(c.cell, c.score, c.text));
    json a = {{"agg", agg_name(answer->agg)}, {"cells", std::move(cells)}, {"fallback", answer->fallback}};
    if (answer->kind == AggAnswer::Kind::kCellList) {
      a["kind"] = "cell_list";
    } else {
      a["kind"] = "number";
      a["value"] = answer->value;
      if (answer->agg != AggType::kCount) a["parsed_count"] = answer->parsed_count;
      if (answer->source) {
        a["source"] = cell_json(answer->source->cell, answer->source->score, answer->source->text);
      }
    }
    j["answer"] = std::move(a);
  } else {
    j["answer"] = {{"kind", "unanswerable"}, {"message", answer_error}};
  }
  return j;
}

json table_to_json(const Table& t) {
  return {{"id", t.id()}, {"header", t.header()}, {"rows", t.rows()}};
}

Table table_from_json(const json& j, const std::string& default_id) {
  if (!j.is_object()) throw ValidationError("table record must be an object", "body");
  std::string id = default_id;
  if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>().empty()) {
      throw ValidationError("'id' must be a non-empty string", "id");
    }
    id = it->get<std::string>();
  }
  auto strings = [](const json& a, const char* field) {
    if (!a.is_array()) throw ValidationError(std::string("'") + field + "' must be an array", field);
    std::vector<std::string> out;
    for (const auto& v : a) {
      if (!v.is_string()) {
        throw ValidationError(std::string("'") + field + "' must contain strings", field);
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  auto h = j.find("header");
  if (h == j.end()) throw ValidationError("missing field 'header'", "header");
  auto r = j.find("rows");
  if (r == j.end() || !r->is_array()) throw ValidationError("'rows' must be an array", "rows");
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : *r) rows.push_back(strings(row, "rows"));
  return Table(std::move(id), strings(*h, "header"), std::move(rows));
}

AskResponse answer_question(const AskRequest& request, const Table& table,
                            const ModelSet& models) {
  if (!models.ready()) throw ServiceUnavailable("no model bundle is loaded");
  if (request.k < 1) throw ValidationError("'k' must be positive", "k");
  if (request.tau && !(*request.tau >= 0.0 && *request.tau <= 1.0)) {
    throw ValidationError("'tau' must lie in [0, 1]", "tau");
  }
  AskResponse resp;
  resp.table_id = table.id();
  resp.question = request.question;
  resp.mode = request.mode;
  resp.tau = request.tau.value_or(kDefaultTau);

  auto t0 = Clock::now();
  if (models.question_classifier) {
    resp.agg_distribution = models.question_classifier->classify(request.question, table.header());
  } else {
    resp.agg_distribution[static_cast<int>(AggType::kLookup)] = 1.0;
  }
  resp.predicted_agg = most_likely(resp.agg_distribution);
  resp.timing.encode_ms = ms_since(t0);

  t0 = Clock::now();
  AxisProbs probs;
  if (models.scorer) {
    probs = models.scorer->score(request.question, table);
  } else if (request.mode == ClassifierKind::kRepresentation) {
    if (models.bundle->column.kind != ClassifierKind::kRepresentation) {
      throw ValidationError("the loaded column model is interaction based", "mode");
    }
    bool indexed = false;
    if (models.index && models.index->contains(table.id())) {
      try {
        probs = IndexedScorer(*models.bundle, *models.index).score(request.question, table);
        indexed = true;
      } catch (const StaleIndexError&) {
      }
    }
    if (!indexed) {
      probs = BundleScorer(*models.bundle).score(request.question, table);
      resp.index_fallback = true;
    }
  } else {
    probs = BundleScorer(*models.bundle).score(request.question, table);
  }
  resp.timing.score_ms = ms_since(t0);

  t0 = Clock::now();
  const CellScoreGrid grid = combine_scores(table, probs.rows, probs.cols);
  resp.row_probs = grid.row_probs;
  resp.col_probs = grid.col_probs;
  for (const auto& rc : rank_cells(grid, request.k)) {
    resp.topk.push_back({rc.cell, rc.score, table.cell(rc.cell)});
  }
  resp.heatmap = build_heatmap(grid);
  try {
    resp.answer = execute_aggregation(grid, table, resp.predicted_agg, resp.tau);
  } catch (const UnanswerableError& e) {
    resp.answer_error = e.what();
  }
  resp.timing.combine_ms = ms_since(t0);
  return resp;
}

void RciService::swap_models(ModelSet models) {
  auto next = std::make_shared<const ModelSet>(std::move(models));
  std::unique_lock lock(mu_);
  models_ = std::move(next);
}

std::shared_ptr<const ModelSet> RciService::models() const {
  std::shared_lock lock(mu_);
  return models_;
}

std::string RciService::add_table(Table table) {
  auto ptr = std::make_shared<const Table>(std::move(table));
  std::unique_lock lock(mu_);
  auto [it, inserted] = tables_.emplace(ptr->id(), ptr);
  if (!inserted && !(*it->second == *ptr)) {
    throw ValidationError("table id '" + ptr->id() + "' already holds a different table", "id");
  }
  return ptr->id();
}

std::shared_ptr<const Table> RciService::table(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = tables_.find(id);
  if (it == tables_.end()) throw NotFoundError("unknown table '" + id + "'");
  return it->second;
}

std::size_t RciService::table_count() const {
  std::shared_lock lock(mu_);
  return tables_.size();
}

AskResponse RciService::ask(const AskRequest& request) const {
  const auto t = table(request.table_id);
  const auto models_now = models();
  return answer_question(request, *t, *models_now);
}

RciService::HttpResult RciService::handle(std::string_view method, std::string_view path,
                                          std::string_view body) {
  try {
    auto parse_body = [&] {
      try {
        return json::parse(body);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what(), "body");
      }
    };
    if (method == "GET" && path == "/health") {
      const auto m = models();
      return {200,
              {{"status", "ok"},
               {"models_loaded", m->ready()},
               {"index_loaded", static_cast<bool>(m->index)},
               {"question_classifier", static_cast<bool>(m->question_classifier)},
               {"tables", table_count()}}};
    }
    if (method == "POST" && path == "/tables") {
      const json j = parse_body();
      std::string default_id;
      if (!j.contains("id")) {
        default_id = "table-" + std::to_string(fnv1a64(j.dump()) % 100000000ULL);
      }
      const std::string id = add_table(table_from_json(j, default_id));
      return {200, {{"id", id}}};
    }
    constexpr std::string_view kTablesPrefix = "/tables/";
    if (method == "GET" && path.substr(0, kTablesPrefix.size()) == kTablesPrefix) {
      return {200, table_to_json(*table(std::string(path.substr(kTablesPrefix.size()))))};
    }
    if (method == "POST" && path == "/ask") {
      return {200, ask(AskRequest::from_json(parse_body())).to_json()};
    }
    return {404, error_body("not_found", "no route for " + std::string(method) + " " +
                                             std::string(path))};
  } catch (const ValidationError& e) {
    return {400, error_body("validation_error", e.what(), e.field())};
  } catch (const NotFoundError& e) {
    return {404, error_body("not_found", e.what())};
  } catch (const ServiceUnavailable& e) {
    return {503, error_body("service_unavailable", e.what())};
  } catch (const std::exception& e) {
    return {500, error_body("internal_error", e.what())};
  }
}

struct HttpServer::Impl {
  RciService& service;
  httplib::Server server;
  explicit Impl(RciService& s) : service(s) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      auto result = service.handle(req.method, req.path, req.body);
      res.status = result.status;
      res.set_content(result.body.dump(), "application/json");
    };
    server.Get("/health", route);
    server.Post("/tables", route);
    server.Get(R"(/tables/.+)", route);
    server.Post("/ask", route);
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  }
};

HttpServer::HttpServer(RciService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace rci
