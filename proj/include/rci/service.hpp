#pragma once
// Question answering service: table registry, the ask pipeline and its HTTP
// facade.
//
// Endpoints:
//   POST /tables       table record {id?, header, rows} -> {id}
//   GET  /tables/{id}  table record
//   POST /ask          AskRequest -> AskResponse
//   GET  /health
// Errors are {code, message, field?}.

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rci/aggregate.hpp"
#include "rci/classifiers.hpp"
#include "rci/eval.hpp"
#include "rci/rci.hpp"
#include "rci/scorer.hpp"
#include "rci/store.hpp"
#include "rci/table.hpp"

namespace rci {

class QuestionTypeClassifier {
 public:
  virtual ~QuestionTypeClassifier() = default;
  virtual AggDistribution classify(std::string_view question,
                                   const std::vector<std::string>& header) const = 0;
};

class ModelQuestionClassifier : public QuestionTypeClassifier {
 public:
  explicit ModelQuestionClassifier(std::shared_ptr<const ClassifierModel> model)
      : model_(std::move(model)) {}
  AggDistribution classify(std::string_view question,
                           const std::vector<std::string>& header) const override {
    return classify_question(question, header, *model_);
  }

 private:
  std::shared_ptr<const ClassifierModel> model_;
};

// Always predicts one type with probability 1.
class FixedQuestionClassifier : public QuestionTypeClassifier {
 public:
  explicit FixedQuestionClassifier(AggType type) : type_(type) {}
  AggDistribution classify(std::string_view, const std::vector<std::string>&) const override {
    AggDistribution d{};
    d[static_cast<int>(type_)] = 1.0;
    return d;
  }

 private:
  AggType type_;
};

// Everything a request reads. Replaced as a whole, never mutated in place.
struct ModelSet {
  std::shared_ptr<const RciModelBundle> bundle;
  std::shared_ptr<const EmbeddingIndex> index;
  std::shared_ptr<const QuestionTypeClassifier> question_classifier;  // null: lookup only
  // Replaces bundle scoring when set (tests, external scorers).
  std::shared_ptr<const TableScorer> scorer;

  bool ready() const noexcept { return bundle || scorer; }
};

struct AskRequest {
  std::string table_id;
  std::string question;
  ClassifierKind mode = ClassifierKind::kInteraction;
  int k = kDefaultTopK;
  std::optional<double> tau;

  // Throws ValidationError naming the offending field.
  static AskRequest from_json(const nlohmann::json& j);
};

struct TopCell {
  CellCoord cell;
  double score = 0;
  std::string text;
};

struct Timing {
  double encode_ms = 0;   // question classification
  double score_ms = 0;    // row and column probabilities
  double combine_ms = 0;  // intersection, ranking, heatmap, aggregation
};

struct AskResponse {
  std::string table_id;
  std::string question;
  ClassifierKind mode = ClassifierKind::kInteraction;
  AggType predicted_agg = AggType::kLookup;
  AggDistribution agg_distribution{};
  std::vector<double> row_probs;
  std::vector<double> col_probs;
  std::vector<TopCell> topk;
  Heatmap heatmap;
  double tau = kDefaultTau;
  std::optional<AggAnswer> answer;
  std::string answer_error;  // set when the aggregation was unanswerable
  bool index_fallback = false;  // representation mode scored online
  Timing timing;

  nlohmann::json to_json() const;
};

nlohmann::json heatmap_to_json(const Heatmap& h, const std::vector<TopCell>& topk);
nlohmann::json table_to_json(const Table& t);
// Throws ValidationError; `default_id` is used when the record has no id.
Table table_from_json(const nlohmann::json& j, const std::string& default_id = {});

// Runs classification, scoring, intersection, ranking, heatmap and (for
// non-lookup types) aggregation. Throws NotFoundError / ValidationError /
// ServiceUnavailable.
AskResponse answer_question(const AskRequest& request, const Table& table, const ModelSet& models);

class ServiceUnavailable : public Error {
 public:
  using Error::Error;
};

// Thread-safe table registry plus the active model set.
class RciService {
 public:
  RciService() = default;
  explicit RciService(ModelSet models) : models_(std::make_shared<ModelSet>(std::move(models))) {}

  // Atomically replaces every model at once.
  void swap_models(ModelSet models);
  std::shared_ptr<const ModelSet> models() const;

  // Returns the id. Re-adding identical content is a no-op; a different
  // table under an existing id throws ValidationError with field "id".
  std::string add_table(Table table);
  std::shared_ptr<const Table> table(const std::string& id) const;
  std::size_t table_count() const;

  AskResponse ask(const AskRequest& request) const;

  struct HttpResult {
    int status = 200;
    nlohmann::json body;
  };
  // Transport-independent request dispatch used by the HTTP server.
  HttpResult handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  mutable std::shared_mutex mu_;
  std::shared_ptr<const ModelSet> models_ = std::make_shared<ModelSet>();
  std::map<std::string, std::shared_ptr<const Table>> tables_;
};

// Blocks serving `service` until stop() is called from another thread.
class HttpServer {
 public:
  explicit HttpServer(RciService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves; returns when stopped. Returns false if binding failed.
  bool listen(const std::string& host, int port);
  // Binds to an ephemeral port; returns it (or -1). Call listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rci
