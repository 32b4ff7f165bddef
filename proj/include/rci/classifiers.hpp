#pragma once
// Row/column sequence-pair classifiers (interaction and representation),
// the model bundle, and training over weakly supervised targets.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rci/dataset.hpp"
#include "rci/encoder.hpp"
#include "rci/heads.hpp"
#include "rci/optimizer.hpp"
#include "rci/serialize.hpp"

namespace rci {

enum class ClassifierKind : std::uint8_t { kInteraction, kRepresentation };

std::string_view kind_name(ClassifierKind k);
ClassifierKind parse_kind(std::string_view name);

// Encoder plus linear head. Interaction heads read the joint CLS vector
// (2 x d); representation heads read v_qc (2 x 4d); the question
// classifier head has one row per aggregation type. Class 0 of the binary
// heads is "contains the answer".
struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::kInteraction;
  EncoderModel encoder;
  LinearHead<float> head;

  static ClassifierModel create(ClassifierKind kind, const EncoderConfig& config, int classes = 2);
  int max_tokens() const noexcept { return encoder.config().max_len; }
  const TokenizerConfig& tokenizer() const noexcept { return encoder.config().tokenizer; }
};

inline constexpr int kPositiveClass = 0;

// CLS vector of an encoded sequence.
RowVec<float> cls_vector(const EncoderModel& encoder, const EncodedPair& input);

// CLS vector of a single text, encoded as [CLS] text [SEP]. Questions use
// segment 0 and table sequences segment 1.
RowVec<float> encode_text(const EncoderModel& encoder, std::string_view text, int segment);

// Softmax over the head's classes for a question/sequence pair.
RowVec<float> interaction_distribution(const ClassifierModel& model, std::string_view question,
                                       std::string_view sequence);

float score_interaction(std::string_view question, std::string_view sequence,
                        const ClassifierModel& model);

// Positive-class probability from precomputed vectors.
float score_representation_vectors(const RowVec<float>& question_vec,
                                   const RowVec<float>& sequence_vec, const ClassifierModel& model);

// When `cached_sequence_vector` is given it stands in for the encoding of
// `sequence`. Throws ValidationError on a width mismatch.
float score_representation(std::string_view question, std::string_view sequence,
                           const ClassifierModel& model,
                           std::optional<std::span<const float>> cached_sequence_vector = {});

// Row model is always interaction based; the column model may be either.
struct RciModelBundle {
  ClassifierModel row;
  ClassifierModel column;
  SerializationMode format = SerializationMode::kDelimited;
};

// Per-row and per-column positive probabilities of a question over a table.
std::vector<double> score_rows(const RciModelBundle& bundle, std::string_view question,
                               const Table& table);
std::vector<double> score_columns(const RciModelBundle& bundle, std::string_view question,
                                  const Table& table);

// Container: magic "RCIB", version, format byte, then for the row and the
// column model a kind byte, a head block and an encoder checkpoint.
void write_classifier(std::vector<std::uint8_t>& out, const ClassifierModel& model);
ClassifierModel read_classifier(std::span<const std::uint8_t> bytes, std::size_t& pos);
std::vector<std::uint8_t> bundle_bytes(const RciModelBundle& bundle);
RciModelBundle bundle_from_bytes(std::span<const std::uint8_t> bytes);
void save_bundle(const RciModelBundle& bundle, const std::string& path);
RciModelBundle load_bundle(const std::string& path);

// Single classifier file ("RCIC"), used for the question classifier.
void save_classifier(const ClassifierModel& model, const std::string& path);
ClassifierModel load_classifier(const std::string& path);

// ---------------------------------------------------------------------------
// Training

struct TrainingPair {
  EncodedPair input;
  int label = 1;  // kPositiveClass when the row/column holds an answer
  float weight = 1.0f;
  int instance = 0;
};

// Resolved targets for a question: declared targets when present, weak
// supervision otherwise. Empty when the answer is not found.
std::set<CellCoord> resolve_targets(const QAInstance& q, const Table& table,
                                    const MatchOptions& match = {});

struct PairSet {
  std::vector<TrainingPair> rows;
  std::vector<TrainingPair> columns;
  int skipped = 0;
};

// One pair per row and per column of the gold table for each answerable
// instance. Positives are reweighted by the instance's negative/positive
// ratio when `reweight` is set.
PairSet build_training_pairs(const Dataset& data, SerializationMode mode,
                             const TokenizerConfig& tokenizer, int max_tokens,
                             bool reweight = true);

struct TrainConfig {
  EncoderConfig encoder;
  ClassifierKind column_kind = ClassifierKind::kInteraction;
  SerializationMode format = SerializationMode::kDelimited;
  AdamConfig adam;
  int epochs = 3;
  int batch_size = 16;
  bool reweight_positive = true;
  // Keep all pairs of a question in the same batch.
  bool group_by_instance = true;
  std::uint64_t seed = 1;
  // Wall-clock cap per model in seconds (0 = none). Training stops after the
  // batch that crosses it.
  double time_budget_seconds = 0;
  int log_every = 50;
};

struct TrainLogEntry {
  std::string model;  // "row", "column" or "question"
  int epoch = 0;
  long step = 0;
  double loss = 0;      // mean weighted loss over the last log window
  double dev_accuracy = -1;  // < 0 when not evaluated at this entry
  double seconds = 0;
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

struct TrainResult {
  RciModelBundle final_bundle;
  RciModelBundle best_bundle;
  std::vector<TrainLogEntry> curve;
  int skipped = 0;
  double best_row_dev_accuracy = -1;
  double best_column_dev_accuracy = -1;
};

// Top-1 accuracy of a row or column model on `dev`: the fraction of answerable
// instances whose highest scoring row (column) is a target row (column).
double row_accuracy(const RciModelBundle& bundle, const Dataset& dev);
double column_accuracy(const RciModelBundle& bundle, const Dataset& dev);

// Throws ValidationError when no instance has resolvable targets.
TrainResult train_rci(const Dataset& train, const Dataset* dev, const TrainConfig& config,
                      const TrainLogger& logger = {});

// Six-way classifier over (question, serialized header).
struct QuestionTrainResult {
  ClassifierModel model;
  std::vector<TrainLogEntry> curve;
  double dev_accuracy = -1;
};
QuestionTrainResult train_question_classifier(const Dataset& train, const Dataset* dev,
                                              const TrainConfig& config,
                                              const TrainLogger& logger = {});

// ---------------------------------------------------------------------------
// Differentiable objectives, shared by training and gradient checking.

template <typename T>
struct ModelGrads {
  EncoderParams<T> encoder;
  LinearHead<T> head;

  static ModelGrads zeros_like(const Encoder<T>& enc, const LinearHead<T>& head) {
    return ModelGrads{EncoderParams<T>::zeros(enc.config()),
                      LinearHead<T>::zeros(head.classes(), head.in_width())};
  }
  void set_zero() {
    encoder.set_zero();
    head.set_zero();
  }
};

// Weighted cross-entropy over interaction pairs (also used for the question
// classifier). Returns sum(w * ce) / sum(w); gradients are likewise
// normalized and accumulated into `grads` when non-null.
template <typename T>
T interaction_loss(const Encoder<T>& encoder, const LinearHead<T>& head,
                   std::span<const TrainingPair* const> batch, ModelGrads<T>* grads) {
  T total_w = 0;
  for (const auto* p : batch) total_w += static_cast<T>(p->weight);
  if (total_w <= 0) return T(0);
  T loss = 0;
  EncoderTape<T> tape;
  for (const auto* p : batch) {
    const T w = static_cast<T>(p->weight) / total_w;
    const Mat<T> hidden = encoder.forward(p->input.ids, p->input.segments, grads ? &tape : nullptr);
    const RowVec<T> cls = hidden.row(0);
    RowVec<T> dcls;
    loss += head_cross_entropy<T>(head, cls, p->label, w, grads ? &grads->head : nullptr,
                                  grads ? &dcls : nullptr);
    if (grads) {
      Mat<T> dh = Mat<T>::Zero(hidden.rows(), hidden.cols());
      dh.row(0) = dcls;
      encoder.backward(tape, dh, grads->encoder);
    }
  }
  return loss;
}

// One representation example: the question and a set of column sequences
// for the same question, each with its own label and weight.
struct RepresentationExample {
  EncodedPair question;
  std::vector<EncodedPair> sequences;
  std::vector<int> labels;
  std::vector<float> weights;
};

template <typename T>
T representation_loss(const Encoder<T>& encoder, const LinearHead<T>& head,
                      std::span<const RepresentationExample* const> batch, ModelGrads<T>* grads) {
  T total_w = 0;
  for (const auto* ex : batch) {
    for (float w : ex->weights) total_w += static_cast<T>(w);
  }
  if (total_w <= 0) return T(0);
  T loss = 0;
  for (const auto* ex : batch) {
    EncoderTape<T> qtape;
    const Mat<T> qh = encoder.forward(ex->question.ids, ex->question.segments,
                                      grads ? &qtape : nullptr);
    const RowVec<T> rq = qh.row(0);
    RowVec<T> drq_total = RowVec<T>::Zero(rq.size());
    for (std::size_t s = 0; s < ex->sequences.size(); ++s) {
      const T w = static_cast<T>(ex->weights[s]) / total_w;
      EncoderTape<T> stape;
      const Mat<T> sh = encoder.forward(ex->sequences[s].ids, ex->sequences[s].segments,
                                        grads ? &stape : nullptr);
      const RowVec<T> rc = sh.row(0);
      const RowVec<T> v = combination_vector<T>(rq, rc);
      RowVec<T> dv;
      loss += head_cross_entropy<T>(head, v, ex->labels[s], w, grads ? &grads->head : nullptr,
                                    grads ? &dv : nullptr);
      if (grads) {
        RowVec<T> drq, drc;
        combination_vector_backward<T>(rq, rc, dv, drq, drc);
        drq_total += drq;
        Mat<T> dh = Mat<T>::Zero(sh.rows(), sh.cols());
        dh.row(0) = drc;
        encoder.backward(stape, dh, grads->encoder);
      }
    }
    if (grads) {
      Mat<T> dh = Mat<T>::Zero(qh.rows(), qh.cols());
      dh.row(0) = drq_total;
      encoder.backward(qtape, dh, grads->encoder);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckSample {
  std::string tensor;
  std::string family;
  Eigen::Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::vector<GradCheckSample> samples;
  std::vector<std::string> families;  // distinct families covered
};

// Loss (and, when grads is non-null, its gradient) of a fixed micro-batch.
using GradCheckObjective =
    std::function<double(const Encoder<double>&, const LinearHead<double>&, ModelGrads<double>*)>;

// Central differences on `per_tensor` sampled coordinates of every tensor.
// For the embedding tables only rows in `active_tokens` / `active_positions`
// are sampled since the others have identically zero gradient. Relative
// error is |a - n| / max(|a|, |n|, 1e-8). Throws Error on a non-finite loss.
GradCheckReport grad_check(const Encoder<double>& encoder, const LinearHead<double>& head,
                           const GradCheckObjective& objective, double epsilon, int per_tensor,
                           std::uint64_t seed, std::span<const int> active_tokens,
                           int active_positions);

}  // namespace rci
