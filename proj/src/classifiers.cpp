#include "rci/classifiers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "rci/binio.hpp"
#include "rci/errors.hpp"
#include "rci/random.hpp"

namespace rci {

std::string_view kind_name(ClassifierKind k) {
  return k == ClassifierKind::kInteraction ? "interaction" : "representation";
}

ClassifierKind parse_kind(std::string_view name) {
  if (name == "interaction") return ClassifierKind::kInteraction;
  if (name == "representation") return ClassifierKind::kRepresentation;
  throw ValidationError("unknown classifier mode '" + std::string(name) + "'", "mode");
}

ClassifierModel ClassifierModel::create(ClassifierKind kind, const EncoderConfig& config,
                                        int classes) {
  ClassifierModel m;
  m.kind = kind;
  m.encoder = EncoderModel(config);
  const int in = kind == ClassifierKind::kInteraction ? config.d_model : 4 * config.d_model;
  m.head = LinearHead<float>::random(classes, in, config.seed ^ 0x9e3779b97f4a7c15ULL);
  return m;
}

RowVec<float> cls_vector(const EncoderModel& encoder, const EncodedPair& input) {
  const Mat<float> hidden = encoder.forward(input.ids, input.segments);
  return hidden.row(0);
}

RowVec<float> encode_text(const EncoderModel& encoder, std::string_view text, int segment) {
  return cls_vector(encoder, assemble_single(text, segment, encoder.config().max_len,
                                             encoder.config().tokenizer));
}

RowVec<float> interaction_distribution(const ClassifierModel& model, std::string_view question,
                                       std::string_view sequence) {
  const auto input = assemble_pair(question, sequence, model.max_tokens(), model.tokenizer());
  return softmax<float>(model.head.logits(cls_vector(model.encoder, input)));
}

float score_interaction(std::string_view question, std::string_view sequence,
                        const ClassifierModel& model) {
  return interaction_distribution(model, question, sequence)(kPositiveClass);
}

float score_representation_vectors(const RowVec<float>& question_vec,
                                   const RowVec<float>& sequence_vec,
                                   const ClassifierModel& model) {
  const int d = model.encoder.d_model();
  if (question_vec.size() != d || sequence_vec.size() != d) {
    throw ValidationError("representation vectors must have width " + std::to_string(d),
                          "vector");
  }
  const RowVec<float> v = combination_vector<float>(question_vec, sequence_vec);
  return softmax<float>(model.head.logits(v))(kPositiveClass);
}

float score_representation(std::string_view question, std::string_view sequence,
                           const ClassifierModel& model,
                           std::optional<std::span<const float>> cached_sequence_vector) {
  const RowVec<float> rq = encode_text(model.encoder, question, 0);
  RowVec<float> rc;
  if (cached_sequence_vector) {
    if (static_cast<int>(cached_sequence_vector->size()) != model.encoder.d_model()) {
      throw ValidationError("cached vector has width " +
                                std::to_string(cached_sequence_vector->size()) + ", expected " +
                                std::to_string(model.encoder.d_model()),
                            "cached_sequence_vector");
    }
    rc = Eigen::Map<const RowVec<float>>(cached_sequence_vector->data(),
                                         static_cast<Eigen::Index>(cached_sequence_vector->size()));
  } else {
    rc = encode_text(model.encoder, sequence, 1);
  }
  return score_representation_vectors(rq, rc, model);
}

std::vector<double> score_rows(const RciModelBundle& bundle, std::string_view question,
                               const Table& table) {
  std::vector<double> out;
  out.reserve(table.num_rows());
  for (int i = 1; i <= table.num_rows(); ++i) {
    out.push_back(score_interaction(question, serialize_row(table, i, bundle.format), bundle.row));
  }
  return out;
}

std::vector<double> score_columns(const RciModelBundle& bundle, std::string_view question,
                                  const Table& table) {
  std::vector<double> out;
  out.reserve(table.num_cols());
  if (bundle.column.kind == ClassifierKind::kInteraction) {
    for (int j = 1; j <= table.num_cols(); ++j) {
      out.push_back(
          score_interaction(question, serialize_column(table, j, bundle.format), bundle.column));
    }
    return out;
  }
  const RowVec<float> rq = encode_text(bundle.column.encoder, question, 0);
  for (int j = 1; j <= table.num_cols(); ++j) {
    const RowVec<float> rc =
        encode_text(bundle.column.encoder, serialize_column(table, j, bundle.format), 1);
    out.push_back(score_representation_vectors(rq, rc, bundle.column));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view kBundleMagic = "RCIB";
constexpr std::string_view kClassifierMagic = "RCIC";
constexpr std::uint8_t kContainerVersion = 1;

void check_version(std::uint8_t found, const char* what) {
  if (found != kContainerVersion) {
    throw FormatError(std::string(what) + " version mismatch: expected " +
                      std::to_string(kContainerVersion) + ", found " + std::to_string(found));
  }
}

}  // namespace

void write_classifier(std::vector<std::uint8_t>& out, const ClassifierModel& model) {
  binio::put_u8(out, static_cast<std::uint8_t>(model.kind));
  binio::put_u32(out, static_cast<std::uint32_t>(model.head.classes()));
  binio::put_u32(out, static_cast<std::uint32_t>(model.head.in_width()));
  binio::put_bytes(out, model.head.w.data(), sizeof(float) * model.head.w.size());
  binio::put_bytes(out, model.head.b.data(), sizeof(float) * model.head.b.size());
  write_encoder(out, model.encoder);
}

ClassifierModel read_classifier(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  ClassifierModel m;
  {
    binio::Reader in(bytes, pos, "classifier checkpoint");
    const std::uint8_t kind = in.u8();
    if (kind > 1) throw FormatError("classifier checkpoint: unknown kind " + std::to_string(kind));
    m.kind = static_cast<ClassifierKind>(kind);
    const auto classes = in.u32();
    const auto width = in.u32();
    if (classes == 0 || classes > 64 || width == 0 || width > (1u << 20)) {
      throw FormatError("classifier checkpoint: implausible head shape");
    }
    m.head = LinearHead<float>::zeros(static_cast<int>(classes), static_cast<int>(width));
    in.get_bytes(m.head.w.data(), sizeof(float) * m.head.w.size());
    in.get_bytes(m.head.b.data(), sizeof(float) * m.head.b.size());
  }
  m.encoder = read_encoder(bytes, pos);
  const int d = m.encoder.d_model();
  const int want = m.kind == ClassifierKind::kInteraction ? d : 4 * d;
  if (m.head.in_width() != want) {
    throw FormatError("classifier checkpoint: head width " + std::to_string(m.head.in_width()) +
                      " does not match encoder d_model " + std::to_string(d));
  }
  return m;
}

std::vector<std::uint8_t> bundle_bytes(const RciModelBundle& bundle) {
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kBundleMagic.data(), kBundleMagic.size());
  binio::put_u8(out, kContainerVersion);
  binio::put_u8(out, static_cast<std::uint8_t>(bundle.format));
  write_classifier(out, bundle.row);
  write_classifier(out, bundle.column);
  return out;
}

RciModelBundle bundle_from_bytes(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  RciModelBundle b;
  {
    binio::Reader in(bytes, pos, "bundle");
    in.expect_magic(kBundleMagic);
    check_version(in.u8(), "bundle");
    const std::uint8_t fmt = in.u8();
    if (fmt > 1) throw FormatError("bundle: unknown serialization mode " + std::to_string(fmt));
    b.format = static_cast<SerializationMode>(fmt);
  }
  b.row = read_classifier(bytes, pos);
  b.column = read_classifier(bytes, pos);
  if (b.row.kind != ClassifierKind::kInteraction) {
    throw FormatError("bundle: row model must be interaction based");
  }
  if (pos != bytes.size()) throw FormatError("bundle: trailing bytes");
  return b;
}

void save_bundle(const RciModelBundle& bundle, const std::string& path) {
  binio::write_file_atomic(path, bundle_bytes(bundle));
}

RciModelBundle load_bundle(const std::string& path) {
  return bundle_from_bytes(binio::read_file(path));
}

void save_classifier(const ClassifierModel& model, const std::string& path) {
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kClassifierMagic.data(), kClassifierMagic.size());
  binio::put_u8(out, kContainerVersion);
  write_classifier(out, model);
  binio::write_file_atomic(path, out);
}

ClassifierModel load_classifier(const std::string& path) {
  const auto bytes = binio::read_file(path);
  std::size_t pos = 0;
  {
    binio::Reader in(bytes, pos, "classifier");
    in.expect_magic(kClassifierMagic);
    check_version(in.u8(), "classifier");
  }
  auto m = read_classifier(bytes, pos);
  if (pos != bytes.size()) throw FormatError("classifier: trailing bytes");
  return m;
}

// ---------------------------------------------------------------------------
// Training

std::set<CellCoord> resolve_targets(const QAInstance& q, const Table& table,
                                    const MatchOptions& match) {
  if (q.targets) return *q.targets;
  return weak_supervise(q.answers, table, match);
}

PairSet build_training_pairs(const Dataset& data, SerializationMode mode,
                             const TokenizerConfig& tokenizer, int max_tokens, bool reweight) {
  PairSet out;
  int instance = 0;
  for (const auto& q : data.questions()) {
    const Table& t = data.table(q.table_id);
    const auto targets = resolve_targets(q, t);
    if (targets.empty()) {
      ++out.skipped;
      continue;
    }
    const RowColTargets rc = derive_targets(targets);
    auto emit = [&](Axis axis, int count, const std::set<int>& positives,
                    std::vector<TrainingPair>& dst) {
      const int pos = static_cast<int>(positives.size());
      const int neg = count - pos;
      const float pos_weight =
          (reweight && pos > 0 && neg > 0) ? static_cast<float>(neg) / static_cast<float>(pos)
                                           : 1.0f;
      for (int k = 1; k <= count; ++k) {
        TrainingPair p;
        p.input = assemble_pair(q.question, serialize(t, axis, k, mode), max_tokens, tokenizer);
        p.label = positives.count(k) ? kPositiveClass : 1;
        p.weight = p.label == kPositiveClass ? pos_weight : 1.0f;
        p.instance = instance;
        dst.push_back(std::move(p));
      }
    };
    emit(Axis::kRow, t.num_rows(), rc.rows, out.rows);
    emit(Axis::kColumn, t.num_cols(), rc.cols, out.columns);
    ++instance;
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<ParamSlot> slots_for(ClassifierModel& model, ModelGrads<float>& grads) {
  std::vector<ParamSlot> slots;
  std::vector<Mat<float>*> values, gs;
  model.encoder.mutable_params().for_each(
      [&](const std::string&, const char*, Mat<float>& m, bool) { values.push_back(&m); });
  grads.encoder.for_each(
      [&](const std::string&, const char*, Mat<float>& m, bool) { gs.push_back(&m); });
  for (std::size_t i = 0; i < values.size(); ++i) slots.push_back({values[i], gs[i]});
  slots.push_back({&model.head.w, &grads.head.w});
  slots.push_back({&model.head.b, &grads.head.b});
  return slots;
}

int argmax_first(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

template <typename Example, typename LossFn, typename EvalFn>
void run_training(ClassifierModel& model, const std::vector<Example>& examples, int batch_size,
                  const TrainConfig& config, const std::string& name, LossFn&& loss_fn,
                  EvalFn&& eval_fn, std::vector<TrainLogEntry>& curve,
                  const TrainLogger& logger, ClassifierModel& best, double& best_acc) {
  Adam adam(config.adam);
  auto grads = ModelGrads<float>::zeros_like(model.encoder, model.head);
  const auto slots = slots_for(model, grads);
  Rng rng(config.seed ^ fnv1a64(name));
  // Batches are built from whole groups; pairs of one question share a group.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    bool join = false;
    if constexpr (requires { examples[i].instance; }) {
      join = config.group_by_instance && i > 0 &&
             examples[i].instance == examples[i - 1].instance;
    }
    if (join) {
      groups.back().push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  const auto start = Clock::now();
  double window_loss = 0;
  int window = 0;
  bool out_of_time = false;
  best = model;
  best_acc = -1;
  auto emit = [&](TrainLogEntry e) {
    curve.push_back(e);
    if (logger) logger(e);
  };
  for (int epoch = 1; epoch <= config.epochs && !out_of_time; ++epoch) {
    shuffle(order, rng);
    for (std::size_t g = 0; g < order.size();) {
      std::vector<const Example*> batch;
      while (g < order.size() && static_cast<int>(batch.size()) < batch_size) {
        for (std::size_t k : groups[order[g]]) batch.push_back(&examples[k]);
        ++g;
      }
      grads.set_zero();
      const float loss = loss_fn(model, std::span<const Example* const>(batch), &grads);
      if (!std::isfinite(loss)) throw Error(name + " training diverged (non-finite loss)");
      adam.step(slots);
      window_loss += loss;
      ++window;
      if (config.log_every > 0 && adam.steps() % config.log_every == 0) {
        emit({name, epoch, adam.steps(), window_loss / window, -1, seconds_since(start)});
        window_loss = 0;
        window = 0;
      }
      if (config.time_budget_seconds > 0 && seconds_since(start) > config.time_budget_seconds) {
        out_of_time = true;
        break;
      }
    }
    const double acc = eval_fn(model);
    emit({name, epoch, adam.steps(), window > 0 ? window_loss / window : 0.0, acc,
          seconds_since(start)});
    if (acc > best_acc) {
      best_acc = acc;
      best = model;
    }
  }
}

struct ResolvedInstance {
  const QAInstance* q;
  const Table* t;
  RowColTargets targets;
};

std::vector<ResolvedInstance> answerable(const Dataset& data) {
  std::vector<ResolvedInstance> out;
  for (const auto& q : data.questions()) {
    const Table& t = data.table(q.table_id);
    const auto targets = resolve_targets(q, t);
    if (targets.empty()) continue;
    out.push_back({&q, &t, derive_targets(targets)});
  }
  return out;
}

}  // namespace

double row_accuracy(const RciModelBundle& bundle, const Dataset& dev) {
  const auto items = answerable(dev);
  if (items.empty()) return 0.0;
  int ok = 0;
  for (const auto& it : items) {
    const auto probs = score_rows(bundle, it.q->question, *it.t);
    ok += it.targets.rows.count(argmax_first(probs) + 1) ? 1 : 0;
  }
  return static_cast<double>(ok) / items.size();
}

double column_accuracy(const RciModelBundle& bundle, const Dataset& dev) {
  const auto items = answerable(dev);
  if (items.empty()) return 0.0;
  int ok = 0;
  for (const auto& it : items) {
    const auto probs = score_columns(bundle, it.q->question, *it.t);
    ok += it.targets.cols.count(argmax_first(probs) + 1) ? 1 : 0;
  }
  return static_cast<double>(ok) / items.size();
}

TrainResult train_rci(const Dataset& train, const Dataset* dev, const TrainConfig& config,
                      const TrainLogger& logger) {
  if (train.questions().empty()) throw ValidationError("training dataset is empty", "dataset");
  const int max_tokens = config.encoder.max_len;
  const auto& tok = config.encoder.tokenizer;
  PairSet pairs = build_training_pairs(train, config.format, tok, max_tokens,
                                       config.reweight_positive);
  if (pairs.rows.empty()) {
    throw ValidationError("no training instance has resolvable targets (" +
                              std::to_string(pairs.skipped) + " skipped)",
                          "dataset");
  }

  TrainResult result;
  result.skipped = pairs.skipped;

  EncoderConfig row_cfg = config.encoder;
  EncoderConfig col_cfg = config.encoder;
  col_cfg.seed = config.encoder.seed + 1;
  RciModelBundle bundle;
  bundle.format = config.format;
  bundle.row = ClassifierModel::create(ClassifierKind::kInteraction, row_cfg);
  bundle.column = ClassifierModel::create(config.column_kind, col_cfg);
  RciModelBundle best = bundle;

  auto interaction_fn = [](ClassifierModel& m, std::span<const TrainingPair* const> batch,
                           ModelGrads<float>* g) {
    return interaction_loss<float>(m.encoder, m.head, batch, g);
  };

  // Row model.
  {
    auto eval = [&](const ClassifierModel& m) {
      if (!dev) return -1.0;
      RciModelBundle probe = bundle;
      probe.row = m;
      return row_accuracy(probe, *dev);
    };
    run_training(bundle.row, pairs.rows, config.batch_size, config, "row", interaction_fn, eval,
                 result.curve, logger, best.row, result.best_row_dev_accuracy);
  }

  // Column model.
  auto col_eval = [&](const ClassifierModel& m) {
    if (!dev) return -1.0;
    RciModelBundle probe = bundle;
    probe.column = m;
    return column_accuracy(probe, *dev);
  };
  if (config.column_kind == ClassifierKind::kInteraction) {
    run_training(bundle.column, pairs.columns, config.batch_size, config, "column",
                 interaction_fn, col_eval, result.curve, logger, best.column,
                 result.best_column_dev_accuracy);
  } else {
    std::vector<RepresentationExample> examples;
    for (const auto& it : answerable(train)) {
      RepresentationExample ex;
      ex.question = assemble_single(it.q->question, 0, max_tokens, tok);
      const int n = it.t->num_cols();
      const int pos = static_cast<int>(it.targets.cols.size());
      const float pos_w = (config.reweight_positive && pos < n)
                              ? static_cast<float>(n - pos) / static_cast<float>(pos)
                              : 1.0f;
      for (int j = 1; j <= n; ++j) {
        ex.sequences.push_back(
            assemble_single(serialize_column(*it.t, j, config.format), 1, max_tokens, tok));
        const bool positive = it.targets.cols.count(j) > 0;
        ex.labels.push_back(positive ? kPositiveClass : 1);
        ex.weights.push_back(positive ? pos_w : 1.0f);
      }
      examples.push_back(std::move(ex));
    }
    auto repr_fn = [](ClassifierModel& m, std::span<const RepresentationExample* const> batch,
                      ModelGrads<float>* g) {
      return representation_loss<float>(m.encoder, m.head, batch, g);
    };
    const int per_batch = std::max(1, config.batch_size / 4);
    run_training(bundle.column, examples, per_batch, config, "column", repr_fn, col_eval,
                 result.curve, logger, best.column, result.best_column_dev_accuracy);
  }

  result.final_bundle = std::move(bundle);
  result.best_bundle = dev ? std::move(best) : result.final_bundle;
  return result;
}

QuestionTrainResult train_question_classifier(const Dataset& train, const Dataset* dev,
                                              const TrainConfig& config,
                                              const TrainLogger& logger) {
  const int max_tokens = config.encoder.max_len;
  const auto& tok = config.encoder.tokenizer;
  auto make_pairs = [&](const Dataset& data) {
    std::vector<TrainingPair> out;
    for (const auto& q : data.questions()) {
      if (!q.agg) continue;
      TrainingPair p;
      p.input = assemble_pair(q.question, serialize_header(data.table(q.table_id).header()),
                              max_tokens, tok);
      p.label = static_cast<int>(*q.agg);
      p.instance = static_cast<int>(out.size());
      out.push_back(std::move(p));
    }
    return out;
  };
  const auto pairs = make_pairs(train);
  if (pairs.empty()) throw ValidationError("no training question carries an agg label", "agg");
  const auto dev_pairs = dev ? make_pairs(*dev) : std::vector<TrainingPair>{};

  QuestionTrainResult result;
  result.model = ClassifierModel::create(ClassifierKind::kInteraction, config.encoder, kNumAggTypes);
  auto eval = [&](const ClassifierModel& m) {
    if (dev_pairs.empty()) return -1.0;
    int ok = 0;
    for (const auto& p : dev_pairs) {
      RowVec<float>::Index best = 0;
      m.head.logits(cls_vector(m.encoder, p.input)).maxCoeff(&best);
      ok += best == p.label ? 1 : 0;
    }
    return static_cast<double>(ok) / dev_pairs.size();
  };
  auto loss_fn = [](ClassifierModel& m, std::span<const TrainingPair* const> batch,
                    ModelGrads<float>* g) {
    return interaction_loss<float>(m.encoder, m.head, batch, g);
  };
  ClassifierModel best;
  run_training(result.model, pairs, config.batch_size, config, "question", loss_fn, eval,
               result.curve, logger, best, result.dev_accuracy);
  if (dev) result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckReport grad_check(const Encoder<double>& encoder, const LinearHead<double>& head,
                           const GradCheckObjective& objective, double epsilon, int per_tensor,
                           std::uint64_t seed, std::span<const int> active_tokens,
                           int active_positions) {
  auto grads = ModelGrads<double>::zeros_like(encoder, head);
  const double base = objective(encoder, head, &grads);
  if (!std::isfinite(base)) throw Error("grad_check: loss is not finite");

  Encoder<double> enc = encoder;
  LinearHead<double> h = head;
  Rng rng(seed);
  GradCheckReport report;
  std::set<std::string> families;

  struct Target {
    std::string name;
    std::string family;
    Mat<double>* value;
    const Mat<double>* grad;
  };
  std::vector<Target> targets;
  {
    std::vector<std::pair<std::string, std::string>> names;
    std::vector<Mat<double>*> values;
    std::vector<const Mat<double>*> gs;
    enc.mutable_params().for_each([&](const std::string& n, const char* f, Mat<double>& m, bool) {
      names.emplace_back(n, f);
      values.push_back(&m);
    });
    grads.encoder.for_each(
        [&](const std::string&, const char*, Mat<double>& m, bool) { gs.push_back(&m); });
    for (std::size_t i = 0; i < values.size(); ++i) {
      targets.push_back({names[i].first, names[i].second, values[i], gs[i]});
    }
    targets.push_back({"head.w", "head.w", &h.w, &grads.head.w});
    targets.push_back({"head.b", "head.b", &h.b, &grads.head.b});
  }

  for (auto& t : targets) {
    for (int s = 0; s < per_tensor; ++s) {
      Eigen::Index r, c;
      if (t.family == "tok_emb" && !active_tokens.empty()) {
        r = active_tokens[uniform_index(rng, active_tokens.size())];
      } else if (t.family == "pos_emb" && active_positions > 0) {
        r = static_cast<Eigen::Index>(uniform_index(rng, active_positions));
      } else {
        r = static_cast<Eigen::Index>(uniform_index(rng, t.value->rows()));
      }
      c = static_cast<Eigen::Index>(uniform_index(rng, t.value->cols()));
      double& w = (*t.value)(r, c);
      const double saved = w;
      w = saved + epsilon;
      const double plus = objective(enc, h, nullptr);
      w = saved - epsilon;
      const double minus = objective(enc, h, nullptr);
      w = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw Error("grad_check: loss is not finite under perturbation");
      }
      GradCheckSample sample;
      sample.tensor = t.name;
      sample.family = t.family;
      sample.index = r * t.value->cols() + c;
      sample.analytic = (*t.grad)(r, c);
      sample.numeric = (plus - minus) / (2 * epsilon);
      const double denom =
          std::max({std::abs(sample.analytic), std::abs(sample.numeric), 1e-8});
      sample.rel_error = std::abs(sample.analytic - sample.numeric) / denom;
      report.max_rel_error = std::max(report.max_rel_error, sample.rel_error);
      families.insert(t.family);
      report.samples.push_back(std::move(sample));
    }
  }
  report.families.assign(families.begin(), families.end());
  return report;
}

}  // namespace rci
