#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "rci/classifiers.hpp"
#include "rci/dataset.hpp"
#include "rci/errors.hpp"
#include "rci/eval.hpp"

using namespace rci;

namespace {

EncoderConfig tiny(std::uint64_t seed = 1) {
  EncoderConfig c;
  c.tokenizer.bucket_count = 512;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_len = 48;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("interaction scores are normalized probabilities") {
  const auto m = ClassifierModel::create(ClassifierKind::kInteraction, tiny());
  CHECK(m.head.in_width() == 16);
  const Table t = test::congress_table();
  for (int i = 1; i <= t.num_rows(); ++i) {
    const auto dist = interaction_distribution(m, test::kCongressQuestion,
                                               serialize_row(t, i, SerializationMode::kDelimited));
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-6));
    const float p = score_interaction(test::kCongressQuestion,
                                      serialize_row(t, i, SerializationMode::kDelimited), m);
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
    CHECK(p == dist(kPositiveClass));
  }
  auto zero = m;
  zero.head.set_zero();
  CHECK(score_interaction("q", "a : b |", zero) == 0.5f);
}

TEST_CASE("representation head geometry") {
  EncoderConfig c = tiny();
  c.d_model = 128;
  c.n_heads = 4;
  const auto m = ClassifierModel::create(ClassifierKind::kRepresentation, c);
  CHECK(m.head.in_width() == 512);
  RowVec<float> r = RowVec<float>::Random(8);
  const RowVec<float> v = combination_vector<float>(r, r);
  CHECK(v.size() == 32);
  CHECK((v.segment(24, 8).array() == 0.0f).all());
  CHECK((v.segment(16, 8).array() == r.array().square()).all());
}

TEST_CASE("cached and online representation scores are identical") {
  const auto m = ClassifierModel::create(ClassifierKind::kRepresentation, tiny(5));
  Rng rng(99);
  const Table t = test::congress_table();
  const std::vector<std::string> questions = {test::kCongressQuestion, "when did mercer leave",
                                              "which notes mention resigned", "name of the member"};
  for (int k = 0; k < 100; ++k) {
    const auto& q = questions[uniform_index(rng, questions.size())];
    const int col = 1 + static_cast<int>(uniform_index(rng, t.num_cols()));
    const auto seq = serialize_column(t, col, SerializationMode::kDelimited);
    const RowVec<float> cached = encode_text(m.encoder, seq, 1);
    const float online = score_representation(q, seq, m);
    const float via_cache = score_representation(
        q, seq, m, std::span<const float>(cached.data(), static_cast<std::size_t>(cached.size())));
    CHECK(online == via_cache);
  }
  std::vector<float> wrong(3, 0.0f);
  CHECK_THROWS_AS(score_representation("q", "s", m, std::span<const float>(wrong)), ValidationError);
}

TEST_CASE("column scores ignore other columns") {
  const auto bundle = RciModelBundle{ClassifierModel::create(ClassifierKind::kInteraction, tiny(1)),
                                     ClassifierModel::create(ClassifierKind::kInteraction, tiny(2)),
                                     SerializationMode::kDelimited};
  const Table t = test::congress_table();
  std::vector<std::string> header = t.header();
  std::vector<std::vector<std::string>> rows = t.rows();
  std::swap(header[0], header[2]);
  for (auto& r : rows) std::swap(r[0], r[2]);
  const Table swapped("congress", header, rows);
  const auto a = score_columns(bundle, test::kCongressQuestion, t);
  const auto b = score_columns(bundle, test::kCongressQuestion, swapped);
  CHECK(a[3] == b[3]);
  CHECK(a[1] == b[1]);
  CHECK(a[0] == b[2]);
}

TEST_CASE("training pairs from weak supervision") {
  const Table t = test::congress_table();
  QAInstance q{"q", test::kCongressQuestion, "congress", {"Pro-Administration"}, std::nullopt,
               std::nullopt};
  const Dataset data({t}, {q});
  const auto pairs = build_training_pairs(data, SerializationMode::kDelimited, TokenizerConfig{}, 64,
                                          true);
  REQUIRE(pairs.rows.size() == 5);
  REQUIRE(pairs.columns.size() == 5);
  std::vector<int> row_labels, col_labels;
  for (const auto& p : pairs.rows) row_labels.push_back(p.label == kPositiveClass ? 1 : 0);
  for (const auto& p : pairs.columns) col_labels.push_back(p.label == kPositiveClass ? 1 : 0);
  CHECK(row_labels == std::vector<int>{0, 1, 0, 1, 1});
  CHECK(col_labels == std::vector<int>{0, 0, 0, 1, 0});
  CHECK(pairs.rows[1].weight == doctest::Approx(2.0 / 3.0));
  CHECK(pairs.rows[0].weight == 1.0f);
  CHECK(pairs.columns[3].weight == doctest::Approx(4.0));

  const auto flat = build_training_pairs(data, SerializationMode::kDelimited, TokenizerConfig{}, 64,
                                         false);
  CHECK(flat.columns[3].weight == 1.0f);

  QAInstance missing = q;
  missing.answers = {"Federalist"};
  const Dataset none({t}, {missing});
  CHECK(build_training_pairs(none, SerializationMode::kDelimited, TokenizerConfig{}, 64).skipped == 1);
  TrainConfig cfg;
  cfg.encoder = tiny();
  CHECK_THROWS_AS(train_rci(none, nullptr, cfg), ValidationError);
  CHECK_THROWS_AS(train_rci(Dataset{}, nullptr, cfg), ValidationError);
}

TEST_CASE("bundle serialization round trip") {
  RciModelBundle b{ClassifierModel::create(ClassifierKind::kInteraction, tiny(1)),
                   ClassifierModel::create(ClassifierKind::kRepresentation, tiny(2)),
                   SerializationMode::kPlain};
  const auto path = (std::filesystem::temp_directory_path() / "rci_bundle.bin").string();
  save_bundle(b, path);
  const auto back = load_bundle(path);
  CHECK(back.format == SerializationMode::kPlain);
  CHECK(back.column.kind == ClassifierKind::kRepresentation);
  CHECK(bundle_bytes(back) == bundle_bytes(b));
  const Table t = test::congress_table();
  CHECK(score_rows(back, "q", t) == score_rows(b, "q", t));
  CHECK(score_columns(back, "q", t) == score_columns(b, "q", t));

  auto bytes = bundle_bytes(b);
  bytes[1] = 'X';
  CHECK_THROWS_AS(bundle_from_bytes(bytes), FormatError);
  bytes = bundle_bytes(b);
  bytes.resize(bytes.size() - 10);
  CHECK_THROWS_AS(bundle_from_bytes(bytes), FormatError);

  const auto qpath = (std::filesystem::temp_directory_path() / "rci_question.bin").string();
  const auto qc = ClassifierModel::create(ClassifierKind::kInteraction, tiny(3), kNumAggTypes);
  save_classifier(qc, qpath);
  const auto qback = load_classifier(qpath);
  CHECK(qback.head.classes() == kNumAggTypes);
  CHECK((qback.head.w.array() == qc.head.w.array()).all());
}

TEST_CASE("short training run stays finite and lowers the loss") {
  GeneratorConfig g;
  g.train = 120;
  g.dev = 20;
  g.test = 1;
  g.seed = 3;
  const auto corpus = generate_synthetic_corpus(g);
  TrainConfig cfg;
  cfg.encoder = tiny(7);
  cfg.encoder.max_len = 64;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.log_every = 10;
  std::vector<TrainLogEntry> row_log;
  int row_steps = 0;
  auto logger = [&](const TrainLogEntry& e) {
    if (e.model == "row" && e.dev_accuracy < 0) row_log.push_back(e);
    if (e.model == "row") row_steps = static_cast<int>(e.step);
  };
  // 1000 optimizer steps on the row model, then stop both. Every question
  // has more rows than the batch size, so each batch is one question.
  const auto rows = build_training_pairs(corpus.train, cfg.format, cfg.encoder.tokenizer,
                                         cfg.encoder.max_len)
                        .rows;
  std::set<int> instances;
  for (const auto& p : rows) instances.insert(p.instance);
  const int steps_per_epoch = static_cast<int>(instances.size());
  cfg.epochs = (1000 + steps_per_epoch - 1) / steps_per_epoch;
  const auto result = train_rci(corpus.train, &corpus.dev, cfg, logger);
  CHECK(row_steps >= 1000);
  CHECK(result.final_bundle.row.encoder.all_finite());
  CHECK(result.final_bundle.row.head.all_finite());
  CHECK(result.final_bundle.column.encoder.all_finite());
  REQUIRE(row_log.size() >= 20);
  double early = 0, late = 0;
  for (int i = 0; i < 5; ++i) early += row_log[i].loss;
  for (std::size_t i = row_log.size() - 5; i < row_log.size(); ++i) late += row_log[i].loss;
  CHECK(late < early);
  CHECK(result.best_row_dev_accuracy >= 0.0);
}
