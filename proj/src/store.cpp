#include "rci/store.hpp"

#include <openssl/evp.h>

#include <cstdio>

#include "rci/binio.hpp"
#include "rci/errors.hpp"

namespace rci {

namespace {

constexpr std::string_view kIndexMagic = "RCIX";

}  // namespace

Fingerprint model_fingerprint(const ClassifierModel& model) {
  std::vector<std::uint8_t> bytes;
  write_classifier(bytes, model);
  Fingerprint fp{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), fp.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != fp.size()) {
    throw Error("SHA-256 digest failed");
  }
  return fp;
}

std::string fingerprint_hex(const Fingerprint& fp) {
  std::string out;
  char buf[3];
  for (auto b : fp) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

EmbeddingIndex::EmbeddingIndex(Fingerprint fingerprint, int d_model,
                               std::vector<IndexedTable> tables)
    : fingerprint_(fingerprint), d_model_(d_model), tables_(std::move(tables)) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    const auto& t = tables_[i];
    if (t.columns.size() != static_cast<std::size_t>(t.n_cols) * d_model_ ||
        t.rows.size() != static_cast<std::size_t>(t.n_rows) * d_model_) {
      throw ValidationError("index entry '" + t.table_id + "' has inconsistent vector count",
                            "index");
    }
    if (!by_id_.emplace(t.table_id, i).second) {
      throw ValidationError("duplicate table id '" + t.table_id + "' in index", "index");
    }
  }
}

std::size_t EmbeddingIndex::vector_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.n_cols + t.n_rows;
  return n;
}

const IndexedTable& EmbeddingIndex::table(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw NotFoundError("table '" + id + "' is not in the index");
  return tables_[it->second];
}

std::span<const float> EmbeddingIndex::column_vector(const IndexedTable& t, int col) const {
  if (col < 1 || col > t.n_cols) {
    throw std::out_of_range("column " + std::to_string(col) + " outside index entry");
  }
  return std::span<const float>(t.columns).subspan(static_cast<std::size_t>(col - 1) * d_model_,
                                                   d_model_);
}

std::vector<std::uint8_t> EmbeddingIndex::to_bytes() const {
  std::vector<std::uint8_t> head;
  binio::put_bytes(head, kIndexMagic.data(), kIndexMagic.size());
  binio::put_u8(head, kVersion);
  binio::put_bytes(head, fingerprint_.data(), fingerprint_.size());
  binio::put_u32(head, static_cast<std::uint32_t>(d_model_));
  binio::put_u32(head, static_cast<std::uint32_t>(tables_.size()));
  std::size_t dir_size = 0;
  for (const auto& t : tables_) dir_size += 4 + t.table_id.size() + 4 + 4 + 1 + 8;
  std::uint64_t offset = head.size() + dir_size;
  for (const auto& t : tables_) {
    binio::put_str(head, t.table_id);
    binio::put_u32(head, static_cast<std::uint32_t>(t.n_cols));
    binio::put_u32(head, static_cast<std::uint32_t>(t.n_rows));
    binio::put_u8(head, static_cast<std::uint8_t>(t.mode));
    binio::put_u64(head, offset);
    offset += sizeof(float) * (t.columns.size() + t.rows.size());
  }
  for (const auto& t : tables_) {
    binio::put_bytes(head, t.columns.data(), sizeof(float) * t.columns.size());
    binio::put_bytes(head, t.rows.data(), sizeof(float) * t.rows.size());
  }
  return head;
}

EmbeddingIndex EmbeddingIndex::from_bytes(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  binio::Reader in(bytes, pos, "embedding index");
  in.expect_magic(kIndexMagic);
  const std::uint8_t version = in.u8();
  if (version != kVersion) {
    throw FormatError("embedding index version mismatch: expected " + std::to_string(kVersion) +
                      ", found " + std::to_string(version));
  }
  Fingerprint fp{};
  in.get_bytes(fp.data(), fp.size());
  const int d = static_cast<int>(in.u32());
  const std::uint32_t count = in.u32();
  struct Entry {
    IndexedTable t;
    std::uint64_t offset;
  };
  std::vector<Entry> dir;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.t.table_id = in.str();
    e.t.n_cols = static_cast<int>(in.u32());
    e.t.n_rows = static_cast<int>(in.u32());
    const std::uint8_t mode = in.u8();
    if (mode > 1) throw FormatError("embedding index: unknown serialization mode");
    e.t.mode = static_cast<SerializationMode>(mode);
    e.offset = in.u64();
    dir.push_back(std::move(e));
  }
  std::vector<IndexedTable> tables;
  for (auto& e : dir) {
    std::size_t at = e.offset;
    binio::Reader vin(bytes, at, "embedding index");
    e.t.columns.resize(static_cast<std::size_t>(e.t.n_cols) * d);
    e.t.rows.resize(static_cast<std::size_t>(e.t.n_rows) * d);
    vin.get_bytes(e.t.columns.data(), sizeof(float) * e.t.columns.size());
    vin.get_bytes(e.t.rows.data(), sizeof(float) * e.t.rows.size());
    tables.push_back(std::move(e.t));
  }
  return EmbeddingIndex(fp, d, std::move(tables));
}

void EmbeddingIndex::save(const std::string& path) const {
  binio::write_file_atomic(path, to_bytes());
}

EmbeddingIndex EmbeddingIndex::load(const std::string& path) {
  return from_bytes(binio::read_file(path));
}

EmbeddingIndex materialize(const std::vector<Table>& tables, const ClassifierModel& column_model,
                           const MaterializeOptions& options) {
  if (tables.empty()) throw ValidationError("no tables to materialize", "tables");
  if (column_model.kind != ClassifierKind::kRepresentation) {
    throw ValidationError("materialization requires a representation column model", "model");
  }
  const int d = column_model.encoder.d_model();
  std::vector<IndexedTable> entries;
  entries.reserve(tables.size());
  for (const auto& t : tables) {
    IndexedTable e;
    e.table_id = t.id();
    e.mode = options.mode;
    e.n_cols = t.num_cols();
    e.columns.reserve(static_cast<std::size_t>(e.n_cols) * d);
    for (int j = 1; j <= t.num_cols(); ++j) {
      const RowVec<float> v =
          encode_text(column_model.encoder, serialize_column(t, j, options.mode), 1);
      e.columns.insert(e.columns.end(), v.data(), v.data() + d);
    }
    if (options.include_rows) {
      e.n_rows = t.num_rows();
      for (int i = 1; i <= t.num_rows(); ++i) {
        const RowVec<float> v =
            encode_text(column_model.encoder, serialize_row(t, i, options.mode), 1);
        e.rows.insert(e.rows.end(), v.data(), v.data() + d);
      }
    }
    entries.push_back(std::move(e));
  }
  return EmbeddingIndex(model_fingerprint(column_model), d, std::move(entries));
}

std::vector<double> query_with_store(std::string_view question, const std::string& table_id,
                                     const EmbeddingIndex& index, const ClassifierModel& model,
                                     const std::optional<Fingerprint>& fingerprint) {
  const Fingerprint fp = fingerprint ? *fingerprint : model_fingerprint(model);
  if (fp != index.fingerprint()) {
    throw StaleIndexError("embedding index was built with model " +
                          fingerprint_hex(index.fingerprint()) + " but the loaded model is " +
                          fingerprint_hex(fp) + "; re-run materialization");
  }
  const IndexedTable& entry = index.table(table_id);
  const RowVec<float> rq = encode_text(model.encoder, question, 0);
  std::vector<double> out;
  out.reserve(entry.n_cols);
  for (int j = 1; j <= entry.n_cols; ++j) {
    const auto v = index.column_vector(entry, j);
    const RowVec<float> rc = Eigen::Map<const RowVec<float>>(v.data(), index.d_model());
    out.push_back(score_representation_vectors(rq, rc, model));
  }
  return out;
}

IndexedScorer::IndexedScorer(const RciModelBundle& bundle, const EmbeddingIndex& index)
    : bundle_(bundle), index_(index), fingerprint_(model_fingerprint(bundle.column)) {
  if (fingerprint_ != index_.fingerprint()) {
    throw StaleIndexError("embedding index does not match the column model; re-run "
                          "materialization");
  }
}

AxisProbs IndexedScorer::score(std::string_view question, const Table& table) const {
  if (index_.table(table.id()).mode != bundle_.format) {
    throw StaleIndexError("index entry for '" + table.id() +
                          "' was built with a different serialization mode");
  }
  return {score_rows(bundle_, question, table),
          query_with_store(question, table.id(), index_, bundle_.column, fingerprint_)};
}

}  // namespace rci
