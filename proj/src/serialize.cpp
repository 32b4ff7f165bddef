#include "rci/serialize.hpp"

#include <stdexcept>

#include "rci/errors.hpp"

namespace rci {

namespace {

std::string_view trim_view(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

// Appends `piece` with a single separating space; empty pieces vanish.
void append(std::string& out, std::string_view piece) {
  piece = trim_view(piece);
  if (piece.empty()) return;
  if (!out.empty()) out.push_back(' ');
  out.append(piece);
}

}  // namespace

std::string_view mode_name(SerializationMode m) {
  return m == SerializationMode::kDelimited ? "delimited" : "plain";
}

SerializationMode parse_mode(std::string_view name) {
  if (name == "delimited") return SerializationMode::kDelimited;
  if (name == "plain") return SerializationMode::kPlain;
  throw ValidationError("unknown serialization mode '" + std::string(name) + "'", "format");
}

std::string serialize_row(const Table& table, int row, SerializationMode mode) {
  if (row < 1 || row > table.num_rows()) {
    throw std::out_of_range("row index " + std::to_string(row) + " out of [1, " +
                            std::to_string(table.num_rows()) + "]");
  }
  std::string out;
  for (int j = 1; j <= table.num_cols(); ++j) {
    if (mode == SerializationMode::kDelimited) {
      append(out, table.header_at(j));
      append(out, kHeaderDelimiter);
      append(out, table.cell(row, j));
      append(out, kValueDelimiter);
    } else {
      append(out, table.cell(row, j));
    }
  }
  return out;
}

std::string serialize_column(const Table& table, int col, SerializationMode mode) {
  if (col < 1 || col > table.num_cols()) {
    throw std::out_of_range("column index " + std::to_string(col) + " out of [1, " +
                            std::to_string(table.num_cols()) + "]");
  }
  const bool delimited = mode == SerializationMode::kDelimited;
  std::string out;
  append(out, table.header_at(col));
  if (delimited) append(out, kHeaderDelimiter);
  for (int i = 1; i <= table.num_rows(); ++i) {
    append(out, table.cell(i, col));
    if (delimited) append(out, kValueDelimiter);
  }
  return out;
}

std::string serialize(const Table& table, Axis axis, int index, SerializationMode mode) {
  return axis == Axis::kRow ? serialize_row(table, index, mode)
                            : serialize_column(table, index, mode);
}

std::string serialize_header(const std::vector<std::string>& header) {
  std::string out;
  for (const auto& h : header) {
    append(out, h);
    append(out, kHeaderDelimiter);
  }
  return out;
}

std::string flatten_header(const std::vector<std::string>& levels) {
  std::string out;
  for (const auto& l : levels) append(out, l);
  return out;
}

SequencePair make_pair(std::string question, const Table& table, Axis axis, int index,
                       SerializationMode mode) {
  return SequencePair{std::move(question), serialize(table, axis, index, mode), axis, index,
                      mode};
}

EncodedPair assemble_pair(std::string_view question, std::string_view sequence,
                          int max_tokens, const TokenizerConfig& tokenizer) {
  const auto q = tokenize(question, tokenizer);
  if (q.empty()) throw ValidationError("question must be non-empty", "question");
  const int budget = max_tokens - 3 - static_cast<int>(q.size());
  if (budget < 0) {
    throw ValidationError("question has " + std::to_string(q.size()) +
                              " tokens; with 3 markers it exceeds max_tokens " +
                              std::to_string(max_tokens),
                          "question");
  }
  auto s = tokenize(sequence, tokenizer);
  EncodedPair out;
  if (static_cast<int>(s.size()) > budget) {
    s.resize(budget);
    out.truncated = true;
  }
  out.ids.reserve(q.size() + s.size() + 3);
  out.ids.push_back(kClsId);
  out.ids.insert(out.ids.end(), q.begin(), q.end());
  out.ids.push_back(kSepId);
  out.segments.assign(out.ids.size(), 0);
  out.ids.insert(out.ids.end(), s.begin(), s.end());
  out.ids.push_back(kSepId);
  out.segments.resize(out.ids.size(), 1);
  return out;
}

EncodedPair assemble_single(std::string_view text, int segment, int max_tokens,
                            const TokenizerConfig& tokenizer) {
  if (max_tokens < 2) throw ValidationError("max_tokens must be >= 2", "max_tokens");
  auto t = tokenize(text, tokenizer);
  EncodedPair out;
  if (static_cast<int>(t.size()) > max_tokens - 2) {
    t.resize(max_tokens - 2);
    out.truncated = true;
  }
  out.ids.push_back(kClsId);
  out.ids.insert(out.ids.end(), t.begin(), t.end());
  out.ids.push_back(kSepId);
  out.segments.assign(out.ids.size(), segment);
  return out;
}

}  // namespace rci
