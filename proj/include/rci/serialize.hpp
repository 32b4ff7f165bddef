#pragma once
// Row/column text serialization and question/sequence pair assembly.

#include <string>
#include <string_view>
#include <vector>

#include "rci/table.hpp"
#include "rci/tokenizer.hpp"

namespace rci {

enum class SerializationMode { kDelimited, kPlain };

enum class Axis { kRow, kColumn };

inline constexpr std::string_view kHeaderDelimiter = ":";
inline constexpr std::string_view kValueDelimiter = "|";

std::string_view mode_name(SerializationMode m);
SerializationMode parse_mode(std::string_view name);

// Delimited: "h1 : v1 | h2 : v2 | ..."; plain: non-empty cell values only.
std::string serialize_row(const Table& table, int row, SerializationMode mode);
// Delimited: "h : v1 | v2 | ..."; plain: header then values.
std::string serialize_column(const Table& table, int col, SerializationMode mode);
std::string serialize(const Table& table, Axis axis, int index, SerializationMode mode);

// Header-only sequence used by the question classifier: "h1 : h2 : ... :".
std::string serialize_header(const std::vector<std::string>& header);

// Joins the levels of a hierarchical header cell with single spaces.
std::string flatten_header(const std::vector<std::string>& levels);

struct SequencePair {
  std::string question;
  std::string sequence;
  Axis axis = Axis::kRow;
  int index = 1;
  SerializationMode mode = SerializationMode::kDelimited;
};

SequencePair make_pair(std::string question, const Table& table, Axis axis, int index,
                       SerializationMode mode);

// Token ids with aligned segment labels (0 = question side, 1 = table side).
struct EncodedPair {
  std::vector<int> ids;
  std::vector<int> segments;
  bool truncated = false;
};

// [CLS] question [SEP] sequence [SEP]. When too long the sequence side is cut
// from its tail; the question is never cut. Throws ValidationError if the
// question alone does not fit.
EncodedPair assemble_pair(std::string_view question, std::string_view sequence,
                          int max_tokens, const TokenizerConfig& tokenizer);

// [CLS] text [SEP], every position labelled `segment`; tail-truncated.
EncodedPair assemble_single(std::string_view text, int segment, int max_tokens,
                            const TokenizerConfig& tokenizer);

}  // namespace rci
